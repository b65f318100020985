use std::path::Path;

use super::adult::parse_int;
use super::raw::RawTable;
use super::schema::DatasetSchema;
use super::{Dataset, SensitiveColumn};
use crate::error::{Error, Result};

/// Loads the ProPublica two-year recidivism table.
///
/// Rows whose screening date is more than 30 days away from the arrest
/// (`|days_b_screening_arrest| > 30`) and rows without a jail entry
/// (`c_jail_in` empty) are filtered out. Kept features: sex (Female = 1),
/// race (Caucasian = 1), age binned into under 25 / 25-45 / over 45, prior
/// count binned into 0 / 1-3 / over 3, and charge degree. The label is 1 when
/// the person did not reoffend within two years.
pub fn load_compas(path: impl AsRef<Path>) -> Result<Dataset> {
    compas_from_table(&RawTable::from_path(path)?)
}

/// [`load_compas`] over any reader.
pub fn read_compas<R: std::io::Read>(reader: R) -> Result<Dataset> {
    compas_from_table(&RawTable::read(reader)?)
}

pub(crate) fn compas_from_table(table: &RawTable) -> Result<Dataset> {
    let schema = DatasetSchema::compas();
    let cols = table.require(&[
        ("sex", &["sex"]),
        ("age", &["age"]),
        ("race", &["race"]),
        ("priors_count", &["priors_count"]),
        ("c_charge_degree", &["c_charge_degree"]),
        ("days_b_screening_arrest", &["days_b_screening_arrest"]),
        ("c_jail_in", &["c_jail_in"]),
        ("two_year_recid", &["two_year_recid"]),
    ])?;
    let [age_rule, priors_rule] = &schema.bins[..] else {
        unreachable!("compas schema has two binned columns")
    };
    let [sex_enc, race_enc] = &schema.encodings[..] else {
        unreachable!("compas schema has two sensitive attributes")
    };
    let charges = schema.categorical[0].1;

    let feature_names = schema.feature_names();
    let d = feature_names.len();
    let age_off = 2;
    let priors_off = age_off + age_rule.bins.len();
    let charge_off = priors_off + priors_rule.bins.len();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut sex = Vec::new();
    let mut race = Vec::new();
    for (row, cells) in table.rows.iter().enumerate() {
        let get = |k: usize| cells[cols[k]].as_str();
        let err = |message: String| Error::Row { row, message };

        let days = get(5);
        if !days.is_empty() {
            let days = parse_int(days)
                .ok_or_else(|| err(format!("invalid days_b_screening_arrest `{days}`")))?;
            if days.abs() > 30 {
                continue;
            }
        }
        if get(6).is_empty() {
            continue;
        }
        let kept = [get(0), get(1), get(2), get(3), get(4), get(7)];
        if kept.iter().any(|v| v.is_empty()) {
            continue;
        }
        let [sex_raw, age, race_raw, priors, charge, recid] = kept;

        let s_sex = sex_enc
            .encode(sex_raw)
            .ok_or_else(|| err(format!("unknown sex `{sex_raw}`")))?;
        let s_race = race_enc
            .encode(race_raw)
            .ok_or_else(|| err(format!("unknown race `{race_raw}`")))?;
        let y = match recid {
            "0" => 1,
            "1" => 0,
            other => return Err(err(format!("unknown two_year_recid `{other}`"))),
        };
        let age = parse_int(age).ok_or_else(|| err(format!("invalid age `{age}`")))?;
        let priors =
            parse_int(priors).ok_or_else(|| err(format!("invalid priors_count `{priors}`")))?;
        let age_bin = age_rule
            .bin_of(age)
            .ok_or_else(|| err(format!("age {age} outside the binned range")))?;
        let priors_bin = priors_rule
            .bin_of(priors)
            .ok_or_else(|| err(format!("priors_count {priors} outside the binned range")))?;
        let charge_idx = charges
            .iter()
            .position(|c| *c == charge)
            .ok_or_else(|| err(format!("unknown charge degree `{charge}`")))?;

        let start = features.len();
        features.resize(start + d, 0.0);
        let x = &mut features[start..];
        x[0] = f64::from(s_sex);
        x[1] = f64::from(s_race);
        x[age_off + age_bin] = 1.0;
        x[priors_off + priors_bin] = 1.0;
        x[charge_off + charge_idx] = 1.0;
        labels.push(y);
        sex.push(s_sex);
        race.push(s_race);
    }
    Dataset::new(
        feature_names,
        features,
        labels,
        vec![
            SensitiveColumn {
                name: "sex".into(),
                values: sex,
            },
            SensitiveColumn {
                name: "race".into(),
                values: race,
            },
        ],
    )
}
