use std::path::Path;

use super::raw::RawTable;
use super::schema::DatasetSchema;
use super::{Dataset, SensitiveColumn};
use crate::error::{Error, Result};

const AGE: &[&str] = &["age"];
const EDUCATION_NUM: &[&str] = &[
    "education-num",
    "educational-num",
    "education_num",
    "education.num",
];
const RACE: &[&str] = &["race"];
const SEX: &[&str] = &["sex", "gender"];
const INCOME: &[&str] = &["income", "class", "salary", "income_bracket"];

/// Loads the UCI Adult census table (train and test concatenated, with a
/// header row).
///
/// Only sex, race, age, education-num and income are kept. Age and
/// education-num are binned by decades and one-hot encoded; sex (Male = 1)
/// and race (White = 1) are exposed as sensitive attributes and also kept
/// as model features. The label is 1 for `>50K`. Rows with a missing value
/// (`?` or empty) in a kept column are dropped.
pub fn load_adult(path: impl AsRef<Path>) -> Result<Dataset> {
    adult_from_table(&RawTable::from_path(path)?)
}

/// [`load_adult`] over any reader.
pub fn read_adult<R: std::io::Read>(reader: R) -> Result<Dataset> {
    adult_from_table(&RawTable::read(reader)?)
}

pub(crate) fn adult_from_table(table: &RawTable) -> Result<Dataset> {
    let schema = DatasetSchema::adult();
    let cols = table.require(&[
        ("age", AGE),
        ("education-num", EDUCATION_NUM),
        ("race", RACE),
        ("sex", SEX),
        ("income", INCOME),
    ])?;
    let (c_age, c_edu, c_race, c_sex, c_income) = (cols[0], cols[1], cols[2], cols[3], cols[4]);
    let [age_rule, edu_rule] = &schema.bins[..] else {
        unreachable!("adult schema has two binned columns")
    };
    let [sex_enc, race_enc] = &schema.encodings[..] else {
        unreachable!("adult schema has two sensitive attributes")
    };

    let feature_names = schema.feature_names();
    let d = feature_names.len();
    let age_off = 2;
    let edu_off = age_off + age_rule.bins.len();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut sex = Vec::new();
    let mut race = Vec::new();
    for (row, cells) in table.rows.iter().enumerate() {
        let kept = [c_age, c_edu, c_race, c_sex, c_income].map(|c| cells[c].as_str());
        if kept.iter().any(|v| v.is_empty() || *v == "?") {
            continue;
        }
        let [age, edu, race_raw, sex_raw, income] = kept;
        let err = |message: String| Error::Row { row, message };

        let s_sex = sex_enc
            .encode(sex_raw)
            .ok_or_else(|| err(format!("unknown sex `{sex_raw}`")))?;
        let s_race = race_enc
            .encode(race_raw)
            .ok_or_else(|| err(format!("unknown race `{race_raw}`")))?;
        let y = match income.trim_end_matches('.') {
            ">50K" => 1,
            "<=50K" => 0,
            other => return Err(err(format!("unknown income class `{other}`"))),
        };
        let age = parse_int(age).ok_or_else(|| err(format!("invalid age `{age}`")))?;
        let edu = parse_int(edu).ok_or_else(|| err(format!("invalid education-num `{edu}`")))?;
        let age_bin = age_rule
            .bin_of(age)
            .ok_or_else(|| err(format!("age {age} outside the binned range")))?;
        let edu_bin = edu_rule
            .bin_of(edu)
            .ok_or_else(|| err(format!("education-num {edu} outside the binned range")))?;

        let start = features.len();
        features.resize(start + d, 0.0);
        let x = &mut features[start..];
        x[0] = f64::from(s_sex);
        x[1] = f64::from(s_race);
        x[age_off + age_bin] = 1.0;
        x[edu_off + edu_bin] = 1.0;
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

pub(crate) fn parse_int(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    let v = s.parse::<f64>().ok()?;
    (v.is_finite() && v.fract() == 0.0).then_some(v as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "age,workclass,fnlwgt,education,educational-num,marital-status,occupation,relationship,race,gender,capital-gain,capital-loss,hours-per-week,native-country,income\n";

    fn load(body: &str) -> Result<Dataset> {
        adult_from_table(&RawTable::read(format!("{HEADER}{body}").as_bytes())?)
    }

    #[test]
    fn age_37_sets_only_the_thirties_bin() {
        let d = load("37,Private,1,Bachelors,13,x,x,x,White,Male,0,0,40,US,>50K\n").unwrap();
        let names = d.feature_names();
        let row = d.row(0);
        for (name, v) in names.iter().zip(row) {
            let expected = matches!(
                name.as_str(),
                "sex" | "race" | "age_30-40" | "education_10-20"
            );
            assert_eq!(*v, if expected { 1.0 } else { 0.0 }, "{name}");
        }
        assert_eq!(d.labels(), &[1]);
    }

    #[test]
    fn test_split_label_suffix_and_missing_rows() {
        let d = load(
            "25,?,1,HS-grad,9,x,?,x,Black,Female,0,0,40,?,<=50K.\n\
             40,Private,1,HS-grad,?,x,x,x,White,Male,0,0,40,US,>50K\n",
        )
        .unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.labels(), &[0]);
        assert_eq!(d.sensitive("race").unwrap(), &[0]);
        assert_eq!(d.sensitive("sex").unwrap(), &[0]);
    }

    #[test]
    fn unknown_category_reports_row() {
        let err = load(
            "37,Private,1,Bachelors,13,x,x,x,White,Male,0,0,40,US,>50K\n\
             37,Private,1,Bachelors,13,x,x,x,Purple,Male,0,0,40,US,>50K\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Row { row: 1, .. }), "{err}");
        let err = load("37,Private,1,Bachelors,13,x,x,x,White,Male,0,0,40,US,maybe\n").unwrap_err();
        assert!(matches!(err, Error::Row { row: 0, .. }));
    }

    #[test]
    fn missing_column_is_a_header_error() {
        let err = adult_from_table(
            &RawTable::read("age,race,sex,income\n1,White,Male,>50K\n".as_bytes()).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MalformedHeader(ref m) if m.contains("education-num")));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_adult("/nonexistent/adult.csv"),
            Err(Error::Io { .. })
        ));
    }
}
