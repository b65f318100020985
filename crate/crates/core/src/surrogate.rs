//! Synthetic raw files in the layout of the public Adult and Compas tables.
//!
//! These stand in for the real files when those are not available. Each
//! column is drawn independently from published marginals of the real table
//! and the label from a logistic model over the kept columns, fitted to the
//! real table's published cross-tabulations. The output goes through
//! [`load_adult`](crate::datasets::load_adult) and
//! [`load_compas`](crate::datasets::load_compas) unchanged.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::datasets::DatasetKind;
use crate::error::{Error, Result};
use crate::model::sigmoid;
use crate::rng::{seeded, Stream};

/// Rows in the combined Adult train and test files.
pub const ADULT_ROWS: usize = 48_842;
/// Rows in the two-year Compas file before filtering.
pub const COMPAS_ROWS: usize = 7_214;

const ADULT_SEX: [(&str, f64, f64); 2] = [("Male", 0.6685, 0.0), ("Female", 0.3315, -1.769)];

const ADULT_RACE: [(&str, f64, f64); 5] = [
    ("White", 0.855, 0.0),
    ("Black", 0.0959, -1.3018),
    ("Asian-Pac-Islander", 0.0311, 0.1192),
    ("Amer-Indian-Eskimo", 0.0096, -1.3515),
    ("Other", 0.0084, -1.2711),
];

/// (first age, last age, share, logit shift) per decade.
const ADULT_AGE: [(i64, i64, f64, f64); 8] = [
    (17, 19, 0.048, -5.3601),
    (20, 29, 0.247, -2.2377),
    (30, 39, 0.266, 0.0),
    (40, 49, 0.218, 0.6303),
    (50, 59, 0.137, 0.7531),
    (60, 69, 0.063, -0.0552),
    (70, 79, 0.017, -0.7014),
    (80, 90, 0.004, -1.035),
];

/// (education name, count in the real table, logit shift), indexed by
/// education-num − 1.
const ADULT_EDUCATION: [(&str, f64, f64); 16] = [
    ("Preschool", 83.0, -2.9311),
    ("1st-4th", 247.0, -1.9758),
    ("5th-6th", 509.0, -1.4205),
    ("7th-8th", 955.0, -1.2156),
    ("9th", 756.0, -1.3139),
    ("10th", 1389.0, -1.1599),
    ("11th", 1812.0, -1.3985),
    ("12th", 657.0, -0.9896),
    ("HS-grad", 15784.0, 0.0),
    ("Some-college", 10878.0, 0.2603),
    ("Assoc-voc", 2061.0, 0.7248),
    ("Assoc-acdm", 1601.0, 0.7591),
    ("Bachelors", 8025.0, 1.7416),
    ("Masters", 2657.0, 2.577),
    ("Prof-school", 834.0, 3.9339),
    ("Doctorate", 594.0, 3.8177),
];

const ADULT_INTERCEPT: f64 = -1.1134;

const COMPAS_SEX: [(&str, f64, f64); 2] = [("Male", 0.81, 0.0), ("Female", 0.19, -0.5425)];

/// (race, share, logit shift, prior-count bin shares 0 / 1-3 / >3).
const COMPAS_RACE: [(&str, f64, f64, [f64; 3]); 6] = [
    ("African-American", 0.512, 0.0, [0.27, 0.35, 0.38]),
    ("Caucasian", 0.340, -0.3274, [0.40, 0.37, 0.23]),
    ("Hispanic", 0.088, -0.4717, [0.40, 0.37, 0.23]),
    ("Other", 0.0535, -0.5257, [0.40, 0.37, 0.23]),
    ("Asian", 0.0044, -0.9009, [0.40, 0.37, 0.23]),
    ("Native American", 0.0025, 0.4152, [0.40, 0.37, 0.23]),
];

/// (category, first age, last age, share, logit shift).
const COMPAS_AGE: [(&str, i64, i64, f64, f64); 3] = [
    ("Less than 25", 18, 24, 0.218, 0.4905),
    ("25 - 45", 25, 45, 0.572, 0.0),
    ("Greater than 45", 46, 80, 0.210, -0.6864),
];

const COMPAS_PRIORS_SHIFT: [f64; 3] = [0.0, 0.5754, 1.5285];
const COMPAS_CHARGE: [(&str, f64, f64); 2] = [("F", 0.647, 0.0), ("M", 0.353, -0.4685)];
const COMPAS_INTERCEPT: f64 = -0.4076;

/// Share of rows without a screening-to-arrest gap; these also lack a jail
/// entry date.
const COMPAS_NO_ARREST_RECORD: f64 = 0.042;
/// Share of the remaining rows whose gap exceeds 30 days.
const COMPAS_LATE_SCREENING: f64 = 0.10;

fn index<R: Rng>(rng: &mut R, weights: impl IntoIterator<Item = f64>) -> usize {
    WeightedIndex::new(weights)
        .expect("non-empty positive weights")
        .sample(rng)
}

pub fn write_adult<W: Write>(writer: W, rows: usize, seed: u64) -> Result<()> {
    let mut rng = seeded(seed, Stream::Surrogate);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "age",
        "education",
        "educational-num",
        "race",
        "gender",
        "income",
    ])?;
    for _ in 0..rows {
        let sex = index(&mut rng, ADULT_SEX.map(|s| s.1));
        let race = index(&mut rng, ADULT_RACE.map(|r| r.1));
        let decade = index(&mut rng, ADULT_AGE.map(|a| a.2));
        let (lo, hi, _, age_shift) = ADULT_AGE[decade];
        let age = rng.random_range(lo..=hi);
        let edu = index(&mut rng, ADULT_EDUCATION.map(|e| e.1));
        let logit = ADULT_INTERCEPT
            + ADULT_SEX[sex].2
            + ADULT_RACE[race].2
            + age_shift
            + ADULT_EDUCATION[edu].2;
        let income = if rng.random::<f64>() < sigmoid(logit) {
            ">50K"
        } else {
            "<=50K"
        };
        w.write_record([
            age.to_string().as_str(),
            ADULT_EDUCATION[edu].0,
            (edu + 1).to_string().as_str(),
            ADULT_RACE[race].0,
            ADULT_SEX[sex].0,
            income,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<adult>", e))?;
    Ok(())
}

pub fn write_compas<W: Write>(writer: W, rows: usize, seed: u64) -> Result<()> {
    let mut rng = seeded(seed, Stream::Surrogate);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "id",
        "sex",
        "age",
        "age_cat",
        "race",
        "priors_count",
        "c_charge_degree",
        "days_b_screening_arrest",
        "c_jail_in",
        "two_year_recid",
    ])?;
    for id in 1..=rows {
        let sex = index(&mut rng, COMPAS_SEX.map(|s| s.1));
        let race = index(&mut rng, COMPAS_RACE.map(|r| r.1));
        let age_cat = index(&mut rng, COMPAS_AGE.map(|a| a.3));
        let (cat_name, lo, hi, _, age_shift) = COMPAS_AGE[age_cat];
        let age = rng.random_range(lo..=hi);
        let priors_bin = index(&mut rng, COMPAS_RACE[race].3);
        let priors: i64 = match priors_bin {
            0 => 0,
            1 => rng.random_range(1..=3),
            _ => (4 + (-5.0 * (1.0 - rng.random::<f64>()).ln()) as i64).min(38),
        };
        let charge = index(&mut rng, COMPAS_CHARGE.map(|c| c.1));

        let (days, jail) = if rng.random::<f64>() < COMPAS_NO_ARREST_RECORD {
            (String::new(), String::new())
        } else {
            let days: i64 = if rng.random::<f64>() < COMPAS_LATE_SCREENING {
                let gap = rng.random_range(31..=1000);
                if rng.random::<f64>() < 0.8 {
                    -gap
                } else {
                    gap
                }
            } else {
                match rng.random::<f64>() {
                    u if u < 0.6 => -1,
                    u if u < 0.8 => 0,
                    _ => rng.random_range(-30..=30),
                }
            };
            let jail = format!(
                "2013-{:02}-{:02} {:02}:{:02}:{:02}",
                rng.random_range(1..=12),
                rng.random_range(1..=28),
                rng.random_range(0..24),
                rng.random_range(0..60),
                rng.random_range(0..60)
            );
            (days.to_string(), jail)
        };

        let logit = COMPAS_INTERCEPT
            + COMPAS_SEX[sex].2
            + COMPAS_RACE[race].2
            + age_shift
            + COMPAS_PRIORS_SHIFT[priors_bin]
            + COMPAS_CHARGE[charge].2;
        let recid = u8::from(rng.random::<f64>() < sigmoid(logit));
        w.write_record([
            id.to_string().as_str(),
            COMPAS_SEX[sex].0,
            age.to_string().as_str(),
            cat_name,
            COMPAS_RACE[race].0,
            priors.to_string().as_str(),
            COMPAS_CHARGE[charge].0,
            days.as_str(),
            jail.as_str(),
            recid.to_string().as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<compas>", e))?;
    Ok(())
}

/// Writes a full-size synthetic raw file for `kind` to `path`.
pub fn write_raw(kind: DatasetKind, path: impl AsRef<Path>, seed: u64) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let out = BufWriter::new(file);
    match kind {
        DatasetKind::Adult => write_adult(out, ADULT_ROWS, seed),
        DatasetKind::Compas => write_compas(out, COMPAS_ROWS, seed),
    }
}
