use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Adult,
    Compas,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Adult => "adult",
            DatasetKind::Compas => "compas",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adult" => Ok(DatasetKind::Adult),
            "compas" => Ok(DatasetKind::Compas),
            other => Err(Error::InvalidArgument(format!("unknown dataset `{other}`"))),
        }
    }
}

/// Integer binning of one numeric column into labelled half-open intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinRule {
    pub feature: &'static str,
    /// `(label, lower inclusive, upper exclusive)`; `None` is unbounded.
    pub bins: Vec<(&'static str, i64, Option<i64>)>,
}

impl BinRule {
    pub fn bin_of(&self, value: i64) -> Option<usize> {
        self.bins
            .iter()
            .position(|&(_, lo, hi)| value >= lo && hi.is_none_or(|h| value < h))
    }

    pub fn feature_names(&self) -> impl Iterator<Item = String> + '_ {
        self.bins
            .iter()
            .map(move |(label, _, _)| format!("{}_{label}", self.feature))
    }
}

/// How a raw sensitive attribute maps to {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub attribute: &'static str,
    pub privileged: &'static str,
    /// Every value the raw column may take; anything else is an error.
    pub known: &'static [&'static str],
}

impl Encoding {
    pub fn encode(&self, raw: &str) -> Option<u8> {
        if raw == self.privileged {
            Some(1)
        } else if self.known.contains(&raw) {
            Some(0)
        } else {
            None
        }
    }
}

/// Preprocessing recipe for one of the two supported tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    pub kind: DatasetKind,
    pub kept_columns: &'static [&'static str],
    pub bins: Vec<BinRule>,
    pub encodings: Vec<Encoding>,
    /// Raw label value mapped to 1.
    pub favorable: &'static str,
    /// One-hot categorical columns besides the binned ones.
    pub categorical: Vec<(&'static str, &'static [&'static str])>,
}

pub(crate) const ADULT_RACES: &[&str] = &[
    "White",
    "Black",
    "Asian-Pac-Islander",
    "Amer-Indian-Eskimo",
    "Other",
];

pub(crate) const COMPAS_RACES: &[&str] = &[
    "Caucasian",
    "African-American",
    "Hispanic",
    "Other",
    "Asian",
    "Native American",
];

impl DatasetSchema {
    pub fn adult() -> Self {
        let decades = [
            ("10-20", 10, 20),
            ("20-30", 20, 30),
            ("30-40", 30, 40),
            ("40-50", 40, 50),
            ("50-60", 50, 60),
            ("60-70", 60, 70),
            ("70-80", 70, 80),
            ("80-90", 80, 90),
            ("90-100", 90, 100),
        ];
        Self {
            kind: DatasetKind::Adult,
            kept_columns: &["sex", "race", "age", "education-num", "income"],
            bins: vec![
                BinRule {
                    feature: "age",
                    bins: decades.iter().map(|&(l, a, b)| (l, a, Some(b))).collect(),
                },
                BinRule {
                    feature: "education",
                    bins: vec![("0-10", 0, Some(10)), ("10-20", 10, Some(20))],
                },
            ],
            encodings: vec![
                Encoding {
                    attribute: "sex",
                    privileged: "Male",
                    known: &["Male", "Female"],
                },
                Encoding {
                    attribute: "race",
                    privileged: "White",
                    known: ADULT_RACES,
                },
            ],
            favorable: ">50K",
            categorical: vec![],
        }
    }

    pub fn compas() -> Self {
        Self {
            kind: DatasetKind::Compas,
            kept_columns: &[
                "sex",
                "race",
                "age",
                "priors_count",
                "c_charge_degree",
                "two_year_recid",
            ],
            bins: vec![
                BinRule {
                    feature: "age",
                    bins: vec![
                        ("under_25", i64::MIN, Some(25)),
                        ("25-45", 25, Some(46)),
                        ("over_45", 46, None),
                    ],
                },
                BinRule {
                    feature: "priors",
                    bins: vec![("0", 0, Some(1)), ("1-3", 1, Some(4)), ("over_3", 4, None)],
                },
            ],
            encodings: vec![
                Encoding {
                    attribute: "sex",
                    privileged: "Female",
                    known: &["Male", "Female"],
                },
                Encoding {
                    attribute: "race",
                    privileged: "Caucasian",
                    known: COMPAS_RACES,
                },
            ],
            favorable: "0",
            categorical: vec![("charge", &["F", "M"])],
        }
    }

    pub fn for_kind(kind: DatasetKind) -> Self {
        match kind {
            DatasetKind::Adult => Self::adult(),
            DatasetKind::Compas => Self::compas(),
        }
    }

    /// Model feature order: sensitive flags, binned one-hots, categoricals.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .encodings
            .iter()
            .map(|e| e.attribute.to_string())
            .collect();
        for rule in &self.bins {
            names.extend(rule.feature_names());
        }
        for (feature, values) in &self.categorical {
            names.extend(values.iter().map(|v| format!("{feature}_{v}")));
        }
        names
    }
}
