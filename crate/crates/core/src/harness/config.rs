use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datasets::DatasetKind;
use crate::error::{Error, Result};
use crate::federation::{FusionStrategy, Mitigation};
use crate::model::{PrEstimate, TrainConfig};
use crate::partition::{GroupRatio, PartyRow, TablePreset};

/// One experiment scenario as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetKind,
    /// Prepared canonical CSV. Relative paths are resolved against the
    /// directory of the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub attribute: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub partition: PartitionSpec,
    #[serde(default)]
    pub mitigation: MitigationSpec,
    #[serde(default)]
    pub fusion: FusionStrategy,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub train: TrainSection,
    /// Also train every party alone and report it on the test set.
    #[serde(default = "default_true")]
    pub local_models: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_rounds() -> usize {
    10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    StratifiedIid {
        parties: PartyCounts,
    },
    TwoPartyRatio {
        #[serde(with = "ratio_str")]
        ratio: GroupRatio,
        per_party: usize,
    },
    TableDriven {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<TablePreset>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<Vec<RowSpec>>,
    },
}

/// A single party count or a sweep over several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartyCounts {
    One(usize),
    Sweep(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    #[serde(with = "ratio_str")]
    pub ratio: GroupRatio,
    pub size: usize,
}

mod ratio_str {
    use super::*;

    pub fn serialize<S: Serializer>(r: &GroupRatio, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}-{}", r.unprivileged, r.privileged))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<GroupRatio, D::Error> {
        let s = String::deserialize(d)?;
        GroupRatio::from_str(&s).map_err(serde::de::Error::custom)
    }
}

impl PartitionSpec {
    /// Number of parties, or `None` for an unexpanded sweep.
    pub fn parties(&self) -> Option<usize> {
        match self {
            PartitionSpec::StratifiedIid {
                parties: PartyCounts::One(n),
            } => Some(*n),
            PartitionSpec::StratifiedIid { .. } => None,
            PartitionSpec::TwoPartyRatio { .. } => Some(2),
            PartitionSpec::TableDriven { .. } => self.table_rows().ok().map(|r| r.len()),
        }
    }

    pub fn table_rows(&self) -> Result<Vec<PartyRow>> {
        match self {
            PartitionSpec::TableDriven { preset, rows } => match (preset, rows) {
                (Some(p), None) => Ok(p.rows()),
                (None, Some(rows)) if !rows.is_empty() => Ok(rows
                    .iter()
                    .map(|r| PartyRow {
                        ratio: r.ratio,
                        size: r.size,
                    })
                    .collect()),
                _ => Err(Error::Config(
                    "table_driven partition needs exactly one of `preset` or a non-empty `rows`"
                        .into(),
                )),
            },
            _ => Err(Error::Config("not a table_driven partition".into())),
        }
    }

    /// Label for the `by_ratio` plot layout.
    pub fn ratio_label(&self) -> Option<String> {
        match self {
            PartitionSpec::TwoPartyRatio { ratio, .. } => {
                Some(format!("{}-{}", ratio.unprivileged, ratio.privileged))
            }
            PartitionSpec::TableDriven {
                preset: Some(p), ..
            } => Some(format!("{p:?}")),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationSpec {
    #[serde(default)]
    pub method: Mitigation,
    /// Opted-in party ids (1-based). All parties when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participants: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl MitigationSpec {
    /// Opted-in party ids for a federation of `parties`.
    pub fn opted_in(&self, parties: usize) -> Vec<usize> {
        if self.method == Mitigation::None {
            return Vec::new();
        }
        match &self.participants {
            Some(ids) => ids.clone(),
            None => (1..=parties).collect(),
        }
    }
}

/// Training hyperparameters shared by all parties. `eta` comes from the
/// mitigation section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub pr_estimate: PrEstimate,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lambda: t.lambda,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            pr_estimate: t.pr_estimate,
        }
    }
}

impl fmt::Display for MitigationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.method {
            Mitigation::None => "none",
            Mitigation::LocalReweigh => "local_reweigh",
            Mitigation::GlobalReweigh => "global_reweigh",
            Mitigation::PrejudiceRemover => "prejudice_remover",
        };
        f.write_str(tag)
    }
}

impl ExperimentConfig {
    /// Minimal config: stratified IID, no mitigation, default training.
    pub fn new(
        name: impl Into<String>,
        dataset: DatasetKind,
        attribute: impl Into<String>,
        parties: usize,
    ) -> Self {
        Self {
            name: name.into(),
            dataset,
            data: None,
            attribute: attribute.into(),
            seeds: default_seeds(),
            replications: None,
            split_seed: 0,
            test_fraction: default_test_fraction(),
            partition: PartitionSpec::StratifiedIid {
                parties: PartyCounts::One(parties),
            },
            mitigation: MitigationSpec::default(),
            fusion: FusionStrategy::default(),
            rounds: default_rounds(),
            train: TrainSection::default(),
            local_models: true,
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and validates a config file, resolving `data` and `out`
    /// against its directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{}: {m}", self.name)));
        if self.name.is_empty() {
            return Err(Error::Config("experiment needs a name".into()));
        }
        if self.seeds.is_empty() {
            return bad("need at least one seed".into());
        }
        if let Some(r) = self.replications {
            if r != self.seeds.len() {
                return bad(format!(
                    "replications = {r} but {} seeds are listed",
                    self.seeds.len()
                ));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "test_fraction {} is outside (0, 1)",
                self.test_fraction
            ));
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        match &self.partition {
            PartitionSpec::StratifiedIid { parties } => {
                let counts = match parties {
                    PartyCounts::One(n) => std::slice::from_ref(n),
                    PartyCounts::Sweep(v) => v.as_slice(),
                };
                if counts.is_empty() || counts.contains(&0) {
                    return bad("party counts must be positive".into());
                }
            }
            PartitionSpec::TwoPartyRatio { per_party, .. } => {
                if *per_party == 0 {
                    return bad("per_party must be positive".into());
                }
            }
            PartitionSpec::TableDriven { .. } => {
                if let Err(e) = self.partition.table_rows() {
                    return bad(e.to_string());
                }
            }
        }

        let m = &self.mitigation;
        match m.method {
            Mitigation::GlobalReweigh => match m.epsilon {
                Some(e) if e > 0.0 && e.is_finite() => {}
                Some(e) => return bad(format!("epsilon must be positive and finite, got {e}")),
                None => return bad("global_reweigh needs `epsilon`".into()),
            },
            _ if m.epsilon.is_some() => {
                return bad(format!("`epsilon` has no effect with method {m}"))
            }
            _ => {}
        }
        match m.method {
            Mitigation::PrejudiceRemover => match m.eta {
                Some(e) if e > 0.0 && e.is_finite() => {}
                Some(e) => return bad(format!("eta must be positive, got {e}")),
                None => return bad("prejudice_remover needs `eta`".into()),
            },
            _ if m.eta.is_some() => return bad(format!("`eta` has no effect with method {m}")),
            _ => {}
        }
        if let Some(ids) = &m.participants {
            if m.method == Mitigation::None {
                return bad("`participants` has no effect without a mitigation method".into());
            }
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != ids.len() {
                return bad("duplicate participant ids".into());
            }
            let max = self.max_parties();
            if let Some(&id) = ids
                .iter()
                .find(|&&id| id == 0 || max.is_some_and(|n| id > n))
            {
                return bad(format!("participant {id} is not a party id"));
            }
        }
        self.train_config(true)
            .validate()
            .or_else(|e| bad(e.to_string()))
    }

    fn max_parties(&self) -> Option<usize> {
        match &self.partition {
            PartitionSpec::StratifiedIid {
                parties: PartyCounts::Sweep(v),
            } => v.iter().copied().max(),
            p => p.parties(),
        }
    }

    /// One config per party count of a sweep; otherwise just `self`.
    /// Expanded names get a `_p{n}` suffix.
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        match &self.partition {
            PartitionSpec::StratifiedIid {
                parties: PartyCounts::Sweep(counts),
            } => counts
                .iter()
                .map(|&n| {
                    let mut c = self.clone();
                    c.name = format!("{}_p{n}", self.name);
                    c.partition = PartitionSpec::StratifiedIid {
                        parties: PartyCounts::One(n),
                    };
                    c
                })
                .collect(),
            _ => vec![self.clone()],
        }
    }

    /// Training config of a party; `mitigating` selects whether the
    /// prejudice term applies.
    pub fn train_config(&self, mitigating: bool) -> TrainConfig {
        let eta = match (self.mitigation.method, mitigating) {
            (Mitigation::PrejudiceRemover, true) => self.mitigation.eta.unwrap_or(0.0),
            _ => 0.0,
        };
        TrainConfig {
            lambda: self.train.lambda,
            eta,
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            attribute: Some(self.attribute.clone()),
            pr_estimate: self.train.pr_estimate,
        }
    }

    /// Share of parties that opted into the mitigation.
    pub fn participation(&self) -> Option<f64> {
        let n = self.partition.parties()?;
        Some(self.mitigation.opted_in(n).len() as f64 / n as f64)
    }
}
