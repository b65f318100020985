use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PartitionSpec, PartyCounts};
use crate::datasets::{stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::federation::{
    preprocess, run_training, write_trace, Mitigation, Party, PreprocessLog, RoundLog,
};
use crate::metrics::{evaluate, underestimation_index, FairnessMetric, FairnessReport};
use crate::model::{train_local, Checkpoint, LogisticModel};
use crate::partition::{
    split_stratified_iid, split_table_driven, split_two_party_ratio, Partition,
};
use crate::reweighing::local_reweigh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Federated,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyResult {
    pub party: usize,
    pub samples: usize,
    pub opted_in: bool,
    /// Underestimation index of the global model on the party's training data.
    pub uei: f64,
    /// The party's model trained alone, evaluated on the global test set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_model: Option<FairnessReport>,
}

/// Pre-processing record and round logs of one federated replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub preprocess: PreprocessLog,
    pub rounds: Vec<RoundLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub seed: u64,
    /// Global model on the global test set.
    pub global: FairnessReport,
    pub parties: Vec<PartyResult>,
    pub theta: Vec<f64>,
    #[serde(skip)]
    pub trace: Option<Trace>,
}

/// Mean and sample standard deviation (n − 1 denominator) over the
/// replications where the metric is defined. `std` is absent below two
/// values and exactly 0 when all values are equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl MetricSummary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: None,
                std: None,
                n,
            };
        }
        if v.iter().all(|&x| x == v[0]) {
            return Self {
                mean: Some(v[0]),
                std: (n > 1).then_some(0.0),
                n,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Self {
            mean: Some(mean),
            std,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub kind: RunKind,
    pub config: ExperimentConfig,
    pub feature_names: Vec<String>,
    pub replications: Vec<ReplicationResult>,
    pub summary: BTreeMap<String, MetricSummary>,
}

/// Keys of the global-model metrics in [`ExperimentResult::summary`], in
/// report order.
pub const GLOBAL_METRICS: [&str; 7] = ["spd", "eod", "aod", "di", "accuracy", "f1", "uei"];

fn global_metric(r: &FairnessReport, key: &str) -> Option<f64> {
    match key {
        "spd" => r.metric(FairnessMetric::Spd),
        "eod" => r.metric(FairnessMetric::Eod),
        "aod" => r.metric(FairnessMetric::Aod),
        "di" => r.metric(FairnessMetric::Di),
        "accuracy" => r.accuracy,
        "f1" => r.f1,
        "uei" => Some(r.uei),
        _ => None,
    }
}

impl ExperimentResult {
    fn assemble(
        kind: RunKind,
        config: &ExperimentConfig,
        feature_names: Vec<String>,
        replications: Vec<ReplicationResult>,
    ) -> Self {
        let mut r = Self {
            name: config.name.clone(),
            kind,
            config: config.clone(),
            feature_names,
            replications,
            summary: BTreeMap::new(),
        };
        r.summary = r.recompute_summary();
        r
    }

    /// Summary statistics from the per-replication values: every global
    /// metric plus `party{id}_uei`.
    pub fn recompute_summary(&self) -> BTreeMap<String, MetricSummary> {
        let mut out = BTreeMap::new();
        for key in GLOBAL_METRICS {
            let s = MetricSummary::of(
                self.replications
                    .iter()
                    .map(|r| global_metric(&r.global, key)),
            );
            out.insert(key.to_string(), s);
        }
        let ids: Vec<usize> = self
            .replications
            .first()
            .map(|r| r.parties.iter().map(|p| p.party).collect())
            .unwrap_or_default();
        for id in ids {
            let s = MetricSummary::of(
                self.replications
                    .iter()
                    .map(|r| r.parties.iter().find(|p| p.party == id).map(|p| p.uei)),
            );
            out.insert(format!("party{id}_uei"), s);
        }
        out
    }

    pub fn mean(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(|s| s.mean)
    }

    pub fn std(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(|s| s.std)
    }

    /// Method tag used in plot data.
    pub fn method_tag(&self) -> String {
        let m = self.config.mitigation.to_string();
        match self.kind {
            RunKind::Federated => m,
            RunKind::Baseline => format!("centralized_{m}"),
        }
    }

    /// Writes `result.json` plus, per replication `r`, `trace_r{r}.jsonl`
    /// (federated runs only) and `model_r{r}.csv`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        let path = dir.join("result.json");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        for r in &self.replications {
            if let Some(t) = &r.trace {
                let path = dir.join(format!("trace_r{}.jsonl", r.replication));
                let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut w = BufWriter::new(file);
                write_trace(&mut w, &t.preprocess, &t.rounds)?;
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
            let model = LogisticModel::from_theta(r.theta.clone())?;
            let ckpt = Checkpoint::new(&model, &self.feature_names)?;
            let path = dir.join(format!("model_r{}.csv", r.replication));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            ckpt.write_csv(BufWriter::new(file))?;
        }
        Ok(())
    }

    pub fn read_from(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join("result.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{}: no `data` path", cfg.name)))?;
    Dataset::load(path)
}

fn party_seed(seed: u64, party: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(party as u64)
}

fn partition(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<Partition> {
    match &cfg.partition {
        PartitionSpec::StratifiedIid {
            parties: PartyCounts::One(n),
        } => split_stratified_iid(train, *n, seed),
        PartitionSpec::StratifiedIid { .. } => Err(Error::Config(format!(
            "{}: expand the party-count sweep before running",
            cfg.name
        ))),
        PartitionSpec::TwoPartyRatio { ratio, per_party } => {
            split_two_party_ratio(train, &cfg.attribute, *ratio, *per_party, seed)
        }
        PartitionSpec::TableDriven { .. } => {
            split_table_driven(train, &cfg.attribute, &cfg.partition.table_rows()?, seed)
        }
    }
}

/// The fixed global split shared by every replication.
pub fn global_split(cfg: &ExperimentConfig, data: &Dataset) -> Result<(Dataset, Dataset)> {
    stratified_split(data, cfg.test_fraction, cfg.split_seed)
}

/// Builds the parties of one replication, before pre-processing.
pub fn build_parties(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<Vec<Party>> {
    let parts = partition(cfg, train, seed)?;
    let k = parts.parties.len();
    let opted = cfg.mitigation.opted_in(k);
    if let Some(&id) = opted.iter().find(|&&id| id == 0 || id > k) {
        return Err(Error::Config(format!(
            "participant {id} is not one of {k} parties"
        )));
    }
    Ok(parts
        .parties
        .into_iter()
        .enumerate()
        .map(|(i, data)| {
            let id = i + 1;
            let on = opted.contains(&id);
            let method = if on {
                cfg.mitigation.method
            } else {
                Mitigation::None
            };
            Party::new(id, data, cfg.train_config(on), party_seed(seed, id)).with_mitigation(method)
        })
        .collect())
}

fn federated_replication(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    replication: usize,
    seed: u64,
) -> Result<ReplicationResult> {
    let attr = cfg.attribute.as_str();
    let parties = build_parties(cfg, train, seed)?;
    let (parties, pre) = preprocess(parties, cfg.mitigation.method, attr, cfg.mitigation.epsilon)?;
    let init = LogisticModel::zeros(train.n_features());
    let (global, rounds) = run_training(&init, &parties, cfg.fusion, cfg.rounds)?;
    let report = evaluate(&global, test, attr)?;

    let party_results = parties
        .par_iter()
        .map(|p| {
            let uei = underestimation_index(&global, &p.data, attr)?;
            let local_model = if cfg.local_models {
                let mut t = p.train_cfg.clone();
                t.epochs *= cfg.rounds;
                let m = train_local(&init, &p.data, &t)?;
                Some(evaluate(&m, test, attr)?)
            } else {
                None
            };
            Ok(PartyResult {
                party: p.id,
                samples: p.data.len(),
                opted_in: p.mitigation != Mitigation::None,
                uei,
                local_model,
            })
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    Ok(ReplicationResult {
        replication,
        seed,
        global: report,
        parties: party_results,
        theta: global.theta().to_vec(),
        trace: Some(Trace {
            preprocess: pre,
            rounds,
        }),
    })
}

/// Training set of the centralized baseline: the whole global training
/// split, reweighed with exact counts when the config reweighs.
pub fn centralized_training_set(cfg: &ExperimentConfig, train: &Dataset) -> Result<Dataset> {
    match cfg.mitigation.method {
        Mitigation::LocalReweigh | Mitigation::GlobalReweigh => {
            local_reweigh(train, &cfg.attribute)
        }
        Mitigation::None | Mitigation::PrejudiceRemover => Ok(train.clone()),
    }
}

fn baseline_replication(
    cfg: &ExperimentConfig,
    pooled: &Dataset,
    test: &Dataset,
    replication: usize,
    seed: u64,
) -> Result<ReplicationResult> {
    let mut t = cfg.train_config(true);
    t.epochs *= cfg.rounds;
    let m = train_local(&LogisticModel::zeros(pooled.n_features()), pooled, &t)?;
    Ok(ReplicationResult {
        replication,
        seed,
        global: evaluate(&m, test, &cfg.attribute)?,
        parties: Vec::new(),
        theta: m.theta().to_vec(),
        trace: None,
    })
}

fn replicate<F>(cfg: &ExperimentConfig, run: F) -> Result<Vec<ReplicationResult>>
where
    F: Fn(usize, u64) -> Result<ReplicationResult> + Sync,
{
    cfg.seeds
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| {
            run(r, seed).map_err(|e| Error::Replication {
                replication: r,
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Runs every seed of `cfg` on `data` (the full prepared dataset).
pub fn run_experiment_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (train, test) = global_split(cfg, data)?;
    let reps = replicate(cfg, |r, seed| {
        federated_replication(cfg, &train, &test, r, seed)
    })?;
    Ok(ExperimentResult::assemble(
        RunKind::Federated,
        cfg,
        data.feature_names().to_vec(),
        reps,
    ))
}

/// Centralized counterpart of [`run_experiment_on`]: one model trained on
/// the pooled training split for `rounds × epochs` epochs, with exact
/// reweighing or the prejudice remover when configured.
pub fn run_baseline_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (train, test) = global_split(cfg, data)?;
    let pooled = centralized_training_set(cfg, &train)?;
    let reps = replicate(cfg, |r, seed| {
        baseline_replication(cfg, &pooled, &test, r, seed)
    })?;
    Ok(ExperimentResult::assemble(
        RunKind::Baseline,
        cfg,
        data.feature_names().to_vec(),
        reps,
    ))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_on(cfg, &load_data(cfg)?)
}

pub fn run_baseline(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_baseline_on(cfg, &load_data(cfg)?)
}
