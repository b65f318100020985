//! Synchronous federated training: pre-processing protocols, local training
//! and parameter fusion, with every aggregator-visible message recorded.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::model::{train_local, LogisticModel, TrainConfig};
use crate::reweighing::{
    apply_weight_table, count_pairs, local_reweigh, merge_counts, noisy_counts,
    weights_from_counts, CountKind, CountTable, WeightTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mitigation {
    #[default]
    None,
    LocalReweigh,
    GlobalReweigh,
    PrejudiceRemover,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Party {
    pub id: usize,
    pub data: Dataset,
    pub mitigation: Mitigation,
    pub train_cfg: TrainConfig,
    pub seed: u64,
}

impl Party {
    pub fn new(id: usize, data: Dataset, train_cfg: TrainConfig, seed: u64) -> Self {
        Self {
            id,
            data,
            mitigation: Mitigation::None,
            train_cfg,
            seed,
        }
    }

    pub fn with_mitigation(mut self, mitigation: Mitigation) -> Self {
        self.mitigation = mitigation;
        self
    }

    /// Only prejudice-removing parties may train with `eta > 0`, and they must.
    pub fn validate(&self) -> Result<()> {
        let pr = self.mitigation == Mitigation::PrejudiceRemover;
        if pr && (self.train_cfg.eta.is_nan() || self.train_cfg.eta <= 0.0) {
            return Err(self.fail(Error::InvalidArgument(
                "prejudice removal needs eta > 0".into(),
            )));
        }
        if !pr && self.train_cfg.eta != 0.0 {
            return Err(self.fail(Error::InvalidArgument(format!(
                "eta = {} set on a party without prejudice removal",
                self.train_cfg.eta
            ))));
        }
        self.train_cfg.validate().map_err(|e| self.fail(e))
    }

    fn fail(&self, source: Error) -> Error {
        Error::Party {
            party: self.id,
            source: Box::new(source),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    SimpleAverage,
    #[default]
    FedavgWeighted,
}

impl FusionStrategy {
    /// Fuses parameter vectors; `samples[i]` is party i's sample count.
    pub fn fuse(self, thetas: &[Vec<f64>], samples: &[usize]) -> Result<Vec<f64>> {
        let first = thetas
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to fuse".into()))?;
        if let Some(bad) = thetas.iter().find(|t| t.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                actual: bad.len(),
            });
        }
        let k = thetas.len();
        let coef: Vec<f64> = match self {
            FusionStrategy::SimpleAverage => vec![1.0 / k as f64; k],
            FusionStrategy::FedavgWeighted => {
                let total: usize = samples.iter().sum();
                if samples.len() != k || total == 0 {
                    return Err(Error::InvalidArgument(
                        "weighted fusion needs a positive sample count per party".into(),
                    ));
                }
                samples.iter().map(|&n| n as f64 / total as f64).collect()
            }
        };
        let mut out = vec![0.0; first.len()];
        for (theta, c) in thetas.iter().zip(&coef) {
            for (o, t) in out.iter_mut().zip(theta) {
                *o += c * t;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AggregatorToParty,
    PartyToAggregator,
}

/// Everything that crosses the party/aggregator boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    NoisyCounts {
        party: usize,
        table: CountTable,
    },
    WeightBroadcast {
        parties: Vec<usize>,
        table: WeightTable,
    },
    GlobalModel {
        parties: Vec<usize>,
        theta: Vec<f64>,
    },
    ModelUpdate {
        party: usize,
        samples: usize,
        theta: Vec<f64>,
    },
}

impl Message {
    /// Counts may only leave a party after noise has been added.
    pub fn noisy_counts(party: usize, table: CountTable) -> Result<Self> {
        if table.kind() != CountKind::Noisy {
            return Err(Error::InvalidArgument(
                "exact counts must not be sent to the aggregator".into(),
            ));
        }
        Ok(Message::NoisyCounts { party, table })
    }

    pub fn direction(&self) -> Direction {
        match self {
            Message::NoisyCounts { .. } | Message::ModelUpdate { .. } => {
                Direction::PartyToAggregator
            }
            Message::WeightBroadcast { .. } | Message::GlobalModel { .. } => {
                Direction::AggregatorToParty
            }
        }
    }
}

/// Messages per direction. An exchange is one half-round: every involved
/// party sends (or receives) once.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeCount {
    pub party_to_aggregator: usize,
    pub aggregator_to_party: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessLog {
    pub round: usize,
    pub method: Mitigation,
    pub participants: Vec<usize>,
    pub messages: Vec<Message>,
    pub exchanges: ExchangeCount,
    /// Extra communication in rounds: the count upload is half a round and
    /// the weight broadcast, which parties must wait for and apply before
    /// training, a full one.
    pub additional_rounds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub messages: Vec<Message>,
    pub exchanges: ExchangeCount,
    pub fused: Vec<f64>,
}

impl RoundLog {
    /// `(party, samples, theta)` for every update received this round.
    pub fn updates(&self) -> impl Iterator<Item = (usize, usize, &[f64])> {
        self.messages.iter().filter_map(|m| match m {
            Message::ModelUpdate {
                party,
                samples,
                theta,
            } => Some((*party, *samples, theta.as_slice())),
            _ => None,
        })
    }
}

/// Applies `method` to every party that opted into it.
///
/// Local reweighing happens inside each party. Global reweighing has each
/// opted-in party upload Laplace-noised counts (seeded by the party's seed),
/// the aggregator merge them into one weight table and broadcast it back.
pub fn preprocess(
    mut parties: Vec<Party>,
    method: Mitigation,
    attribute: &str,
    epsilon: Option<f64>,
) -> Result<(Vec<Party>, PreprocessLog)> {
    let participants: Vec<usize> = parties
        .iter()
        .filter(|p| p.mitigation == method)
        .map(|p| p.id)
        .collect();
    let mut log = PreprocessLog {
        round: 0,
        method,
        participants: participants.clone(),
        messages: Vec::new(),
        exchanges: ExchangeCount::default(),
        additional_rounds: 0.0,
    };
    match method {
        Mitigation::None | Mitigation::PrejudiceRemover => {}
        Mitigation::LocalReweigh => {
            for p in parties.iter_mut().filter(|p| p.mitigation == method) {
                p.data = local_reweigh(&p.data, attribute).map_err(|e| p.fail(e))?;
            }
        }
        Mitigation::GlobalReweigh => {
            let epsilon = epsilon.ok_or_else(|| {
                Error::InvalidArgument("global reweighing needs an epsilon".into())
            })?;
            if participants.is_empty() {
                return Ok((parties, log));
            }
            let mut uploads = Vec::new();
            for p in parties.iter().filter(|p| p.mitigation == method) {
                let exact = count_pairs(&p.data, attribute).map_err(|e| p.fail(e))?;
                let noisy = noisy_counts(&exact, epsilon, p.seed).map_err(|e| p.fail(e))?;
                log.messages
                    .push(Message::noisy_counts(p.id, noisy.clone())?);
                uploads.push(noisy);
            }
            let table = weights_from_counts(&merge_counts(&uploads)?);
            log.messages.push(Message::WeightBroadcast {
                parties: participants.clone(),
                table: table.clone(),
            });
            for p in parties.iter_mut().filter(|p| p.mitigation == method) {
                p.data = apply_weight_table(&p.data, &table).map_err(|e| p.fail(e))?;
            }
            log.exchanges = ExchangeCount {
                party_to_aggregator: 1,
                aggregator_to_party: 1,
            };
            log.additional_rounds = 1.5;
        }
    }
    Ok((parties, log))
}

/// One synchronous round: every party trains from `global`, then the
/// aggregator fuses the results.
pub fn run_round(
    round: usize,
    global: &LogisticModel,
    parties: &[Party],
    fusion: FusionStrategy,
) -> Result<(LogisticModel, RoundLog)> {
    if parties.is_empty() {
        return Err(Error::InvalidArgument(
            "a round needs at least one party".into(),
        ));
    }
    for p in parties {
        p.validate()?;
        if p.data.n_features() != global.n_features() {
            return Err(p.fail(Error::DimensionMismatch {
                expected: global.n_features(),
                actual: p.data.n_features(),
            }));
        }
    }
    let trained: Vec<Result<LogisticModel>> = parties
        .par_iter()
        .map(|p| train_local(global, &p.data, &p.train_cfg).map_err(|e| p.fail(e)))
        .collect();
    let trained = trained.into_iter().collect::<Result<Vec<_>>>()?;

    let thetas: Vec<Vec<f64>> = trained.iter().map(|m| m.theta().to_vec()).collect();
    let samples: Vec<usize> = parties.iter().map(|p| p.data.len()).collect();
    let fused = fusion.fuse(&thetas, &samples)?;

    let mut messages = vec![Message::GlobalModel {
        parties: parties.iter().map(|p| p.id).collect(),
        theta: global.theta().to_vec(),
    }];
    for ((p, theta), &n) in parties.iter().zip(thetas).zip(&samples) {
        messages.push(Message::ModelUpdate {
            party: p.id,
            samples: n,
            theta,
        });
    }
    let log = RoundLog {
        round,
        messages,
        exchanges: ExchangeCount {
            party_to_aggregator: 1,
            aggregator_to_party: 1,
        },
        fused: fused.clone(),
    };
    Ok((LogisticModel::from_theta(fused)?, log))
}

/// `rounds` consecutive rounds, numbered from 1.
pub fn run_training(
    init: &LogisticModel,
    parties: &[Party],
    fusion: FusionStrategy,
    rounds: usize,
) -> Result<(LogisticModel, Vec<RoundLog>)> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be at least 1".into()));
    }
    let mut global = init.clone();
    let mut logs = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let (next, log) = run_round(round, &global, parties, fusion)?;
        global = next;
        logs.push(log);
    }
    Ok((global, logs))
}

/// One JSON object per line: the pre-processing record, then each round.
pub fn write_trace<W: Write>(mut w: W, pre: &PreprocessLog, rounds: &[RoundLog]) -> Result<()> {
    let io = |e| Error::io("<trace>", e);
    serde_json::to_writer(&mut w, pre)?;
    w.write_all(b"\n").map_err(io)?;
    for r in rounds {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}
