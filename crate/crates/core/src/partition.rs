//! Splitting a training set among simulated parties.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::apportion::largest_remainder;
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, Stream};

/// Unprivileged-to-privileged sample ratio in percent, e.g. `80:20`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRatio {
    pub unprivileged: f64,
    pub privileged: f64,
}

impl GroupRatio {
    pub fn new(unprivileged: f64, privileged: f64) -> Result<Self> {
        let r = Self {
            unprivileged,
            privileged,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.unprivileged >= 0.0
            && self.privileged >= 0.0
            && ((self.unprivileged + self.privileged) - 100.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "ratio {self} must be two non-negative percentages summing to 100"
            )))
        }
    }

    pub fn mirrored(&self) -> Self {
        Self {
            unprivileged: self.privileged,
            privileged: self.unprivileged,
        }
    }

    /// `[unprivileged, privileged]` counts out of `size`.
    pub fn apportion(&self, size: usize) -> [usize; 2] {
        let parts = largest_remainder(size, &[self.unprivileged, self.privileged]);
        [parts[0], parts[1]]
    }
}

impl fmt::Display for GroupRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.unprivileged, self.privileged)
    }
}

impl FromStr for GroupRatio {
    type Err = Error;

    /// Accepts `80:20` or `80-20`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once([':', '-'])
            .ok_or_else(|| Error::InvalidArgument(format!("bad ratio `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad ratio `{s}`")))
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

/// One row of a per-party composition table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyRow {
    pub ratio: GroupRatio,
    pub size: usize,
}

/// The four five-party heterogeneous configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TablePreset {
    A1,
    A2,
    B1,
    B2,
}

impl TablePreset {
    pub fn rows(self) -> Vec<PartyRow> {
        let a = [
            (50.0, 50.0),
            (50.0, 50.0),
            (80.0, 20.0),
            (90.0, 10.0),
            (60.0, 40.0),
        ];
        let equal = [2000, 2000, 2000, 2000, 2000];
        let unequal = [500, 1500, 2000, 800, 1700];
        let (sizes, flip) = match self {
            TablePreset::A1 => (equal, false),
            TablePreset::A2 => (unequal, false),
            TablePreset::B1 => (equal, true),
            TablePreset::B2 => (unequal, true),
        };
        a.iter()
            .zip(sizes)
            .map(|(&(u, p), size)| {
                let ratio = GroupRatio {
                    unprivileged: u,
                    privileged: p,
                };
                PartyRow {
                    ratio: if flip { ratio.mirrored() } else { ratio },
                    size,
                }
            })
            .collect()
    }
}

/// Party datasets plus, for each party, the source row of every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub parties: Vec<Dataset>,
    pub provenance: Vec<Vec<usize>>,
}

impl Partition {
    fn from_indices(d: &Dataset, mut provenance: Vec<Vec<usize>>) -> Self {
        for p in &mut provenance {
            p.sort_unstable();
        }
        Self {
            parties: provenance.iter().map(|idx| d.select(idx)).collect(),
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }
}

/// Deals `d` among `n_parties` so that every party has ⌊n/k⌋ or ⌈n/k⌉
/// samples and, within one sample, the source's (sensitive, label) mix.
pub fn split_stratified_iid(d: &Dataset, n_parties: usize, seed: u64) -> Result<Partition> {
    if n_parties == 0 {
        return Err(Error::InvalidArgument("need at least one party".into()));
    }
    if n_parties > d.len() {
        return Err(Error::Partition(format!(
            "{n_parties} parties but only {} samples",
            d.len()
        )));
    }
    let mut rng = seeded(seed, Stream::Partition);
    let mut provenance = vec![Vec::with_capacity(d.len() / n_parties + 1); n_parties];
    let mut next = 0usize;
    for mut members in crate::datasets::cells_of(d).into_values() {
        members.shuffle(&mut rng);
        for i in members {
            provenance[next % n_parties].push(i);
            next += 1;
        }
    }
    Ok(Partition::from_indices(d, provenance))
}

/// Two mirrored parties of `per_party` samples each: Party 2 has `ratio`
/// (unprivileged:privileged) and Party 1 the mirror image, so `85:15` gives
/// Party 1 85% privileged and Party 2 85% unprivileged samples.
pub fn split_two_party_ratio(
    d: &Dataset,
    attribute: &str,
    ratio: GroupRatio,
    per_party: usize,
    seed: u64,
) -> Result<Partition> {
    ratio.validate()?;
    let s = d.sensitive(attribute)?;
    let demands = [
        ratio.mirrored().apportion(per_party),
        ratio.apportion(per_party),
    ];
    draw_groups(d, s, &demands, seed).map_err(|short| {
        Error::Partition(format!(
            "not enough samples with {attribute}={}, y={} for both parties: need {}, have {} (short by {})",
            short.group,
            short.label,
            short.needed,
            short.available,
            short.needed - short.available
        ))
    })
}

/// Party `i` gets `rows[i].size` samples at `rows[i].ratio`.
pub fn split_table_driven(
    d: &Dataset,
    attribute: &str,
    rows: &[PartyRow],
    seed: u64,
) -> Result<Partition> {
    for (i, r) in rows.iter().enumerate() {
        r.ratio
            .validate()
            .map_err(|e| Error::Partition(format!("row {i}: {e}")))?;
    }
    let s = d.sensitive(attribute)?;
    let demands: Vec<[usize; 2]> = rows.iter().map(|r| r.ratio.apportion(r.size)).collect();
    draw_groups(d, s, &demands, seed).map_err(|short| {
        Error::Partition(format!(
            "row {} is infeasible: {attribute}={}, y={} needs {} samples up to this row, {} available",
            short.party, short.group, short.label, short.needed, short.available
        ))
    })
}

struct Shortfall {
    party: usize,
    group: usize,
    label: usize,
    needed: usize,
    available: usize,
}

/// Draws `demands[party][group]` samples per party without replacement,
/// parties in order. Within each group the label mix follows the source.
/// Feasibility is checked before anything is drawn.
fn draw_groups(
    d: &Dataset,
    s: &[u8],
    demands: &[[usize; 2]],
    seed: u64,
) -> Result<Partition, Shortfall> {
    let mut pools: [[Vec<usize>; 2]; 2] = Default::default();
    for i in 0..d.len() {
        pools[s[i] as usize][d.labels()[i] as usize].push(i);
    }

    // (party, group, label) demand, label mix apportioned from the source group
    let per_label: Vec<[[usize; 2]; 2]> = demands
        .iter()
        .map(|groups| {
            let mut out = [[0; 2]; 2];
            for g in 0..2 {
                let sizes = [pools[g][0].len() as f64, pools[g][1].len() as f64];
                out[g] = if sizes[0] + sizes[1] > 0.0 {
                    let parts = largest_remainder(groups[g], &sizes);
                    [parts[0], parts[1]]
                } else {
                    [groups[g], 0]
                };
            }
            out
        })
        .collect();

    let mut used = [[0usize; 2]; 2];
    for (party, want) in per_label.iter().enumerate() {
        for g in 0..2 {
            for y in 0..2 {
                used[g][y] += want[g][y];
                if used[g][y] > pools[g][y].len() {
                    return Err(Shortfall {
                        party,
                        group: g,
                        label: y,
                        needed: used[g][y],
                        available: pools[g][y].len(),
                    });
                }
            }
        }
    }

    let mut rng = seeded(seed, Stream::Partition);
    for group in pools.iter_mut() {
        for pool in group.iter_mut() {
            pool.shuffle(&mut rng);
        }
    }
    let mut cursor = [[0usize; 2]; 2];
    let provenance = per_label
        .iter()
        .map(|want| {
            let mut idx = Vec::new();
            for g in 0..2 {
                for y in 0..2 {
                    let start = cursor[g][y];
                    idx.extend_from_slice(&pools[g][y][start..start + want[g][y]]);
                    cursor[g][y] += want[g][y];
                }
            }
            idx
        })
        .collect();
    Ok(Partition::from_indices(d, provenance))
}
