//! Reweighing: per-(group, label) sample weights that make the sensitive
//! attribute and the label independent under the weighted distribution.
//!
//! Weights are computed either from a party's own exact counts
//! ([`local_reweigh`]) or from Laplace-noised counts merged across parties
//! ([`noisy_counts`], [`merge_counts`], [`weights_from_counts`]).

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, Stream};

/// Floor applied to noisy cells before weights are derived.
pub const NOISY_COUNT_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    Exact,
    Noisy,
}

/// `C(s, y)` for one sensitive attribute, indexed `[s][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    attribute: String,
    counts: [[f64; 2]; 2],
    kind: CountKind,
}

impl CountTable {
    /// Exact counts; every cell must be a non-negative integer.
    pub fn exact(attribute: impl Into<String>, counts: [[f64; 2]; 2]) -> Result<Self> {
        if counts
            .iter()
            .flatten()
            .any(|&c| c < 0.0 || c.fract() != 0.0 || !c.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "exact counts must be non-negative integers, got {counts:?}"
            )));
        }
        Ok(Self {
            attribute: attribute.into(),
            counts,
            kind: CountKind::Exact,
        })
    }

    pub fn noisy(attribute: impl Into<String>, counts: [[f64; 2]; 2]) -> Result<Self> {
        if counts.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("noisy counts"));
        }
        Ok(Self {
            attribute: attribute.into(),
            counts,
            kind: CountKind::Noisy,
        })
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn kind(&self) -> CountKind {
        self.kind
    }

    pub fn get(&self, s: u8, y: u8) -> f64 {
        self.counts[s as usize][y as usize]
    }

    pub fn cells(&self) -> [[f64; 2]; 2] {
        self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }

    /// Copy with every cell raised to at least `floor`.
    pub fn clamped(&self, floor: f64) -> Self {
        let mut out = self.clone();
        for c in out.counts.iter_mut().flatten() {
            *c = c.max(floor);
        }
        out
    }
}

/// `W(s, y)` for one sensitive attribute, indexed `[s][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    attribute: String,
    weights: [[f64; 2]; 2],
}

impl WeightTable {
    pub fn new(attribute: impl Into<String>, weights: [[f64; 2]; 2]) -> Result<Self> {
        if weights
            .iter()
            .flatten()
            .any(|&w| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "weights must be positive and finite, got {weights:?}"
            )));
        }
        Ok(Self {
            attribute: attribute.into(),
            weights,
        })
    }

    pub fn ones(attribute: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            weights: [[1.0; 2]; 2],
        }
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn get(&self, s: u8, y: u8) -> f64 {
        self.weights[s as usize][y as usize]
    }

    pub fn cells(&self) -> [[f64; 2]; 2] {
        self.weights
    }

    /// Four rows `s,y,w`. The attribute name is not part of the file.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["s", "y", "w"])?;
        for s in 0..2u8 {
            for y in 0..2u8 {
                w.write_record([s.to_string(), y.to_string(), self.get(s, y).to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<weight table>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(attribute: impl Into<String>, reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["s", "y", "w"] {
            return Err(Error::MalformedHeader(format!(
                "expected `s,y,w`, got `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut weights = [[f64::NAN; 2]; 2];
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
            let err = |message: String| Error::Row { row, message };
            let s: usize = field(0)
                .parse()
                .map_err(|_| err(format!("bad s `{}`", field(0))))?;
            let y: usize = field(1)
                .parse()
                .map_err(|_| err(format!("bad y `{}`", field(1))))?;
            let w: f64 = field(2)
                .parse()
                .map_err(|_| err(format!("bad w `{}`", field(2))))?;
            if s > 1 || y > 1 {
                return Err(err(format!("cell ({s}, {y}) out of range")));
            }
            weights[s][y] = w;
        }
        if weights.iter().flatten().any(|w| w.is_nan()) {
            return Err(Error::InvalidArgument(
                "weight table needs all four cells".into(),
            ));
        }
        Self::new(attribute, weights)
    }
}

pub fn count_pairs(d: &Dataset, attribute: &str) -> Result<CountTable> {
    let s = d.sensitive(attribute)?;
    let mut counts = [[0.0; 2]; 2];
    for (&si, &yi) in s.iter().zip(d.labels()) {
        counts[si as usize][yi as usize] += 1.0;
    }
    CountTable::exact(attribute, counts)
}

/// `W(s,y) = (Σ_y' C(s,y') · Σ_s' C(s',y)) / (C(s,y) · Σ C)`.
///
/// Noisy tables are first clamped to [`NOISY_COUNT_FLOOR`]. A cell whose
/// count or either marginal is zero gets weight 1.
pub fn weights_from_counts(c: &CountTable) -> WeightTable {
    let c = match c.kind {
        CountKind::Noisy => c.clamped(NOISY_COUNT_FLOOR),
        CountKind::Exact => c.clone(),
    };
    let n = c.total();
    let mut weights = [[1.0; 2]; 2];
    for (row, cells) in weights.iter_mut().zip(&c.counts) {
        let group = cells[0] + cells[1];
        for (y, w) in row.iter_mut().enumerate() {
            let label = c.counts[0][y] + c.counts[1][y];
            let cell = cells[y];
            if cell > 0.0 && group > 0.0 && label > 0.0 {
                *w = group * label / (cell * n);
            }
        }
    }
    WeightTable {
        attribute: c.attribute,
        weights,
    }
}

/// Weights every sample by `W(s_i, y_i)`.
pub fn apply_weight_table(d: &Dataset, w: &WeightTable) -> Result<Dataset> {
    let s = d.sensitive(&w.attribute)?;
    let weights = s
        .iter()
        .zip(d.labels())
        .map(|(&si, &yi)| w.get(si, yi))
        .collect();
    d.with_weights(weights)
}

/// Reweighs `d` from its own exact counts.
pub fn local_reweigh(d: &Dataset, attribute: &str) -> Result<Dataset> {
    let w = weights_from_counts(&count_pairs(d, attribute)?);
    apply_weight_table(d, &w)
}

/// Adds independent Laplace(1/ε) noise to each cell.
pub fn noisy_counts(c: &CountTable, epsilon: f64, seed: u64) -> Result<CountTable> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let mut rng = seeded(seed, Stream::DpNoise);
    let scale = 1.0 / epsilon;
    let mut counts = c.counts;
    for cell in counts.iter_mut().flatten() {
        *cell += laplace(&mut rng, scale);
    }
    CountTable::noisy(c.attribute.clone(), counts)
}

/// Inverse-CDF Laplace draw with location 0.
fn laplace<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        if u != -0.5 {
            return -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

/// Cell-wise sum. The result is noisy if any input is.
pub fn merge_counts(tables: &[CountTable]) -> Result<CountTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to merge".into()))?;
    let mut out = first.clone();
    for t in &tables[1..] {
        if t.attribute != out.attribute {
            return Err(Error::InvalidArgument(format!(
                "cannot merge counts for `{}` with counts for `{}`",
                out.attribute, t.attribute
            )));
        }
        for s in 0..2 {
            for y in 0..2 {
                out.counts[s][y] += t.counts[s][y];
            }
        }
        if t.kind == CountKind::Noisy {
            out.kind = CountKind::Noisy;
        }
    }
    Ok(out)
}
