//! Dataset ingestion, canonical encoding and the stratified global split.

mod adult;
mod compas;
mod raw;
mod schema;
mod split;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adult::{load_adult, read_adult};
pub use compas::{load_compas, read_compas};
pub use raw::RawTable;
pub use schema::{BinRule, DatasetKind, DatasetSchema, Encoding};
pub(crate) use split::cells_of;
pub use split::{stratified_split, stratified_split_indices};

/// One binary sensitive attribute column (1 = privileged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveColumn {
    pub name: String,
    pub values: Vec<u8>,
}

/// Binary-labelled tabular data with named binary sensitive attributes and
/// per-sample weights. Features are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    features: Vec<f64>,
    labels: Vec<u8>,
    sensitive: Vec<SensitiveColumn>,
    weights: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset with unit weights.
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        labels: Vec<u8>,
        sensitive: Vec<SensitiveColumn>,
    ) -> Result<Self> {
        let weights = vec![1.0; labels.len()];
        Self::with_parts(feature_names, features, labels, sensitive, weights)
    }

    pub fn with_parts(
        feature_names: Vec<String>,
        features: Vec<f64>,
        labels: Vec<u8>,
        sensitive: Vec<SensitiveColumn>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        let d = feature_names.len();
        if features.len() != n * d {
            return Err(Error::InvalidDataset(format!(
                "feature matrix has {} values, expected {n} x {d}",
                features.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidDataset(format!("label at {i} is not 0/1")));
        }
        for col in &sensitive {
            if col.values.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "sensitive attribute `{}` has {} values, expected {n}",
                    col.name,
                    col.values.len()
                )));
            }
            if let Some(i) = col.values.iter().position(|&s| s > 1) {
                return Err(Error::InvalidDataset(format!(
                    "sensitive attribute `{}` at {i} is not 0/1",
                    col.name
                )));
            }
        }
        for (i, a) in sensitive.iter().enumerate() {
            if sensitive[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate sensitive attribute `{}`",
                    a.name
                )));
            }
        }
        check_weights(&weights, n)?;
        Ok(Self {
            feature_names,
            features,
            labels,
            sensitive,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sensitive_columns(&self) -> &[SensitiveColumn] {
        &self.sensitive
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.sensitive.iter().map(|c| c.name.as_str())
    }

    pub fn sensitive(&self, attribute: &str) -> Result<&[u8]> {
        self.sensitive
            .iter()
            .find(|c| c.name == attribute)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))
    }

    pub fn has_attribute(&self, attribute: &str) -> bool {
        self.sensitive.iter().any(|c| c.name == attribute)
    }

    /// Same samples, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights, self.len())?;
        Ok(Self {
            weights,
            ..self.clone()
        })
    }

    /// Sub-dataset of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let d = self.n_features();
        let mut features = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            feature_names: self.feature_names.clone(),
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sensitive: self
                .sensitive
                .iter()
                .map(|c| SensitiveColumn {
                    name: c.name.clone(),
                    values: indices.iter().map(|&i| c.values[i]).collect(),
                })
                .collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Row-wise concatenation; all parts must share the same schema.
    pub fn concat(parts: &[Dataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot concatenate zero datasets".into()))?;
        let mut out = first.clone();
        for p in &parts[1..] {
            if p.feature_names != out.feature_names
                || p.sensitive.len() != out.sensitive.len()
                || p.sensitive
                    .iter()
                    .zip(&out.sensitive)
                    .any(|(a, b)| a.name != b.name)
            {
                return Err(Error::InvalidDataset(
                    "cannot concatenate datasets with different schemas".into(),
                ));
            }
            out.features.extend_from_slice(&p.features);
            out.labels.extend_from_slice(&p.labels);
            out.weights.extend_from_slice(&p.weights);
            for (dst, src) in out.sensitive.iter_mut().zip(&p.sensitive) {
                dst.values.extend_from_slice(&src.values);
            }
        }
        Ok(out)
    }

    /// Writes the canonical CSV: `w, y, s_<attr>..., f_<feature>...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["w".to_string(), "y".to_string()];
        header.extend(self.sensitive.iter().map(|c| format!("s_{}", c.name)));
        header.extend(self.feature_names.iter().map(|f| format!("f_{f}")));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            record.clear();
            record.push(self.weights[i].to_string());
            record.push(self.labels[i].to_string());
            record.extend(self.sensitive.iter().map(|c| c.values[i].to_string()));
            record.extend(self.row(i).iter().map(f64::to_string));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 2 || cols[0] != "w" || cols[1] != "y" {
            return Err(Error::MalformedHeader(
                "canonical dataset must start with columns `w,y`".into(),
            ));
        }
        let mut sensitive = Vec::new();
        let mut feature_names = Vec::new();
        for c in &cols[2..] {
            if let Some(name) = c.strip_prefix("s_") {
                if !feature_names.is_empty() {
                    return Err(Error::MalformedHeader(format!(
                        "sensitive column `{c}` after feature columns"
                    )));
                }
                sensitive.push(SensitiveColumn {
                    name: name.to_string(),
                    values: Vec::new(),
                });
            } else if let Some(name) = c.strip_prefix("f_") {
                feature_names.push(name.to_string());
            } else {
                return Err(Error::MalformedHeader(format!("unexpected column `{c}`")));
            }
        }
        let mut weights = Vec::new();
        let mut labels = Vec::new();
        let mut features = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let cell = |j: usize| rec.get(j).unwrap_or_default();
            let bad = |what: &str, j: usize| Error::Row {
                row,
                message: format!("invalid {what} `{}`", cell(j)),
            };
            weights.push(cell(0).parse::<f64>().map_err(|_| bad("weight", 0))?);
            labels.push(cell(1).parse::<u8>().map_err(|_| bad("label", 1))?);
            for (k, col) in sensitive.iter_mut().enumerate() {
                col.values
                    .push(cell(2 + k).parse::<u8>().map_err(|_| bad("flag", 2 + k))?);
            }
            let off = 2 + sensitive.len();
            for j in 0..feature_names.len() {
                features.push(
                    cell(off + j)
                        .parse::<f64>()
                        .map_err(|_| bad("feature", off + j))?,
                );
            }
        }
        Self::with_parts(feature_names, features, labels, sensitive, weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::InvalidDataset(format!(
            "{} weights for {n} samples",
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidDataset(format!(
            "weight at {i} is not a positive finite number"
        )));
    }
    Ok(())
}
