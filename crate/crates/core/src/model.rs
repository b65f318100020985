//! Weighted ℓ2-regularized logistic regression with an optional
//! prejudice-remover term, trained by full-batch gradient descent.
//!
//! The objective for parameters `θ = (w, b)` on a dataset with sample weights
//! `w_i` is
//!
//! ```text
//! Σ_i w_i · nll(θ; x_i, y_i) + λ/2 ‖θ‖² + η · R(θ)
//! ```
//!
//! where `R` is the prejudice index of the model's predictions with respect
//! to one binary sensitive attribute. Each gradient step moves by
//! `learning_rate / n` times the gradient of that sum, `n` being the number of
//! samples, so that one learning rate works across party sizes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};

/// Probabilities inside logarithms are kept this far from 0 and 1.
const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    theta: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            theta: vec![0.0; n_features + 1],
        }
    }

    /// `theta` holds the feature coefficients followed by the bias.
    pub fn from_theta(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidArgument(
                "theta must hold at least the bias".into(),
            ));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn n_features(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn bias(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }

    fn check_dim(&self, n_features: usize) -> Result<()> {
        if n_features != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: n_features,
            });
        }
        Ok(())
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut z = self.theta[d];
        for (t, v) in self.theta[..d].iter().zip(x) {
            z += t * v;
        }
        z
    }

    /// `M[y=1 | x] = σ(w·x + b)`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(sigmoid(self.score_unchecked(x)))
    }

    /// Probabilities for every row of `d`.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<f64>> {
        self.check_dim(d.n_features())?;
        Ok(d.rows().map(|x| sigmoid(self.score_unchecked(x))).collect())
    }
}

pub fn predict_proba(m: &LogisticModel, x: &[f64]) -> Result<f64> {
    m.predict_proba(x)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Source of the `P̂r[y|s]` and `P̂r[y]` estimates inside the prejudice index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrEstimate {
    /// Averages of the model's predicted probabilities, recomputed every step.
    #[default]
    Model,
    /// Empirical label frequencies of the training set (constants in θ).
    Data,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub eta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Sensitive attribute used by the prejudice index; needed when `eta > 0`.
    pub attribute: Option<String>,
    pub pr_estimate: PrEstimate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eta: 0.0,
            learning_rate: 0.5,
            epochs: 50,
            attribute: None,
            pr_estimate: PrEstimate::Model,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda {} must be >= 0",
                self.lambda
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eta {} must be >= 0",
                self.eta
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be > 0",
                self.learning_rate
            )));
        }
        if self.eta > 0.0 && self.attribute.is_none() {
            return Err(Error::InvalidArgument(
                "eta > 0 needs a sensitive attribute for the prejudice index".into(),
            ));
        }
        Ok(())
    }

    /// The sensitive column the regularizer acts on, if it is active.
    fn regularized_column<'a>(&self, d: &'a Dataset) -> Result<Option<&'a [u8]>> {
        self.validate()?;
        match (&self.attribute, self.eta > 0.0) {
            (Some(a), true) => d.sensitive(a).map(Some),
            _ => Ok(None),
        }
    }
}

/// Per-group coefficient `logit(P̂r[1|s]) - logit(P̂r[1])` and the index
/// `Σ_s n_s · KL(P̂r[·|s] ‖ P̂r[·])`, which equals the double sum over samples
/// and labels.
fn prejudice_terms(p: &[f64], s: &[u8], y: &[u8], estimate: PrEstimate) -> ([f64; 2], f64) {
    let n = p.len();
    if n == 0 {
        return ([0.0; 2], 0.0);
    }
    let source: Vec<f64> = match estimate {
        PrEstimate::Model => p.to_vec(),
        PrEstimate::Data => y.iter().map(|&v| f64::from(v)).collect(),
    };
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for (&v, &g) in source.iter().zip(s) {
        sum[g as usize] += v;
        count[g as usize] += 1;
    }
    let clamp = |q: f64| q.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let b = clamp((sum[0] + sum[1]) / n as f64);
    let mut coef = [0.0; 2];
    let mut a = [b; 2];
    for g in 0..2 {
        if count[g] > 0 {
            a[g] = clamp(sum[g] / count[g] as f64);
            coef[g] = logit(a[g]) - logit(b);
        }
    }
    let r = match estimate {
        PrEstimate::Model => (0..2)
            .map(|g| {
                count[g] as f64
                    * (a[g] * (a[g] / b).ln() + (1.0 - a[g]) * ((1.0 - a[g]) / (1.0 - b)).ln())
            })
            .sum(),
        PrEstimate::Data => {
            let mut r = 0.0;
            for (&pi, &g) in p.iter().zip(s) {
                let g = g as usize;
                r += pi * (a[g] / b).ln() + (1.0 - pi) * ((1.0 - a[g]) / (1.0 - b)).ln();
            }
            r
        }
    };
    (coef, r)
}

/// Prejudice index with model-induced estimates.
pub fn prejudice_index(m: &LogisticModel, d: &Dataset, attribute: &str) -> Result<f64> {
    prejudice_index_with(m, d, attribute, PrEstimate::Model)
}

pub fn prejudice_index_with(
    m: &LogisticModel,
    d: &Dataset,
    attribute: &str,
    estimate: PrEstimate,
) -> Result<f64> {
    let s = d.sensitive(attribute)?;
    let p = m.predict_dataset(d)?;
    Ok(prejudice_terms(&p, s, d.labels(), estimate).1)
}

/// Objective value and its gradient in one pass.
pub fn loss_and_gradient(
    m: &LogisticModel,
    d: &Dataset,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    m.check_dim(d.n_features())?;
    let s = cfg.regularized_column(d)?;
    let nf = d.n_features();
    let theta = m.theta();

    let mut loss = 0.0;
    let mut grad = vec![0.0; nf + 1];
    let mut p = Vec::with_capacity(d.len());
    for ((x, &y), &w) in d.rows().zip(d.labels()).zip(d.weights()) {
        let z = m.score_unchecked(x);
        let pi = sigmoid(z);
        loss += w * (softplus(z) - f64::from(y) * z);
        let r = w * (pi - f64::from(y));
        for (g, v) in grad[..nf].iter_mut().zip(x) {
            *g += r * v;
        }
        grad[nf] += r;
        p.push(pi);
    }

    loss += 0.5 * cfg.lambda * theta.iter().map(|t| t * t).sum::<f64>();
    for (g, t) in grad.iter_mut().zip(theta) {
        *g += cfg.lambda * t;
    }

    if let Some(s) = s {
        let (coef, r) = prejudice_terms(&p, s, d.labels(), cfg.pr_estimate);
        loss += cfg.eta * r;
        for ((x, &pi), &g) in d.rows().zip(&p).zip(s) {
            let k = cfg.eta * coef[g as usize] * pi * (1.0 - pi);
            for (gr, v) in grad[..nf].iter_mut().zip(x) {
                *gr += k * v;
            }
            grad[nf] += k;
        }
    }

    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok((loss, grad))
}

pub fn loss(m: &LogisticModel, d: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    loss_and_gradient(m, d, cfg).map(|(l, _)| l)
}

pub fn gradient(m: &LogisticModel, d: &Dataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    loss_and_gradient(m, d, cfg).map(|(_, g)| g)
}

/// Runs `cfg.epochs` gradient-descent steps from `init`.
pub fn train_local(init: &LogisticModel, d: &Dataset, cfg: &TrainConfig) -> Result<LogisticModel> {
    train_with_history(init, d, cfg).map(|(m, _)| m)
}

/// Like [`train_local`], also returning the objective before each step.
pub fn train_with_history(
    init: &LogisticModel,
    d: &Dataset,
    cfg: &TrainConfig,
) -> Result<(LogisticModel, Vec<f64>)> {
    init.check_dim(d.n_features())?;
    cfg.validate()?;
    let mut theta = init.theta.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 || d.is_empty() {
        return Ok((init.clone(), history));
    }
    let step = cfg.learning_rate / d.len() as f64;
    for epoch in 0..cfg.epochs {
        let m = LogisticModel { theta };
        let (loss, grad) = match loss_and_gradient(&m, d, cfg) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => {
                return Err(Error::Diverged {
                    epoch,
                    loss: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        history.push(loss);
        theta = m.theta;
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= step * g;
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
    }
    Ok((LogisticModel { theta }, history))
}

/// Parameters together with the feature names they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub feature_names: Vec<String>,
    pub theta: Vec<f64>,
}

impl Checkpoint {
    pub fn new(m: &LogisticModel, feature_names: &[String]) -> Result<Self> {
        m.check_dim(feature_names.len())?;
        Ok(Self {
            feature_names: feature_names.to_vec(),
            theta: m.theta.clone(),
        })
    }

    pub fn model(&self) -> Result<LogisticModel> {
        let m = LogisticModel::from_theta(self.theta.clone())?;
        m.check_dim(self.feature_names.len())?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.model()?;
        Ok(c)
    }

    /// `name,value` rows, the bias last under the name `bias`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "value"])?;
        let names = self
            .feature_names
            .iter()
            .map(String::as_str)
            .chain(["bias"]);
        for (name, v) in names.zip(&self.theta) {
            w.write_record([name, &v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<checkpoint>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut names = Vec::new();
        let mut theta = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let name = rec.get(0).unwrap_or("").to_string();
            let value = rec.get(1).unwrap_or("");
            let v: f64 = value.parse().map_err(|_| Error::Row {
                row,
                message: format!("bad parameter value `{value}`"),
            })?;
            names.push(name);
            theta.push(v);
        }
        if names.last().map(String::as_str) != Some("bias") {
            return Err(Error::InvalidArgument(
                "checkpoint must end with the bias row".into(),
            ));
        }
        names.pop();
        let c = Self {
            feature_names: names,
            theta,
        };
        c.model()?;
        Ok(c)
    }
}
