//! Group fairness metrics, accuracy/F1 and the underestimation index.
//!
//! Group 0 is the unprivileged group and group 1 the privileged one, so every
//! difference metric is `unprivileged - privileged` and `DI` is
//! `unprivileged / privileged`. A metric that cannot be computed (empty
//! group, zero denominator) is `None` and renders as `n/a`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::model::LogisticModel;

/// Half-width of the fair band for SPD, EOD and AOD.
pub const DIFFERENCE_BAND: f64 = 0.1;
/// Fair band for DI.
pub const DI_BAND: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    /// `P(ŷ = 1)`.
    pub fn selection_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fp, self.total())
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.positives())
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.negatives())
    }

    fn merged(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Confusion matrices indexed by sensitive value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub groups: [Confusion; 2],
}

impl GroupConfusion {
    pub fn from_predictions(predicted: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<Self> {
        if predicted.len() != labels.len() || sensitive.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                actual: predicted.len().min(sensitive.len()),
            });
        }
        let mut g = Self::default();
        for ((&p, &y), &s) in predicted.iter().zip(labels).zip(sensitive) {
            g.groups[s as usize].add(p == 1, y == 1);
        }
        Ok(g)
    }

    pub fn unprivileged(&self) -> &Confusion {
        &self.groups[0]
    }

    pub fn privileged(&self) -> &Confusion {
        &self.groups[1]
    }

    pub fn swapped(&self) -> Self {
        Self {
            groups: [self.groups[1], self.groups[0]],
        }
    }

    pub fn pooled(&self) -> Confusion {
        self.groups[0].merged(&self.groups[1])
    }
}

/// Predicts 1 iff `M[y=1|x] ≥ threshold` and tallies by group.
pub fn group_confusion(
    m: &LogisticModel,
    d: &Dataset,
    attribute: &str,
    threshold: f64,
) -> Result<GroupConfusion> {
    let s = d.sensitive(attribute)?;
    let predicted: Vec<u8> = m
        .predict_dataset(d)?
        .into_iter()
        .map(|p| u8::from(p >= threshold))
        .collect();
    GroupConfusion::from_predictions(&predicted, d.labels(), s)
}

pub fn statistical_parity_difference(g: &GroupConfusion) -> Option<f64> {
    Some(g.groups[0].selection_rate()? - g.groups[1].selection_rate()?)
}

pub fn disparate_impact(g: &GroupConfusion) -> Option<f64> {
    let privileged = g.groups[1].selection_rate()?;
    if privileged == 0.0 {
        return None;
    }
    Some(g.groups[0].selection_rate()? / privileged)
}

pub fn equal_opportunity_difference(g: &GroupConfusion) -> Option<f64> {
    Some(g.groups[0].tpr()? - g.groups[1].tpr()?)
}

pub fn average_odds_difference(g: &GroupConfusion) -> Option<f64> {
    let fpr = g.groups[0].fpr()? - g.groups[1].fpr()?;
    let tpr = g.groups[0].tpr()? - g.groups[1].tpr()?;
    Some(0.5 * (fpr + tpr))
}

pub fn accuracy(g: &GroupConfusion) -> Option<f64> {
    let c = g.pooled();
    ratio(c.tp + c.tn, c.total())
}

/// F1 of the favorable class. Zero when nothing is predicted or present
/// positive but the set is non-empty.
pub fn f1(g: &GroupConfusion) -> Option<f64> {
    let c = g.pooled();
    if c.total() == 0 {
        return None;
    }
    let den = 2 * c.tp + c.fp + c.fn_;
    Some(if den == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / den as f64
    })
}

/// `sqrt(1 - Σ sqrt(p·q))` over matching cells.
pub fn hellinger(p: &[f64], q: &[f64]) -> f64 {
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    (1.0 - bc).max(0.0).sqrt()
}

/// Hellinger distance between the empirical `(s, y)` distribution of `d`
/// and the model-induced one, `q(s,y) = (1/n) Σ_{i: s_i = s} M[y|x_i]`.
pub fn underestimation_index(m: &LogisticModel, d: &Dataset, attribute: &str) -> Result<f64> {
    let s = d.sensitive(attribute)?;
    if d.is_empty() {
        return Err(Error::InvalidArgument(
            "underestimation index of an empty dataset".into(),
        ));
    }
    let probs = m.predict_dataset(d)?;
    let n = d.len() as f64;
    let mut p = [0.0; 4];
    let mut q = [0.0; 4];
    for ((&pi, &si), &yi) in probs.iter().zip(s).zip(d.labels()) {
        let base = 2 * si as usize;
        p[base + yi as usize] += 1.0 / n;
        q[base] += (1.0 - pi) / n;
        q[base + 1] += pi / n;
    }
    Ok(hellinger(&p, &q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Fair,
    Unfair,
    Undefined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Fair => "fair",
            Verdict::Unfair => "unfair",
            Verdict::Undefined => "undefined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMetric {
    Spd,
    Eod,
    Aod,
    Di,
}

impl FairnessMetric {
    pub const ALL: [FairnessMetric; 4] = [Self::Spd, Self::Eod, Self::Aod, Self::Di];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spd => "spd",
            Self::Eod => "eod",
            Self::Aod => "aod",
            Self::Di => "di",
        }
    }

    pub fn ideal(self) -> f64 {
        match self {
            Self::Di => 1.0,
            _ => 0.0,
        }
    }

    /// Distance from the ideal value, on the metric's own scale.
    pub fn deviation(self, v: f64) -> f64 {
        (v - self.ideal()).abs()
    }
}

/// Closed fair bands: `|v| ≤ 0.1` for the differences, `0.8 ≤ DI ≤ 1.2`.
pub fn fair_band(metric: FairnessMetric, value: Option<f64>) -> Verdict {
    let Some(v) = value else {
        return Verdict::Undefined;
    };
    let fair = match metric {
        FairnessMetric::Di => (DI_BAND.0..=DI_BAND.1).contains(&v),
        _ => v.abs() <= DIFFERENCE_BAND,
    };
    if fair {
        Verdict::Fair
    } else {
        Verdict::Unfair
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub spd: Verdict,
    pub eod: Verdict,
    pub aod: Verdict,
    pub di: Verdict,
}

impl Verdicts {
    pub fn all_fair(&self) -> bool {
        [self.spd, self.eod, self.aod, self.di]
            .iter()
            .all(|v| *v == Verdict::Fair)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub attribute: String,
    pub spd: Option<f64>,
    pub eod: Option<f64>,
    pub aod: Option<f64>,
    pub di: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub uei: f64,
    pub verdicts: Verdicts,
}

impl FairnessReport {
    pub fn from_parts(attribute: &str, g: &GroupConfusion, uei: f64) -> Self {
        let spd = statistical_parity_difference(g);
        let eod = equal_opportunity_difference(g);
        let aod = average_odds_difference(g);
        let di = disparate_impact(g);
        Self {
            attribute: attribute.to_string(),
            spd,
            eod,
            aod,
            di,
            accuracy: accuracy(g),
            f1: f1(g),
            uei,
            verdicts: Verdicts {
                spd: fair_band(FairnessMetric::Spd, spd),
                eod: fair_band(FairnessMetric::Eod, eod),
                aod: fair_band(FairnessMetric::Aod, aod),
                di: fair_band(FairnessMetric::Di, di),
            },
        }
    }

    pub fn metric(&self, metric: FairnessMetric) -> Option<f64> {
        match metric {
            FairnessMetric::Spd => self.spd,
            FairnessMetric::Eod => self.eod,
            FairnessMetric::Aod => self.aod,
            FairnessMetric::Di => self.di,
        }
    }
}

/// Report for `m` on `d` at threshold 0.5.
pub fn evaluate(m: &LogisticModel, d: &Dataset, attribute: &str) -> Result<FairnessReport> {
    let g = group_confusion(m, d, attribute, 0.5)?;
    let uei = underestimation_index(m, d, attribute)?;
    Ok(FairnessReport::from_parts(attribute, &g, uei))
}

/// `n/a` for undefined values, otherwise four decimals.
pub fn render(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::SensitiveColumn;

    fn conf(tp: usize, fp: usize, tn: usize, fn_: usize) -> Confusion {
        Confusion { tp, fp, tn, fn_ }
    }

    fn groups(u: Confusion, p: Confusion) -> GroupConfusion {
        GroupConfusion { groups: [u, p] }
    }

    #[test]
    fn hand_counted_fixture() {
        // s: 0 0 0 0 1 1 1 1 1 1, y and predictions below
        let s = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let y = [1, 0, 1, 0, 1, 1, 0, 0, 1, 0];
        let p = [1, 1, 0, 0, 1, 1, 1, 0, 0, 0];
        let g = GroupConfusion::from_predictions(&p, &y, &s).unwrap();
        assert_eq!(g.groups[0], conf(1, 1, 1, 1));
        assert_eq!(g.groups[1], conf(2, 1, 2, 1));
        assert_eq!(accuracy(&g), Some(0.6));
        // precision 3/5, recall 3/5
        assert!((f1(&g).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_constant_classifiers() {
        let s = [0, 0, 1, 1, 0, 1];
        let y = [1, 0, 1, 0, 0, 1];
        let perfect = GroupConfusion::from_predictions(&y, &y, &s).unwrap();
        for c in perfect.groups {
            assert_eq!(c.fp + c.fn_, 0);
        }
        assert_eq!(accuracy(&perfect), Some(1.0));
        assert_eq!(f1(&perfect), Some(1.0));
        assert_eq!(equal_opportunity_difference(&perfect), Some(0.0));

        let zero = GroupConfusion::from_predictions(&[0; 6], &y, &s).unwrap();
        for c in zero.groups {
            assert_eq!(c.tp + c.fp, 0);
        }
        let balanced =
            GroupConfusion::from_predictions(&[0; 4], &[1, 0, 1, 0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(accuracy(&balanced), Some(0.5));
        assert_eq!(f1(&balanced), Some(0.0));
    }

    #[test]
    fn rate_arithmetic() {
        // selection 0.25 vs 0.5
        let g = groups(conf(1, 0, 2, 1), conf(1, 1, 1, 1));
        assert_eq!(statistical_parity_difference(&g), Some(-0.25));
        assert_eq!(disparate_impact(&g), Some(0.5));
        assert_eq!(statistical_parity_difference(&g.swapped()), Some(0.25));
        assert_eq!(disparate_impact(&g.swapped()), Some(2.0));

        // TPR 0.6 vs 0.8
        let g = groups(conf(3, 0, 5, 2), conf(4, 0, 5, 1));
        assert!((equal_opportunity_difference(&g).unwrap() + 0.2).abs() < 1e-15);

        // FPR 0.3 vs 0.2, TPR 0.5 vs 0.8
        let g = groups(conf(5, 3, 7, 5), conf(8, 2, 8, 2));
        assert!((average_odds_difference(&g).unwrap() + 0.1).abs() < 1e-15);
        assert_eq!(
            average_odds_difference(&g.swapped()).map(|v| -v),
            average_odds_difference(&g)
        );

        let same = groups(conf(3, 1, 4, 2), conf(3, 1, 4, 2));
        assert_eq!(statistical_parity_difference(&same), Some(0.0));
        assert_eq!(disparate_impact(&same), Some(1.0));
        assert_eq!(average_odds_difference(&same), Some(0.0));

        let none_selected = groups(conf(0, 0, 3, 2), conf(1, 1, 1, 1));
        assert_eq!(disparate_impact(&none_selected), Some(0.0));
    }

    #[test]
    fn undefined_markers() {
        let empty_group = groups(conf(0, 0, 0, 0), conf(1, 1, 1, 1));
        assert_eq!(statistical_parity_difference(&empty_group), None);
        assert_eq!(disparate_impact(&empty_group), None);
        let privileged_never_selected = groups(conf(1, 0, 1, 0), conf(0, 0, 2, 2));
        assert_eq!(disparate_impact(&privileged_never_selected), None);
        let no_positives = groups(conf(0, 1, 1, 0), conf(1, 1, 1, 1));
        assert_eq!(equal_opportunity_difference(&no_positives), None);
        assert_eq!(average_odds_difference(&no_positives), None);
        assert_eq!(accuracy(&GroupConfusion::default()), None);
        assert_eq!(render(None), "n/a");
        assert_eq!(fair_band(FairnessMetric::Di, None), Verdict::Undefined);
    }

    #[test]
    fn bands() {
        assert_eq!(fair_band(FairnessMetric::Spd, Some(-0.05)), Verdict::Fair);
        assert_eq!(fair_band(FairnessMetric::Di, Some(2.02)), Verdict::Unfair);
        assert_eq!(fair_band(FairnessMetric::Spd, Some(0.1)), Verdict::Fair);
        assert_eq!(fair_band(FairnessMetric::Aod, Some(-0.1)), Verdict::Fair);
        assert_eq!(
            fair_band(FairnessMetric::Eod, Some(0.100001)),
            Verdict::Unfair
        );
        assert_eq!(fair_band(FairnessMetric::Di, Some(0.8)), Verdict::Fair);
        assert_eq!(fair_band(FairnessMetric::Di, Some(1.2)), Verdict::Fair);
        assert_eq!(fair_band(FairnessMetric::Di, Some(0.79)), Verdict::Unfair);
    }

    #[test]
    fn spd_zero_iff_di_one() {
        for (a, b) in [(3, 3), (2, 5), (0, 4), (4, 4)] {
            let g = groups(conf(a, 0, 6 - a, 0), conf(b, 0, 6 - b, 0));
            assert_eq!(
                statistical_parity_difference(&g) == Some(0.0),
                disparate_impact(&g) == Some(1.0)
            );
        }
    }

    fn dataset(s: Vec<u8>, y: Vec<u8>) -> Dataset {
        let n = y.len();
        Dataset::new(
            vec!["x".into()],
            (0..n).map(|i| (i % 3) as f64).collect(),
            y,
            vec![SensitiveColumn {
                name: "sex".into(),
                values: s,
            }],
        )
        .unwrap()
    }

    #[test]
    fn uei_zero_for_uniform_model_on_balanced_cells() {
        let d = dataset(vec![0, 0, 1, 1, 0, 0, 1, 1], vec![0, 1, 0, 1, 0, 1, 0, 1]);
        let uei = underestimation_index(&LogisticModel::zeros(1), &d, "sex").unwrap();
        assert!(uei.abs() < 1e-7, "{uei}");
    }

    #[test]
    fn uei_term_by_term() {
        let d = dataset(vec![0, 0, 1, 1, 1, 0, 1], vec![1, 0, 0, 1, 1, 0, 0]);
        let m = LogisticModel::from_theta(vec![0.8, -0.3]).unwrap();
        let s = d.sensitive("sex").unwrap();
        let n = d.len() as f64;
        let mut bc = 0.0;
        for sv in 0..2u8 {
            for yv in 0..2u8 {
                let p = (0..d.len())
                    .filter(|&i| s[i] == sv && d.labels()[i] == yv)
                    .count() as f64
                    / n;
                let q: f64 = (0..d.len())
                    .filter(|&i| s[i] == sv)
                    .map(|i| {
                        let p1 = m.predict_proba(d.row(i)).unwrap();
                        if yv == 1 {
                            p1
                        } else {
                            1.0 - p1
                        }
                    })
                    .sum::<f64>()
                    / n;
                bc += (p * q).sqrt();
            }
        }
        let oracle = (1.0 - bc).sqrt();
        let uei = underestimation_index(&m, &d, "sex").unwrap();
        assert!((uei - oracle).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&uei));
    }

    #[test]
    fn hellinger_extremes() {
        assert_eq!(hellinger(&[0.5, 0.5, 0.0, 0.0], &[0.0, 0.0, 0.5, 0.5]), 1.0);
        assert_eq!(hellinger(&[0.1, 0.2, 0.3, 0.4], &[0.1, 0.2, 0.3, 0.4]), 0.0);
    }

    #[test]
    fn report_json_fields() {
        let g = groups(conf(1, 0, 2, 1), conf(0, 0, 2, 2));
        let r = FairnessReport::from_parts("sex", &g, 0.25);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in [
            "spd", "eod", "aod", "di", "accuracy", "f1", "uei", "verdicts",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["di"].is_null());
        assert_eq!(v["verdicts"]["di"], "undefined");
    }
}
