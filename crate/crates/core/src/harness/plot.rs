use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::runner::{ExperimentResult, GLOBAL_METRICS};
use crate::error::{Error, Result};
use crate::federation::Mitigation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    ByParties,
    ByRatio,
    ByEpsilon,
    ByFraction,
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::ByParties => "by_parties",
            Layout::ByRatio => "by_ratio",
            Layout::ByEpsilon => "by_epsilon",
            Layout::ByFraction => "by_fraction",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_parties" => Ok(Layout::ByParties),
            "by_ratio" => Ok(Layout::ByRatio),
            "by_epsilon" => Ok(Layout::ByEpsilon),
            "by_fraction" => Ok(Layout::ByFraction),
            other => Err(Error::InvalidArgument(format!("unknown layout `{other}`"))),
        }
    }
}

fn x_value(r: &ExperimentResult, layout: Layout) -> Result<String> {
    let cfg = &r.config;
    let missing =
        |what: &str| Error::Incompatible(format!("`{}` has no {what} for layout {layout}", r.name));
    match layout {
        Layout::ByParties => cfg
            .partition
            .parties()
            .map(|n| n.to_string())
            .ok_or_else(|| missing("single party count")),
        Layout::ByRatio => cfg.partition.ratio_label().ok_or_else(|| missing("ratio")),
        Layout::ByEpsilon => match (cfg.mitigation.method, cfg.mitigation.epsilon) {
            (Mitigation::GlobalReweigh, Some(e)) => Ok(e.to_string()),
            _ => Err(missing("epsilon")),
        },
        Layout::ByFraction => cfg
            .participation()
            .map(|f| f.to_string())
            .ok_or_else(|| missing("participation fraction")),
    }
}

/// Writes `x,method,metric,mean,std`, one row per result and global metric.
/// Undefined statistics are left empty.
pub fn emit_plot_data<W: Write>(
    results: &[ExperimentResult],
    layout: Layout,
    writer: W,
) -> Result<()> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidArgument("no results to plot".into()))?;
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for r in results {
        if r.config.dataset != first.config.dataset || r.config.attribute != first.config.attribute
        {
            return Err(Error::Incompatible(format!(
                "`{}` is {}/{} but `{}` is {}/{}",
                first.name,
                first.config.dataset,
                first.config.attribute,
                r.name,
                r.config.dataset,
                r.config.attribute
            )));
        }
        let x = x_value(r, layout)?;
        let method = r.method_tag();
        if !seen.insert((x.clone(), method.clone())) {
            return Err(Error::Incompatible(format!(
                "two results for x = {x}, method = {method}"
            )));
        }
        rows.push((x, method, r));
    }

    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "method", "metric", "mean", "std"])?;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
    for (x, method, r) in rows {
        for key in GLOBAL_METRICS {
            let s = r.summary.get(key).copied();
            w.write_record([
                x.as_str(),
                method.as_str(),
                key,
                fmt(s.and_then(|s| s.mean)).as_str(),
                fmt(s.and_then(|s| s.std)).as_str(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<plot data>", e))?;
    Ok(())
}
