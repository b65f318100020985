use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::apportion::{round_quotas, snap};
use crate::error::{Error, Result};
use crate::rng::{seeded, Stream};

/// Above this many candidate roundings the marginal-preserving search gives
/// way to plain largest-remainder rounding.
const MAX_ROUNDINGS: u64 = 200_000;

/// Splits `d` into `(train, test)` with `test_fraction` of the samples in the
/// test part, stratified on the joint (sensitive attributes, label) cell.
pub fn stratified_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(d, test_fraction, seed)?;
    Ok((d.select(&train), d.select(&test)))
}

/// Index form of [`stratified_split`]; both index lists are ascending.
///
/// Per-cell test counts are apportioned so that the total is exactly
/// `round(test_fraction * n)`, every joint cell is within one sample of its
/// quota and, whenever such a rounding exists, so is every
/// (single attribute, label) marginal.
pub fn stratified_split_indices(
    d: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} is not in (0, 1)"
        )));
    }
    if d.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot split an empty dataset".into(),
        ));
    }
    let attrs: Vec<&str> = d.attribute_names().collect();
    let cells = cells_of(d);
    let keys: Vec<&Vec<u8>> = cells.keys().collect();
    let sizes: Vec<usize> = cells.values().map(Vec::len).collect();
    let counts = apportion_cells(&keys, &sizes, test_fraction, d.len());

    for ((key, &size), &k) in keys.iter().zip(&sizes).zip(&counts) {
        if k == 0 || k == size {
            return Err(Error::Stratification(format!(
                "cell {} has {size} sample(s); {k} would go to the test set, leaving one side without it",
                describe(&attrs, key)
            )));
        }
    }

    let mut rng = seeded(seed, Stream::TestSplit);
    let mut train = Vec::with_capacity(d.len());
    let mut test = Vec::new();
    for (members, &k) in cells.values().zip(&counts) {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Samples grouped by `[s_1, ..., s_k, y]`, each group ascending.
pub(crate) fn cells_of(d: &Dataset) -> BTreeMap<Vec<u8>, Vec<usize>> {
    let columns: Vec<&[u8]> = d
        .sensitive_columns()
        .iter()
        .map(|c| c.values.as_slice())
        .collect();
    let mut cells: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for i in 0..d.len() {
        let mut key: Vec<u8> = columns.iter().map(|c| c[i]).collect();
        key.push(d.labels()[i]);
        cells.entry(key).or_default().push(i);
    }
    cells
}

fn describe(attrs: &[&str], key: &[u8]) -> String {
    let mut parts: Vec<String> = attrs
        .iter()
        .zip(key)
        .map(|(a, v)| format!("{a}={v}"))
        .collect();
    parts.push(format!("y={}", key[key.len() - 1]));
    format!("({})", parts.join(", "))
}

fn apportion_cells(keys: &[&Vec<u8>], sizes: &[usize], fraction: f64, n: usize) -> Vec<usize> {
    let quotas: Vec<f64> = sizes.iter().map(|&s| snap(s as f64 * fraction)).collect();
    let total = snap(n as f64 * fraction).round() as usize;
    let floors: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let extra = total - floors.iter().sum::<usize>();
    let candidates: Vec<usize> = (0..quotas.len())
        .filter(|&i| quotas[i].fract() > 0.0)
        .collect();

    // (attribute, value, label) marginals and their allowed count range
    let n_attrs = keys.first().map_or(0, |k| k.len() - 1);
    let mut marginals: Vec<(Vec<usize>, usize, usize)> = Vec::new();
    for a in 0..n_attrs {
        for v in 0..=1u8 {
            for y in 0..=1u8 {
                let members: Vec<usize> = (0..keys.len())
                    .filter(|&c| keys[c][a] == v && keys[c][n_attrs] == y)
                    .collect();
                if members.len() < 2 {
                    continue;
                }
                let q = snap(members.iter().map(|&c| sizes[c] as f64).sum::<f64>() * fraction);
                marginals.push((members, q.floor() as usize, q.ceil() as usize));
            }
        }
    }

    let feasible = |counts: &[usize]| {
        marginals.iter().all(|(members, lo, hi)| {
            let s: usize = members.iter().map(|&c| counts[c]).sum();
            (*lo..=*hi).contains(&s)
        })
    };

    if binomial(candidates.len() as u64, extra as u64) <= MAX_ROUNDINGS {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut counts = floors.clone();
        for_each_combination(candidates.len(), extra, |chosen| {
            counts.copy_from_slice(&floors);
            for &j in chosen {
                counts[candidates[j]] += 1;
            }
            if feasible(&counts) {
                let score: f64 = chosen.iter().map(|&j| quotas[candidates[j]].fract()).sum();
                if best.as_ref().is_none_or(|(b, _)| score > *b + 1e-12) {
                    best = Some((score, counts.clone()));
                }
            }
        });
        if let Some((_, counts)) = best {
            return counts;
        }
    }
    round_quotas(&quotas, total)
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > MAX_ROUNDINGS {
            return u64::MAX;
        }
    }
    acc
}

/// Calls `f` with every size-`k` subset of `0..n`, in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
