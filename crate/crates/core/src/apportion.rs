//! Integer apportionment of real-valued quotas.

/// Quotas within this distance of an integer are treated as that integer, so
/// that e.g. `0.2 * 15` does not round up to 4.
const SNAP: f64 = 1e-9;

pub(crate) fn snap(q: f64) -> f64 {
    let r = q.round();
    if (q - r).abs() < SNAP {
        r
    } else {
        q
    }
}

/// Splits `total` into integer parts proportional to `shares` using the
/// largest-remainder method. Ties go to the lower index. The parts always sum
/// to `total` (when at least one share is positive).
pub fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    if shares.is_empty() || sum <= 0.0 {
        return vec![0; shares.len()];
    }
    let quotas: Vec<f64> = shares
        .iter()
        .map(|s| snap(total as f64 * s / sum))
        .collect();
    round_quotas(&quotas, total)
}

/// Rounds each quota down, then hands out the `total - Σ floor` leftover
/// units to the largest fractional parts.
pub(crate) fn round_quotas(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}
