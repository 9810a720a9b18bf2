//! Benjamini-Hochberg selection with directional (sign) claims.

use crate::study::Sign;

/// `P(Z > z)` for a standard normal `Z`.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Two-sided p-value of `estimate` under a centred normal with standard
/// deviation `sd`.
pub fn two_sided_p(estimate: f64, sd: f64) -> f64 {
    libm::erfc(estimate.abs() / (sd * std::f64::consts::SQRT_2)).min(1.0)
}

/// Step-up rule: indices of the `r` smallest p-values, where `r` is the
/// largest rank with `p_(r) <= r * level / n`. Returned in index order.
pub fn step_up(p_values: &[f64], level: f64) -> Vec<usize> {
    let n = p_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let passing = order
        .iter()
        .enumerate()
        .rposition(|(rank, &i)| p_values[i] <= (rank + 1) as f64 * level / n as f64)
        .map_or(0, |r| r + 1);
    let mut selected = order[..passing].to_vec();
    selected.sort_unstable();
    selected
}

/// Discoveries with their claimed signs.
#[derive(Debug, Clone, PartialEq)]
pub struct Discoveries {
    pub indices: Vec<usize>,
    pub signs: Vec<Sign>,
}

/// Benjamini-Hochberg at `level` on two-sided normal p-values, claiming the
/// sign of each selected estimate.
pub fn bh_directional(estimates: &[f64], assumed_sd: f64, level: f64) -> Discoveries {
    let p: Vec<f64> = estimates.iter().map(|&x| two_sided_p(x, assumed_sd)).collect();
    let indices: Vec<usize> = step_up(&p, level)
        .into_iter()
        .filter(|&i| estimates[i] != 0.0)
        .collect();
    let signs = indices
        .iter()
        .map(|&i| Sign::of(estimates[i]).expect("nonzero estimate"))
        .collect();
    Discoveries { indices, signs }
}
