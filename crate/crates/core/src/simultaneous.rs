//! Confidence regions that bound the disagreement rate of every prefix of a
//! nested family of subsets at once.
//!
//! Blocks `P_1, ..., P_m` (each a union of whole modules) are fixed in
//! advance from the confidence scores. With `S_k` the union of the first `k`
//! blocks, the region is
//!
//! ```text
//! U_k = SDP(S_k) + delta(S) / |S_k|,   k < m
//! U_m = 1 - mu_low(S) / A
//! ```
//!
//! where `delta(s) = max { s_hat(mu) - mu : mu not rejected by s }` and
//! `s_hat(mu)` is the boundary of `{s : phi*_mu(s) <= log alpha}`. The last
//! entry is the exact minimum of the total mean over the region and never
//! exceeds the `delta` form.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::confidence::{check_alpha, mean_lower_bound_tol, MU_REL_TOL};
use crate::optimize::{concave_boundary, golden_min};
use crate::study::AgreementSummary;
use crate::tail_bounds::WidthProfile;
use crate::{Error, Result};

/// Relative tolerance of the `s_hat` boundary search.
const S_REL_TOL: f64 = 1e-9;
const PRESCAN_POINTS: usize = 64;
const MAX_BOUNDARY_ITERS: usize = 400;

/// One parameter as seen by the merged region: its module, whether its signs
/// agree, and its confidence score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Member {
    pub module: usize,
    pub agrees: bool,
    pub score: f64,
}

/// Per-block agreement summaries in nesting order.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedSummaries {
    blocks: Vec<AgreementSummary>,
    cum_sizes: Vec<u64>,
    cum_agree: Vec<u64>,
    profile: WidthProfile,
}

impl NestedSummaries {
    pub fn new(blocks: Vec<AgreementSummary>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut cum_sizes = Vec::with_capacity(blocks.len());
        let mut cum_agree = Vec::with_capacity(blocks.len());
        let (mut size, mut agree) = (0, 0);
        let mut widths: BTreeMap<u64, u64> = BTreeMap::new();
        for b in &blocks {
            size += b.total();
            agree += b.total_agree();
            cum_sizes.push(size);
            cum_agree.push(agree);
            for &w in b.widths() {
                *widths.entry(w).or_default() += 1;
            }
        }
        let profile = WidthProfile::from_counts(widths.into_iter().map(|(w, c)| (w as f64, c)))?;
        Ok(Self {
            blocks,
            cum_sizes,
            cum_agree,
            profile,
        })
    }

    /// Groups each block's members by module. A module may not be split
    /// across blocks.
    pub fn from_members(blocks: &[Vec<Member>]) -> Result<Self> {
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        let mut summaries = Vec::with_capacity(blocks.len());
        for (b, members) in blocks.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptySubset);
            }
            let mut per_module: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
            for m in members {
                if *owner.entry(m.module).or_insert(b) != b {
                    return Err(Error::InvalidStudy(format!(
                        "module {} is split across nested blocks",
                        m.module
                    )));
                }
                let e = per_module.entry(m.module).or_default();
                e.0 += u64::from(m.agrees);
                e.1 += 1;
            }
            let (counts, widths) = per_module.into_values().unzip();
            summaries.push(AgreementSummary::new(counts, widths)?);
        }
        Self::new(summaries)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[AgreementSummary] {
        &self.blocks
    }

    /// `|S_k|` for `k = 1..m`.
    pub fn cum_sizes(&self) -> &[u64] {
        &self.cum_sizes
    }

    /// Agreements within `S_k`.
    pub fn cum_agree(&self) -> &[u64] {
        &self.cum_agree
    }

    pub fn sdps(&self) -> Vec<f64> {
        self.cum_sizes
            .iter()
            .zip(&self.cum_agree)
            .map(|(&n, &x)| (n - x) as f64 / n as f64)
            .collect()
    }

    /// Widths of all modules in the family.
    pub fn width_profile(&self) -> &WidthProfile {
        &self.profile
    }

    pub fn total_agree(&self) -> u64 {
        *self.cum_agree.last().expect("nonempty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Single,
    Merged { cuts: usize },
}

/// Upper bounds `U_k` on the disagreement rate of each prefix `S_k`, holding
/// jointly with probability at least `level`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceRegion {
    pub uppers: Vec<f64>,
    pub sizes: Vec<u64>,
    pub sdps: Vec<f64>,
    pub level: f64,
    pub kind: RegionKind,
}

/// `s_hat(mu)`: the smallest observed sum rejected at level `alpha`.
///
/// When even the maximum sum `A` is not rejected the result is `A`.
pub fn critical_s(profile: &WidthProfile, mu: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let total = profile.total();
    if !(0.0..=total).contains(&mu) {
        return Err(Error::InvalidProblem(format!("mu must lie in [0, {total}], got {mu}")));
    }
    critical_s_log(profile, mu, alpha.ln())
}

fn critical_s_log(profile: &WidthProfile, mu: f64, log_alpha: f64) -> Result<f64> {
    let total = profile.total();
    if mu >= total {
        return Ok(total);
    }
    if mu <= 0.0 {
        return Ok(0.0);
    }
    let top = profile.exponent(mu, total)?;
    if top.log_bound > log_alpha {
        return Ok(total);
    }
    let eval = |s: f64| -> Result<(f64, f64)> {
        let e = profile.exponent(mu, s)?;
        Ok((e.log_bound, -e.t_star))
    };
    concave_boundary(
        eval,
        total,
        (top.log_bound, -top.t_star),
        mu,
        log_alpha,
        S_REL_TOL * total,
        MAX_BOUNDARY_ITERS,
        "critical s",
    )
}

/// `delta` together with the lower end of the acceptance interval and the
/// maximizing mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaDetail {
    pub delta: f64,
    pub mu_low: f64,
    pub argmax_mu: f64,
}

/// Largest excess `s_hat(mu) - mu` over the means not rejected by `s_obs`.
pub fn delta(profile: &WidthProfile, s_obs: f64, alpha: f64) -> Result<f64> {
    Ok(delta_detail(profile, s_obs, alpha)?.delta)
}

pub fn delta_detail(profile: &WidthProfile, s_obs: f64, alpha: f64) -> Result<DeltaDetail> {
    check_alpha(alpha)?;
    let total = profile.total();
    let log_alpha = alpha.ln();
    let mu_low = mean_lower_bound_tol(profile, s_obs, log_alpha, MU_REL_TOL * total)?;
    let gap = |mu: f64| -> Result<f64> { Ok(critical_s_log(profile, mu, log_alpha)? - mu) };

    // The excess need not be unimodal, so locate the best grid cell first.
    let span = total - mu_low;
    let grid: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|j| mu_low + span * j as f64 / (PRESCAN_POINTS - 1) as f64)
        .collect();
    let mut best = (mu_low, f64::NEG_INFINITY);
    let mut best_j = 0;
    for (j, &mu) in grid.iter().enumerate() {
        let g = gap(mu)?;
        if g > best.1 {
            best = (mu, g);
            best_j = j;
        }
    }
    if span > 0.0 {
        let lo = grid[best_j.saturating_sub(1)];
        let hi = grid[(best_j + 1).min(PRESCAN_POINTS - 1)];
        let (mu, neg) = golden_min(
            |mu| Ok(-gap(mu)?),
            lo,
            hi,
            0.0,
            MU_REL_TOL * total,
            "delta maximization",
        )?;
        if -neg > best.1 {
            best = (mu, -neg);
        }
    }
    Ok(DeltaDetail {
        delta: best.1.max(0.0),
        mu_low,
        argmax_mu: best.0,
    })
}

/// The simultaneous region over the prefixes of `nested` at joint level
/// `1 - alpha`.
pub fn simultaneous_region(nested: &NestedSummaries, alpha: f64) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    let profile = nested.width_profile();
    let detail = delta_detail(profile, nested.total_agree() as f64, alpha)?;
    let sdps = nested.sdps();
    let mut uppers: Vec<f64> = nested
        .cum_sizes()
        .iter()
        .zip(&sdps)
        .map(|(&n, &p)| (p + detail.delta / n as f64).clamp(p, 1.0))
        .collect();
    let last = uppers.len() - 1;
    let exact = (1.0 - detail.mu_low / profile.total()).clamp(sdps[last], 1.0);
    uppers[last] = uppers[last].min(exact);
    Ok(ConfidenceRegion {
        uppers,
        sizes: nested.cum_sizes().to_vec(),
        sdps,
        level: 1.0 - alpha,
        kind: RegionKind::Single,
    })
}

/// Intersection of `cuts` simultaneous regions, each at level
/// `1 - alpha / cuts`, built on the members scoring at least each of `cuts`
/// evenly spaced thresholds.
///
/// The bound for the original prefix `S_k` is the smallest bound among the
/// restricted families having a prefix equal to `S_k`. Restricted blocks are
/// reordered by their mean retained score.
pub fn merged_region(blocks: &[Vec<Member>], alpha: f64, cuts: usize) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    if cuts == 0 {
        return Err(Error::InvalidConfig("cuts must be at least 1".into()));
    }
    let original = NestedSummaries::from_members(blocks)?;
    if cuts == 1 {
        let mut region = simultaneous_region(&original, alpha)?;
        region.kind = RegionKind::Merged { cuts };
        return Ok(region);
    }
    let scores = blocks.iter().flatten().map(|m| m.score);
    let lo = scores.clone().fold(f64::INFINITY, f64::min);
    let hi = scores.fold(f64::NEG_INFINITY, f64::max);
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::MissingScores);
    }
    if lo == hi {
        return Err(Error::DegenerateScores);
    }

    let sizes = original.cum_sizes().to_vec();
    let mut uppers = vec![1.0f64; sizes.len()];
    let level_alpha = alpha / cuts as f64;
    for j in 0..cuts {
        let threshold = lo + (hi - lo) * j as f64 / cuts as f64;
        let mut kept: Vec<(usize, Vec<Member>)> = blocks
            .iter()
            .enumerate()
            .map(|(b, ms)| (b, ms.iter().copied().filter(|m| m.score >= threshold).collect::<Vec<_>>()))
            .filter(|(_, ms)| !ms.is_empty())
            .collect();
        if j > 0 {
            kept.sort_by(|x, y| mean_score(&y.1).total_cmp(&mean_score(&x.1)));
        }
        let restricted: Vec<Vec<Member>> = kept.iter().map(|(_, ms)| ms.clone()).collect();
        let region = simultaneous_region(&NestedSummaries::from_members(&restricted)?, level_alpha)?;

        let mut max_block = 0;
        for (k, (orig, _)) in kept.iter().enumerate() {
            max_block = max_block.max(*orig);
            // Same size and contained in S_{max_block} means equal to it.
            if sizes[max_block] == region.sizes[k] {
                uppers[max_block] = uppers[max_block].min(region.uppers[k]);
            }
        }
    }
    Ok(ConfidenceRegion {
        uppers,
        sdps: original.sdps(),
        sizes,
        level: 1.0 - alpha,
        kind: RegionKind::Merged { cuts },
    })
}

fn mean_score(ms: &[Member]) -> f64 {
    ms.iter().map(|m| m.score).sum::<f64>() / ms.len() as f64
}
