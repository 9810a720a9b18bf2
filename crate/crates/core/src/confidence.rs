//! Confidence intervals for the mean agreement count and the sign
//! disagreement rate, by inverting the tight tail bound.
//!
//! A hypothesis `E[S] <= mu` is rejected at level `alpha` when
//! `log(alpha) >= phi*(widths, mu, S)`. Since `phi*` is nondecreasing and
//! concave in `mu`, the rejected values form an interval `[0, mu_low)` and
//! `mu_low` is found by a safeguarded Newton/bisection search that always
//! reports a point on the rejected side, so rounding only widens intervals.

use serde::Serialize;

use crate::optimize::concave_boundary;
use crate::study::AgreementSummary;
use crate::tail_bounds::WidthProfile;
use crate::{Error, Result};

/// Relative (to the total width) tolerance of the `mu` inversion.
pub const MU_REL_TOL: f64 = 1e-6;
pub const MAX_INVERSION_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    UpperOnly,
    LowerOnly,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// Coverage, `1 - alpha`.
    pub level: f64,
    pub side: Side,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Whether `E[S] <= mu` is rejected at level `alpha` given the observed
/// agreements in `summary`.
pub fn reject_mean_at_most(summary: &AgreementSummary, mu: f64, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    let profile = summary.width_profile();
    if !(0.0..=profile.total()).contains(&mu) {
        return Err(Error::InvalidProblem(format!(
            "mu must lie in [0, {}], got {mu}",
            profile.total()
        )));
    }
    let e = profile.exponent(mu, summary.total_agree() as f64)?;
    Ok(alpha.ln() >= e.log_bound)
}

/// Lower confidence bound for `E[S]`: the infimum of the `mu` not rejected
/// at level `alpha` after observing `s`.
pub fn mean_lower_bound(profile: &WidthProfile, s: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    mean_lower_bound_tol(profile, s, alpha.ln(), MU_REL_TOL * profile.total())
}

pub(crate) fn mean_lower_bound_tol(
    profile: &WidthProfile,
    s: f64,
    log_alpha: f64,
    tol: f64,
) -> Result<f64> {
    let total = profile.total();
    if !(0.0..=total).contains(&s) {
        return Err(Error::InvalidProblem(format!(
            "observed sum must lie in [0, {total}], got {s}"
        )));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let eval = |mu: f64| -> Result<(f64, f64)> {
        let e = profile.exponent(mu, s)?;
        Ok((e.log_bound, e.lambda_star))
    };
    // phi*(0, s) = -inf for s > 0, so mu = 0 is always rejected.
    concave_boundary(
        eval,
        0.0,
        (f64::NEG_INFINITY, f64::INFINITY),
        s,
        log_alpha,
        tol,
        MAX_INVERSION_ITERS,
        "mean lower bound",
    )
}

/// Upper confidence bound for `E[S]`, by reflecting every variable
/// `X_i -> a_i - X_i`.
pub fn mean_upper_bound(profile: &WidthProfile, s: f64, alpha: f64) -> Result<f64> {
    let total = profile.total();
    Ok(total - mean_lower_bound(profile, total - s, alpha)?)
}

/// One-sided interval `[0, U]` for the sign disagreement rate.
pub fn sdr_upper_ci(summary: &AgreementSummary, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let profile = summary.width_profile();
    let mu_low = mean_lower_bound(&profile, summary.total_agree() as f64, alpha)?;
    Ok(Interval {
        lower: 0.0,
        upper: rate_from_mean(mu_low, profile.total()),
        level: 1.0 - alpha,
        side: Side::UpperOnly,
    })
}

/// One-sided interval `[L, 1]` for the sign disagreement rate.
pub fn sdr_lower_ci(summary: &AgreementSummary, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let profile = summary.width_profile();
    let mu_high = mean_upper_bound(&profile, summary.total_agree() as f64, alpha)?;
    Ok(Interval {
        lower: rate_from_mean(mu_high, profile.total()),
        upper: 1.0,
        level: 1.0 - alpha,
        side: Side::LowerOnly,
    })
}

/// Equal-tailed two-sided interval: each side at `alpha / 2`.
pub fn sdr_two_sided_ci(summary: &AgreementSummary, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let upper = sdr_upper_ci(summary, alpha / 2.0)?;
    let lower = sdr_lower_ci(summary, alpha / 2.0)?;
    Ok(Interval {
        lower: lower.lower,
        upper: upper.upper,
        level: 1.0 - alpha,
        side: Side::TwoSided,
    })
}

/// Upper bound on the disagreement rate from the Hoeffding inequality.
pub fn hoeffding_sdr_upper(summary: &AgreementSummary, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let profile = summary.width_profile();
    let s = summary.total_agree() as f64;
    let mu_low = (s - (profile.sum_squares() * (1.0 / alpha).ln() / 2.0).sqrt()).max(0.0);
    Ok(Interval {
        lower: 0.0,
        upper: rate_from_mean(mu_low, profile.total()),
        level: 1.0 - alpha,
        side: Side::UpperOnly,
    })
}

fn rate_from_mean(mu: f64, total: f64) -> f64 {
    (1.0 - mu / total).clamp(0.0, 1.0)
}
