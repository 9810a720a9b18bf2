//! Worst-case Chernoff-Cramér exponents for sums of independent variables
//! bounded on intervals of heterogeneous width.
//!
//! For widths `a_1..a_m`, a mean budget `mu` and a threshold `s`, the exponent
//!
//! ```text
//! phi*(s) = min_{t >= 0} max_{tau in prod [0, a_i], sum tau = mu}
//!               sum_i log(1 + xi(a_i, t) tau_i) - t s,     xi(a, t) = (e^{a t} - 1) / a
//! ```
//!
//! is the largest log Chernoff bound on `P(S >= s)` over every product of
//! distributions on `[0, a_i]` whose means sum to at most `mu`. The inner
//! maximum is a concave water-filling problem: its Lagrangian dual
//!
//! ```text
//! g(t, lambda) = sum_i log(1 + xi_i tau_i*) + lambda (mu - sum_i tau_i*) - t s,
//! tau_i* = clamp((xi_i - lambda) / (xi_i lambda), 0, a_i)
//! ```
//!
//! is jointly convex, and `t -> min_lambda g(t, lambda)` is convex as well.
//! [`WidthProfile::exponent`] minimizes over `t` by golden-section search and
//! solves the `lambda` problem exactly at each `t`: the derivative of `g` in
//! `lambda` is `mu - sum tau*`, which is piecewise linear in `1/lambda`.
//!
//! Equal widths are pooled, so a profile of ten thousand unit-width modules
//! costs the same as a profile with one.

use serde::Serialize;

use crate::optimize::golden_min;
use crate::{Error, Result};

/// Relative width of the final golden-section bracket in `t`.
const T_REL_TOL: f64 = 1e-11;

/// `e^{-a t}` underflows to zero beyond this, so the objective is affine in `t`
/// past `T_CAP_SCALE / min(a)`.
const T_CAP_SCALE: f64 = 750.0;

/// `(e^{a t} - 1) / a`, evaluated through `expm1` so small `a t` keeps full
/// relative precision. Exactly zero at `t = 0`.
pub fn xi(a: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    (a * t).exp_m1() / a
}

/// Inputs to the worst-case exponent: module widths, the hypothesized upper
/// bound on `E[S]`, and the observed threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundProblem {
    widths: Vec<f64>,
    mu: f64,
    s: f64,
}

impl BoundProblem {
    pub fn new(widths: Vec<f64>, mu: f64, s: f64) -> Result<Self> {
        let total = checked_total(&widths)?;
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidProblem(format!("mu must be finite and >= 0, got {mu}")));
        }
        if mu > total * (1.0 + 1e-12) {
            return Err(Error::InvalidProblem(format!(
                "mu = {mu} exceeds the sum of widths {total}"
            )));
        }
        if !s.is_finite() || s < 0.0 {
            return Err(Error::InvalidProblem(format!("s must be finite and >= 0, got {s}")));
        }
        Ok(Self {
            widths,
            mu: mu.min(total),
            s,
        })
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn total_width(&self) -> f64 {
        self.widths.iter().sum()
    }
}

fn checked_total(widths: &[f64]) -> Result<f64> {
    if widths.is_empty() {
        return Err(Error::InvalidProblem("at least one width is required".into()));
    }
    if let Some(bad) = widths.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::InvalidProblem(format!("widths must be finite and > 0, got {bad}")));
    }
    Ok(widths.iter().sum())
}

/// The exponent together with its saddle point.
///
/// `t_star` is `+inf` when the optimum is the `t -> infinity` limit (threshold
/// equal to the total width, or an impossible threshold). `log_bound` is
/// `-inf` when the event `S >= s` has probability zero under every admissible
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub log_bound: f64,
    pub t_star: f64,
    pub lambda_star: f64,
    /// Maximizing means, aligned with the problem's widths.
    pub tau_star: Vec<f64>,
}

/// Exact value of `g(t, lambda)` from its closed form.
///
/// At `t = 0` every `xi` vanishes and the primal value is `0`, which is
/// returned for any `lambda`. At `lambda = 0` each `tau*` saturates at `a_i`.
pub fn dual_objective(problem: &BoundProblem, t: f64, lambda: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let mut logs = 0.0;
    let mut linear = 0.0;
    let mut tau_sum = 0.0;
    for &a in &problem.widths {
        let tau = if lambda == 0.0 {
            a
        } else {
            (1.0 / lambda - inv_xi(a, t)).clamp(0.0, a)
        };
        let (l, lin) = log_mgf_parts(a, t, tau);
        logs += l;
        if lin {
            linear += a;
        }
        tau_sum += tau;
    }
    let dual = if lambda == 0.0 {
        0.0
    } else {
        lambda * (problem.mu - tau_sum)
    };
    logs + dual + t * (linear - problem.s)
}

/// Worst-case exponent `phi*` for `problem`, with witnesses.
pub fn tight_exponent(problem: &BoundProblem) -> Result<BoundResult> {
    let profile = WidthProfile::new(&problem.widths)?;
    let ex = profile.exponent(problem.mu, problem.s)?;
    let tau_star = problem
        .widths
        .iter()
        .map(|&a| ex.tau_for_width(&profile, a, problem.mu))
        .collect();
    Ok(BoundResult {
        log_bound: ex.log_bound,
        t_star: ex.t_star,
        lambda_star: ex.lambda_star,
        tau_star,
    })
}

/// Hoeffding's exponent `-2 (s - mu)^2 / sum a_i^2`; zero when `s <= mu`.
pub fn hoeffding_exponent(problem: &BoundProblem) -> f64 {
    let gap = problem.s - problem.mu;
    if gap <= 0.0 {
        return 0.0;
    }
    let sum_sq: f64 = problem.widths.iter().map(|a| a * a).sum();
    -2.0 * gap * gap / sum_sq
}

/// `hoeffding_exponent - tight_exponent` in log units; nonnegative up to
/// solver tolerance.
pub fn improvement_ratio(problem: &BoundProblem) -> Result<f64> {
    let tight = tight_exponent(problem)?.log_bound;
    Ok(hoeffding_exponent(problem) - tight)
}

/// Multiset of module widths, pooled by value and sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthProfile {
    widths: Vec<f64>,
    counts: Vec<f64>,
    total: f64,
    sum_sq: f64,
}

/// Result of [`WidthProfile::exponent`]. `tau` is per pooled width.
#[derive(Debug, Clone, PartialEq)]
pub struct Exponent {
    pub log_bound: f64,
    pub t_star: f64,
    pub lambda_star: f64,
    pub tau: Vec<f64>,
}

impl Exponent {
    fn tau_for_width(&self, profile: &WidthProfile, a: f64, mu: f64) -> f64 {
        match profile.widths.binary_search_by(|w| w.total_cmp(&a)) {
            Ok(g) if !self.tau.is_empty() => self.tau[g],
            _ => a * mu / profile.total,
        }
    }
}

impl WidthProfile {
    pub fn new(widths: &[f64]) -> Result<Self> {
        checked_total(widths)?;
        let mut sorted = widths.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for a in sorted {
            match pairs.last_mut() {
                Some((w, c)) if *w == a => *c += 1.0,
                _ => pairs.push((a, 1.0)),
            }
        }
        Ok(Self::from_sorted_pairs(pairs))
    }

    /// Builds a profile from `(width, multiplicity)` pairs; zero
    /// multiplicities are skipped.
    pub fn from_counts<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, u64)>,
    {
        let mut v: Vec<(f64, f64)> = pairs
            .into_iter()
            .filter(|&(_, c)| c > 0)
            .map(|(w, c)| (w, c as f64))
            .collect();
        if v.is_empty() {
            return Err(Error::InvalidProblem("at least one width is required".into()));
        }
        if let Some((bad, _)) = v.iter().find(|(a, _)| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidProblem(format!("widths must be finite and > 0, got {bad}")));
        }
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, c) in v {
            match pairs.last_mut() {
                Some((w, n)) if *w == a => *n += c,
                _ => pairs.push((a, c)),
            }
        }
        Ok(Self::from_sorted_pairs(pairs))
    }

    fn from_sorted_pairs(pairs: Vec<(f64, f64)>) -> Self {
        let total = pairs.iter().map(|(a, c)| a * c).sum();
        let sum_sq = pairs.iter().map(|(a, c)| a * a * c).sum();
        let (widths, counts) = pairs.into_iter().unzip();
        Self {
            widths,
            counts,
            total,
            sum_sq,
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn sum_squares(&self) -> f64 {
        self.sum_sq
    }

    pub fn groups(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.widths.iter().copied().zip(self.counts.iter().copied())
    }

    fn min_width(&self) -> f64 {
        self.widths[0]
    }

    /// `phi*_{a,mu}(s)` with its saddle point.
    ///
    /// The derivative of the exponent is `-t_star` in `s` and `lambda_star`
    /// in `mu`; the inversion routines rely on both.
    pub fn exponent(&self, mu: f64, s: f64) -> Result<Exponent> {
        let total = self.total;
        let mu = mu.clamp(0.0, total);
        if s <= mu {
            return Ok(Exponent {
                log_bound: 0.0,
                t_star: 0.0,
                lambda_star: 0.0,
                tau: self.proportional(mu),
            });
        }
        if s > total || mu == 0.0 {
            return Ok(Exponent {
                log_bound: f64::NEG_INFINITY,
                t_star: f64::INFINITY,
                lambda_star: f64::INFINITY,
                tau: self.proportional(mu),
            });
        }
        if s == total {
            return Ok(self.saturated_limit(mu));
        }

        let cap = T_CAP_SCALE / self.min_width();
        let mut evals = Scratch::default();
        let mut value = |t: f64| -> Result<f64> { Ok(self.primal_value(t, mu, s, &mut evals).0) };

        // h(0) = 0 and h'(0) = mu - s < 0; double until h turns upward.
        let (mut before, mut last, mut f_last) = (0.0, 0.0, 0.0);
        let mut hi = 1.0f64.min(cap);
        loop {
            let f_hi = value(hi)?;
            if f_hi.is_nan() {
                return Err(Error::OptimizerDidNotConverge {
                    stage: "t bracketing",
                    iterations: 0,
                });
            }
            if f_hi >= f_last || hi >= cap {
                break;
            }
            before = last;
            last = hi;
            f_last = f_hi;
            hi = (2.0 * hi).min(cap);
        }
        let (t_star, _) = golden_min(value, before, hi, T_REL_TOL, 0.0, "t line search")?;

        let (log_bound, level) = self.primal_value(t_star, mu, s, &mut Scratch::default());
        let log_bound = log_bound.min(0.0);
        let tau = self.allocation(t_star, level);
        Ok(Exponent {
            log_bound,
            t_star,
            lambda_star: 1.0 / level,
            tau,
        })
    }

    fn proportional(&self, mu: f64) -> Vec<f64> {
        self.widths.iter().map(|a| a * mu / self.total).collect()
    }

    /// `t -> infinity` limit at `s = total`: `max sum_i log(tau_i / a_i)`
    /// subject to `sum tau = mu`, solved by water-filling `tau_i = min(c, a_i)`.
    fn saturated_limit(&self, mu: f64) -> Exponent {
        let mut remaining = mu;
        let mut remaining_count: f64 = self.counts.iter().sum();
        let mut level = 0.0;
        // Widths are ascending: saturate the narrow modules first.
        for (&a, &c) in self.widths.iter().zip(&self.counts) {
            let share = remaining / remaining_count;
            if share >= a {
                remaining -= a * c;
                remaining_count -= c;
            } else {
                level = share;
                break;
            }
        }
        if remaining_count == 0.0 {
            level = self.widths[self.widths.len() - 1];
        }
        let tau: Vec<f64> = self.widths.iter().map(|&a| level.min(a)).collect();
        let log_bound = self
            .widths
            .iter()
            .zip(&self.counts)
            .zip(&tau)
            .map(|((&a, &c), &t)| c * (t / a).ln())
            .sum::<f64>()
            .min(0.0);
        Exponent {
            log_bound,
            t_star: f64::INFINITY,
            lambda_star: 1.0 / level,
            tau,
        }
    }

    /// Inner maximum over `tau` at a fixed `t > 0`, i.e. `min_lambda g(t, lambda)`.
    /// Also returns the water level `u = 1/lambda`.
    fn primal_value(&self, t: f64, mu: f64, s: f64, scratch: &mut Scratch) -> (f64, f64) {
        if t == 0.0 {
            return (0.0, f64::INFINITY);
        }
        let level = self.water_level(t, mu, scratch);
        let mut logs = 0.0;
        let mut linear = 0.0;
        for (&a, &c) in self.widths.iter().zip(&self.counts) {
            let tau = tau_at_level(a, t, level);
            let (l, lin) = log_mgf_parts(a, t, tau);
            logs += c * l;
            if lin {
                linear += c * a;
            }
        }
        (logs + t * (linear - s), level)
    }

    fn allocation(&self, t: f64, level: f64) -> Vec<f64> {
        self.widths.iter().map(|&a| tau_at_level(a, t, level)).collect()
    }

    /// Solves `sum_g c_g clamp(u - 1/xi_g, 0, a_g) = mu` for `u`.
    fn water_level(&self, t: f64, mu: f64, scratch: &mut Scratch) -> f64 {
        let events = &mut scratch.events;
        events.clear();
        for (&a, &c) in self.widths.iter().zip(&self.counts) {
            events.push((inv_xi(a, t), c));
            events.push((saturation_level(a, t), -c));
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut filled = 0.0;
        let mut slope = 0.0;
        let mut pos = events[0].0;
        if mu <= 0.0 {
            return pos;
        }
        for &(p, d) in events.iter() {
            if filled >= mu {
                return pos;
            }
            if p > pos {
                let next = filled + slope * (p - pos);
                if next >= mu {
                    return pos + (mu - filled) / slope;
                }
                filled = next;
                pos = p;
            }
            slope += d;
        }
        pos
    }
}

#[derive(Default)]
struct Scratch {
    events: Vec<(f64, f64)>,
}

/// `1 / xi(a, t)`; zero once `e^{a t}` overflows.
fn inv_xi(a: f64, t: f64) -> f64 {
    a / (a * t).exp_m1()
}

/// Level `u` at which `tau = u - 1/xi` reaches `a`: `a / (1 - e^{-a t})`.
fn saturation_level(a: f64, t: f64) -> f64 {
    -a / (-a * t).exp_m1()
}

fn tau_at_level(a: f64, t: f64, level: f64) -> f64 {
    if level >= saturation_level(a, t) {
        a
    } else {
        (level - inv_xi(a, t)).clamp(0.0, a)
    }
}

/// `log(1 + xi(a, t) tau)` split as `log_part + [linear] * a t` so that large
/// `a t` never forms `e^{a t}` and the `a t` terms can be combined with `-t s`
/// before multiplying by `t`.
fn log_mgf_parts(a: f64, t: f64, tau: f64) -> (f64, bool) {
    if tau <= 0.0 {
        return (0.0, false);
    }
    let at = a * t;
    if at <= 1.0 {
        ((xi(a, t) * tau).ln_1p(), false)
    } else {
        let decay = (-at).exp();
        let frac = tau / a;
        ((decay + frac * (-(-at).exp_m1())).ln(), true)
    }
}
