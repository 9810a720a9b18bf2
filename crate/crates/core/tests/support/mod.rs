//! Independent reference computations used by the integration and
//! acceptance tests. None of these call into the library's optimizers.

#![allow(dead_code)]

/// `max_tau min_t [sum log(1 + xi(a_i, t) tau_i) - t s]` with `tau` on a
/// grid of `per_axis` points per free coordinate of the slice
/// `{tau in prod [0, a_i], sum tau = mu}` (at most three widths), and the
/// inner minimum over `t` solved by bisection on the derivative.
///
/// By the minimax theorem this equals the tight exponent up to the grid
/// resolution, and it is never above it.
pub fn primal_grid_oracle(widths: &[f64], mu: f64, s: f64, per_axis: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut visit = |tau: &[f64]| {
        let v = chernoff_for_means(widths, tau, s);
        if v > best {
            best = v;
        }
    };
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        if hi <= lo {
            return vec![lo];
        }
        (0..per_axis)
            .map(|j| lo + (hi - lo) * j as f64 / (per_axis - 1) as f64)
            .collect()
    };
    match widths {
        [a] => {
            assert!(mu <= *a + 1e-12);
            visit(&[mu.min(*a)]);
        }
        [a1, a2] => {
            for t1 in axis((mu - a2).max(0.0), mu.min(*a1)) {
                visit(&[t1, (mu - t1).clamp(0.0, *a2)]);
            }
        }
        [a1, a2, a3] => {
            for t1 in axis((mu - a2 - a3).max(0.0), mu.min(*a1)) {
                let rest = mu - t1;
                for t2 in axis((rest - a3).max(0.0), rest.min(*a2)) {
                    visit(&[t1, t2, (rest - t2).clamp(0.0, *a3)]);
                }
            }
        }
        _ => panic!("the grid oracle handles at most three widths"),
    }
    best
}

/// `min_{t >= 0} sum log E exp(t X_i) - t s` for independent `X_i` taking
/// values `{0, a_i}` with means `tau_i`.
pub fn chernoff_for_means(widths: &[f64], tau: &[f64], s: f64) -> f64 {
    let mean: f64 = tau.iter().sum();
    if s <= mean {
        return 0.0;
    }
    // Support reachable with positive probability.
    let reach: f64 = widths
        .iter()
        .zip(tau)
        .filter(|(_, &t)| t > 0.0)
        .map(|(a, _)| a)
        .sum();
    let f = |t: f64| -> f64 {
        widths
            .iter()
            .zip(tau)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&a, &p)| {
                let r = p / a;
                a * t + (r + (1.0 - r) * (-a * t).exp()).ln()
            })
            .sum::<f64>()
            - t * s
    };
    if reach < s - 1e-12 {
        return f64::NEG_INFINITY;
    }
    if (reach - s).abs() <= 1e-12 {
        return widths
            .iter()
            .zip(tau)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&a, &p)| (p / a).ln())
            .sum();
    }
    let df = |t: f64| -> f64 {
        widths
            .iter()
            .zip(tau)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&a, &p)| {
                let r = p / a;
                let e = (-a * t).exp();
                a * r / (r + (1.0 - r) * e)
            })
            .sum::<f64>()
            - s
    };
    let mut hi = 1.0;
    while df(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if df(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    f(0.5 * (lo + hi))
}

/// `KL(Bernoulli(p) || Bernoulli(q))` in nats.
pub fn binary_kl(p: f64, q: f64) -> f64 {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Closed-form tight exponent for `m` equal widths `a`.
pub fn equal_width_exponent(m: usize, a: f64, mu: f64, s: f64) -> f64 {
    let total = m as f64 * a;
    if s <= mu {
        0.0
    } else if s > total {
        f64::NEG_INFINITY
    } else {
        -(m as f64) * binary_kl(s / total, mu / total)
    }
}

/// Smallest `mu` with `equal_width_exponent(m, 1, mu, s) >= log(alpha)`.
pub fn kl_mean_lower(m: usize, s: f64, alpha: f64) -> f64 {
    let target = alpha.ln();
    let (mut lo, mut hi) = (0.0, s);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if equal_width_exponent(m, 1.0, mid, s) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest `s` with `equal_width_exponent(m, 1, mu, s) <= log(alpha)`,
/// or `m` when no such `s` exists.
pub fn kl_critical_s(m: usize, mu: f64, alpha: f64) -> f64 {
    let total = m as f64;
    let target = alpha.ln();
    if mu >= total {
        return total;
    }
    if equal_width_exponent(m, 1.0, mu, total) > target {
        return total;
    }
    let (mut lo, mut hi) = (mu, total);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if equal_width_exponent(m, 1.0, mu, mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `log P(Binomial(n, p) >= x)` by direct summation.
pub fn log_binomial_upper_tail(n: u64, p: f64, x: u64) -> f64 {
    let log_pmf = |k: u64| -> f64 {
        let (n_f, k_f) = (n as f64, k as f64);
        libm::lgamma(n_f + 1.0) - libm::lgamma(k_f + 1.0) - libm::lgamma(n_f - k_f + 1.0)
            + k_f * p.ln()
            + (n_f - k_f) * (-p).ln_1p()
    };
    let terms: Vec<f64> = (x..=n).map(log_pmf).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Exact one-sided lower confidence bound for a binomial proportion:
/// the `p` with `P(Binomial(n, p) >= x) = alpha`.
pub fn clopper_pearson_lower(n: u64, x: u64, alpha: f64) -> f64 {
    if x == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_binomial_upper_tail(n, mid, x) < alpha.ln() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
