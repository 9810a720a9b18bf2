//! Replicate simulation comparing disagreement-based selection with the
//! Benjamini-Hochberg directional baseline.
//!
//! True effects are standard normal. Every replicate estimate of parameter
//! `i` is normal around `theta_i` with variance `sigma^2`, except for a
//! fraction of parameters whose variance is inflated to `k * sigma^2`. The
//! baseline assumes a common variance, so it is miscalibrated whenever
//! `k > 1`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bh::bh_directional;
use crate::control::{select, type_s_proportion, ControlConfig, Method};
use crate::study::{demote_ties, split_replicates, Sign, SignStudy, TieBreak};
use crate::{Error, Result};

/// Smallest pooled standard deviation reported.
pub const MIN_POOLED_SD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub sigma: f64,
    /// Variance inflation factor of the noisy subset.
    pub k: f64,
    pub inflated_fraction: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n: usize, sigma: f64, k: f64, seed: u64) -> Self {
        Self {
            n,
            sigma,
            k,
            inflated_fraction: 0.10,
            replicates: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return Err(Error::InvalidConfig(format!("k must be at least 1, got {}", self.k)));
        }
        if !(0.0..=1.0).contains(&self.inflated_fraction) {
            return Err(Error::InvalidConfig(format!(
                "inflated fraction must lie in [0, 1], got {}",
                self.inflated_fraction
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("at least one replicate is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub theta: Vec<f64>,
    /// Per-parameter noise standard deviation.
    pub tau: Vec<f64>,
    /// `replicates` rows of `n` estimates.
    pub estimates: Vec<Vec<f64>>,
}

/// Draws one data set from stream 0 of `config.seed`.
pub fn generate(config: &SimConfig) -> Result<SimData> {
    generate_stream(config, 0)
}

/// Draws one data set from the given substream of `config.seed`.
pub fn generate_stream(config: &SimConfig, stream: u64) -> Result<SimData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let n = config.n;
    let theta: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let inflated = (config.inflated_fraction * n as f64).ceil() as usize;
    let mut tau = vec![config.sigma; n];
    for &i in &order[..inflated.min(n)] {
        tau[i] = config.sigma * config.k.sqrt();
    }
    let estimates = (0..config.replicates)
        .map(|_| {
            (0..n)
                .map(|i| theta[i] + tau[i] * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Ok(SimData {
        theta,
        tau,
        estimates,
    })
}

/// Pooled within-parameter standard deviation under a common variance:
/// the square root of the mean per-parameter sample variance.
pub fn variance_pool(estimates: &[Vec<f64>]) -> Result<f64> {
    let r = estimates.len();
    if r < 2 {
        return Err(Error::InsufficientReplicates(r));
    }
    let n = estimates[0].len();
    if n == 0 || estimates.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidStudy("replicates must be nonempty and of equal length".into()));
    }
    let total: f64 = (0..n)
        .map(|i| {
            let mean = estimates.iter().map(|row| row[i]).sum::<f64>() / r as f64;
            estimates.iter().map(|row| (row[i] - mean).powi(2)).sum::<f64>() / (r - 1) as f64
        })
        .sum();
    Ok((total / n as f64).sqrt().max(MIN_POOLED_SD))
}

/// Signs drawn to agree with `sign(truth_i)` with probability `q`.
pub fn faithful_signs(truth: &[f64], q: f64, seed: u64) -> Vec<Sign> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    truth
        .iter()
        .map(|&t| {
            let right = Sign::of(t).unwrap_or(Sign::Plus);
            if rng.random::<f64>() < q {
                right
            } else {
                right.flipped()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SimMethod {
    #[serde(rename = "sdr-sdp")]
    SdrSdp,
    #[serde(rename = "sdr-ci")]
    SdrCi,
    #[serde(rename = "sdr-simultaneous")]
    SdrSimultaneous,
    #[serde(rename = "bh")]
    Bh,
}

impl SimMethod {
    pub const ALL: [SimMethod; 4] = [
        SimMethod::SdrSdp,
        SimMethod::SdrCi,
        SimMethod::SdrSimultaneous,
        SimMethod::Bh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimMethod::SdrSdp => "sdr-sdp",
            SimMethod::SdrCi => "sdr-ci",
            SimMethod::SdrSimultaneous => "sdr-simultaneous",
            SimMethod::Bh => "bh",
        }
    }
}

impl fmt::Display for SimMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Which estimates the baseline tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BhInput {
    /// The proposer replicate, with the pooled per-replicate deviation.
    #[default]
    Proposer,
    /// The replicate mean, with the pooled deviation over `sqrt(R)`.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSettings {
    pub n: usize,
    pub sigma_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<SimMethod>,
    pub inflated_fraction: f64,
    pub replicates: usize,
    /// Target type S error proportion for every method.
    pub target: f64,
    /// Assumed faithfulness of the validation signs.
    pub q: f64,
    pub alpha: f64,
    pub bh_input: BhInput,
}

impl SimSettings {
    /// A 10% target with `q = 1/2` and `alpha = 0.05`.
    pub fn new(n: usize, sigma_grid: Vec<f64>, k_grid: Vec<f64>, seeds: Vec<u64>) -> Self {
        Self {
            n,
            sigma_grid,
            k_grid,
            seeds,
            methods: SimMethod::ALL.to_vec(),
            inflated_fraction: 0.10,
            replicates: 2,
            target: 0.10,
            q: 0.5,
            alpha: 0.05,
            bh_input: BhInput::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub method: SimMethod,
    pub sigma: f64,
    pub k: f64,
    pub seed: u64,
    pub discoveries: usize,
    pub type_s_proportion: f64,
    pub target: f64,
}

/// Runs every method on every `(sigma, k, seed)` cell. Rows are ordered by
/// method, then sigma, k and seed in grid order, and do not depend on how
/// cells are scheduled.
pub fn run_comparison(settings: &SimSettings) -> Result<Vec<SimOutcome>> {
    if settings.sigma_grid.is_empty() || settings.k_grid.is_empty() || settings.seeds.is_empty() {
        return Err(Error::InvalidConfig("sigma grid, k grid and seeds must be nonempty".into()));
    }
    let mut cells = Vec::new();
    for (si, &sigma) in settings.sigma_grid.iter().enumerate() {
        for (ki, &k) in settings.k_grid.iter().enumerate() {
            for &seed in &settings.seeds {
                let stream = (si * settings.k_grid.len() + ki) as u64;
                cells.push((sigma, k, seed, stream));
            }
        }
    }
    let run = |&(sigma, k, seed, stream): &(f64, f64, u64, u64)| -> Result<Vec<SimOutcome>> {
        let mut config = SimConfig::new(settings.n, sigma, k, seed);
        config.inflated_fraction = settings.inflated_fraction;
        config.replicates = settings.replicates;
        let data = generate_stream(&config, stream)?;
        run_cell(settings, &data, sigma, k, seed)
    };
    #[cfg(feature = "parallel")]
    let per_cell: Vec<Vec<SimOutcome>> = {
        use rayon::prelude::*;
        cells.par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_cell: Vec<Vec<SimOutcome>> = cells.iter().map(run).collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(per_cell.len() * settings.methods.len());
    for method in &settings.methods {
        for cell in &per_cell {
            rows.extend(cell.iter().filter(|o| o.method == *method).cloned());
        }
    }
    Ok(rows)
}

/// Applies every requested method to one simulated data set.
pub fn run_cell(
    settings: &SimSettings,
    data: &SimData,
    sigma: f64,
    k: f64,
    seed: u64,
) -> Result<Vec<SimOutcome>> {
    let mut out = Vec::new();
    let outcome = |method, selected: &[usize], signs: &[Sign]| SimOutcome {
        method,
        sigma,
        k,
        seed,
        discoveries: selected.len(),
        type_s_proportion: type_s_proportion(selected, signs, &data.theta),
        target: settings.target,
    };

    let needs_study = settings.methods.iter().any(|&m| m != SimMethod::Bh);
    if needs_study {
        let study = proposer_study(data, seed)?;
        for &method in &settings.methods {
            let control = match method {
                SimMethod::SdrSdp => Method::SdpPoint,
                SimMethod::SdrCi => Method::CiPerSubset,
                SimMethod::SdrSimultaneous => Method::Simultaneous,
                SimMethod::Bh => continue,
            };
            let config = ControlConfig::new(settings.target, settings.q, settings.alpha, control);
            let result = select(&study, &config)?;
            out.push(outcome(method, &result.selected, study.proposed()));
        }
    }
    if settings.methods.contains(&SimMethod::Bh) {
        let sd = variance_pool(&data.estimates)?;
        let (estimates, sd) = match settings.bh_input {
            BhInput::Proposer => (data.estimates[0].clone(), sd),
            BhInput::Mean => {
                let r = data.estimates.len() as f64;
                let mean = (0..data.theta.len())
                    .map(|i| data.estimates.iter().map(|row| row[i]).sum::<f64>() / r)
                    .collect();
                (mean, sd / r.sqrt())
            }
        };
        let found = bh_directional(&estimates, sd, settings.target);
        let mut signs = vec![Sign::Plus; data.theta.len()];
        for (&i, &s) in found.indices.iter().zip(&found.signs) {
            signs[i] = s;
        }
        out.push(outcome(SimMethod::Bh, &found.indices, &signs));
    }
    Ok(out)
}

/// Replicate 0 proposes, the mean of the others validates, and the size of
/// the proposed estimate is the confidence score. Every parameter is its own
/// module.
pub fn proposer_study(data: &SimData, seed: u64) -> Result<SignStudy> {
    let signs = split_replicates(&data.estimates, &[0], TieBreak::RandomSign { seed })?;
    let mut scores: Vec<f64> = data.estimates[0].iter().map(|x| x.abs()).collect();
    demote_ties(&mut scores, &signs.proposed_ties);
    demote_ties(&mut scores, &signs.validation_ties);
    SignStudy::independent(signs.proposed, signs.validation, Some(scores))
}
