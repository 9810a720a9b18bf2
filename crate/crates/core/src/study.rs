//! Proposed and validation signs, their module partition, and agreement counts.

use std::fmt;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tail_bounds::WidthProfile;
use crate::{Error, Result};

/// A sign estimate. Zero is not a sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    /// Sign of a nonzero real; `None` for zero or NaN.
    pub fn of(x: f64) -> Option<Sign> {
        if x > 0.0 {
            Some(Sign::Plus)
        } else if x < 0.0 {
            Some(Sign::Minus)
        } else {
            None
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

impl TryFrom<i64> for Sign {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Sign::Minus),
            1 => Ok(Sign::Plus),
            other => Err(Error::InvalidStudy(format!("sign must be -1 or +1, got {other}"))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Minus => "-1",
            Sign::Plus => "1",
        })
    }
}

/// Proposed signs, validation signs, a partition into modules and optional
/// confidence scores, all indexed `0..n`.
///
/// Module ids are dense: every id in `0..module_count` owns at least one
/// parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SignStudy {
    proposed: Vec<Sign>,
    validation: Vec<Sign>,
    module_of: Vec<usize>,
    module_count: usize,
    scores: Option<Vec<f64>>,
}

impl SignStudy {
    pub fn new(
        proposed: Vec<Sign>,
        validation: Vec<Sign>,
        module_of: Vec<usize>,
        scores: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = proposed.len();
        if n == 0 {
            return Err(Error::InvalidStudy("a study needs at least one parameter".into()));
        }
        if validation.len() != n || module_of.len() != n {
            return Err(Error::InvalidStudy(format!(
                "length mismatch: {n} proposed, {} validation, {} module assignments",
                validation.len(),
                module_of.len()
            )));
        }
        if let Some(sc) = &scores {
            if sc.len() != n {
                return Err(Error::InvalidStudy(format!(
                    "length mismatch: {n} parameters but {} scores",
                    sc.len()
                )));
            }
            if sc.iter().any(|x| x.is_nan()) {
                return Err(Error::InvalidStudy("confidence scores must not be NaN".into()));
            }
        }
        let module_count = module_of.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; module_count];
        for &m in &module_of {
            seen[m] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidStudy(format!("module {empty} has no parameters")));
        }
        Ok(Self {
            proposed,
            validation,
            module_of,
            module_count,
            scores,
        })
    }

    /// Every parameter in its own module.
    pub fn independent(
        proposed: Vec<Sign>,
        validation: Vec<Sign>,
        scores: Option<Vec<f64>>,
    ) -> Result<Self> {
        let module_of = (0..proposed.len()).collect();
        Self::new(proposed, validation, module_of, scores)
    }

    pub fn len(&self) -> usize {
        self.proposed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposed.is_empty()
    }

    pub fn module_count(&self) -> usize {
        self.module_count
    }

    pub fn proposed(&self) -> &[Sign] {
        &self.proposed
    }

    pub fn validation(&self) -> &[Sign] {
        &self.validation
    }

    pub fn module_of(&self) -> &[usize] {
        &self.module_of
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn agrees(&self, i: usize) -> bool {
        self.proposed[i] == self.validation[i]
    }

    /// Members of each module, in index order.
    pub fn modules(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.module_count];
        for (i, &m) in self.module_of.iter().enumerate() {
            out[m].push(i);
        }
        out
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = subset.iter().find(|&&i| i >= self.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.len(),
            });
        }
        Ok(())
    }
}

/// Per-module agreement counts `X_i` and widths `a_i` over a subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgreementSummary {
    counts: Vec<u64>,
    widths: Vec<u64>,
}

impl AgreementSummary {
    pub fn new(counts: Vec<u64>, widths: Vec<u64>) -> Result<Self> {
        if counts.len() != widths.len() || widths.is_empty() {
            return Err(Error::InvalidStudy(
                "counts and widths must be nonempty and of equal length".into(),
            ));
        }
        if let Some((x, a)) = counts.iter().zip(&widths).find(|(x, a)| **a == 0 || x > a) {
            return Err(Error::InvalidStudy(format!(
                "agreement count {x} is not within a module of width {a}"
            )));
        }
        Ok(Self { counts, widths })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn widths(&self) -> &[u64] {
        &self.widths
    }

    /// `S`, the total number of agreements.
    pub fn total_agree(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `A`, the total number of parameters.
    pub fn total(&self) -> u64 {
        self.widths.iter().sum()
    }

    pub fn sdp(&self) -> f64 {
        let total = self.total();
        (total - self.total_agree()) as f64 / total as f64
    }

    pub fn width_profile(&self) -> WidthProfile {
        WidthProfile::from_counts(self.widths.iter().map(|&w| (w as f64, 1)))
            .expect("summary widths are positive")
    }
}

/// Fraction of `subset` on which proposed and validation signs differ.
pub fn sdp(study: &SignStudy, subset: &[usize]) -> Result<f64> {
    study.check_subset(subset)?;
    let disagree = subset.iter().filter(|&&i| !study.agrees(i)).count();
    Ok(disagree as f64 / subset.len() as f64)
}

/// Agreement counts per module over `subset`; modules the subset misses are
/// dropped. Modules appear in id order.
pub fn summarize(study: &SignStudy, subset: &[usize]) -> Result<AgreementSummary> {
    study.check_subset(subset)?;
    let mut counts = vec![0u64; study.module_count];
    let mut widths = vec![0u64; study.module_count];
    for &i in subset {
        let m = study.module_of[i];
        widths[m] += 1;
        if study.agrees(i) {
            counts[m] += 1;
        }
    }
    let (counts, widths) = counts
        .into_iter()
        .zip(widths)
        .filter(|&(_, w)| w > 0)
        .unzip();
    Ok(AgreementSummary { counts, widths })
}

/// Upper bound on the type S error proportion implied by an upper bound on
/// the disagreement rate when validation signs are `q`-faithful.
pub fn type_s_bound(sdr_upper: f64, q: f64) -> Result<f64> {
    check_faithfulness(q)?;
    Ok((sdr_upper / q).clamp(0.0, 1.0))
}

pub(crate) fn check_faithfulness(q: f64) -> Result<()> {
    if (0.5..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::InvalidFaithfulness(q))
    }
}

/// What to do when a replicate average is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    Error,
    /// Draw the sign from a seeded coin.
    RandomSign { seed: u64 },
}

/// Signs from a replicate split. The tie lists name the parameters whose
/// sign came from a coin flip; their confidence should be set to the minimum
/// score (see [`demote_ties`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSigns {
    pub proposed: Vec<Sign>,
    pub validation: Vec<Sign>,
    pub proposed_ties: Vec<usize>,
    pub validation_ties: Vec<usize>,
}

/// Averages the proposer replicates and the remaining replicates, and takes
/// signs of both averages. `estimates` is replicate-major (`R` rows of `n`).
pub fn split_replicates(
    estimates: &[Vec<f64>],
    proposer: &[usize],
    tie_break: TieBreak,
) -> Result<SplitSigns> {
    let r = estimates.len();
    let n = estimates.first().map_or(0, Vec::len);
    if estimates.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidStudy("replicates have different lengths".into()));
    }
    let proposer: Vec<usize> = proposer.iter().copied().sorted().dedup().collect();
    if proposer.is_empty() || proposer.len() >= r {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= proposer replicates < {r}, got {}",
            proposer.len()
        )));
    }
    if let Some(&bad) = proposer.iter().find(|&&p| p >= r) {
        return Err(Error::IndexOutOfRange { index: bad, len: r });
    }
    let validator: Vec<usize> = (0..r).filter(|i| !proposer.contains(i)).collect();

    let mut rng = match tie_break {
        TieBreak::RandomSign { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        TieBreak::Error => None,
    };
    let mut signs_of = |rows: &[usize], ties: &mut Vec<usize>| -> Result<Vec<Sign>> {
        (0..n)
            .map(|i| {
                let mean = rows.iter().map(|&k| estimates[k][i]).sum::<f64>() / rows.len() as f64;
                match (Sign::of(mean), rng.as_mut()) {
                    (Some(s), _) => Ok(s),
                    (None, Some(rng)) => {
                        ties.push(i);
                        Ok(if rng.random::<bool>() { Sign::Plus } else { Sign::Minus })
                    }
                    (None, None) => Err(Error::DegenerateAverage { index: i }),
                }
            })
            .collect()
    };
    let mut proposed_ties = Vec::new();
    let mut validation_ties = Vec::new();
    let proposed = signs_of(&proposer, &mut proposed_ties)?;
    let validation = signs_of(&validator, &mut validation_ties)?;
    Ok(SplitSigns {
        proposed,
        validation,
        proposed_ties,
        validation_ties,
    })
}

/// Sets the score of every tied parameter to the minimum score present.
pub fn demote_ties(scores: &mut [f64], ties: &[usize]) {
    let floor = scores.iter().copied().fold(f64::INFINITY, f64::min);
    for &i in ties {
        scores[i] = floor;
    }
}

/// SDPs for every way of choosing `proposer_count` of the replicates as
/// proposers, and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAverage {
    pub splits: Vec<(Vec<usize>, f64)>,
    pub mean_sdp: f64,
}

pub fn enumerate_splits(
    estimates: &[Vec<f64>],
    proposer_count: usize,
    module_of: &[usize],
    tie_break: TieBreak,
) -> Result<SplitAverage> {
    let r = estimates.len();
    if proposer_count == 0 || proposer_count >= r {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= proposer replicates < {r}, got {proposer_count}"
        )));
    }
    let mut splits = Vec::new();
    for proposer in (0..r).combinations(proposer_count) {
        let signs = split_replicates(estimates, &proposer, tie_break)?;
        let study = SignStudy::new(signs.proposed, signs.validation, module_of.to_vec(), None)?;
        let value = sdp(&study, &study.all_indices())?;
        splits.push((proposer, value));
    }
    let mean_sdp = splits.iter().map(|(_, v)| v).sum::<f64>() / splits.len() as f64;
    Ok(SplitAverage { splits, mean_sdp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sign::{Minus as M, Plus as P};

    fn study(proposed: Vec<Sign>, validation: Vec<Sign>, modules: Vec<usize>) -> SignStudy {
        SignStudy::new(proposed, validation, modules, None).unwrap()
    }

    #[test]
    fn sdp_examples() {
        let s = study(vec![P, P, M, P], vec![P, M, M, M], vec![0, 0, 0, 0]);
        assert_eq!(sdp(&s, &s.all_indices()).unwrap(), 0.5);

        let same = study(vec![P, M, P], vec![P, M, P], vec![0, 1, 2]);
        assert_eq!(sdp(&same, &[0, 1, 2]).unwrap(), 0.0);

        let opposite = study(vec![P, M, P], vec![M, P, M], vec![0, 1, 2]);
        assert_eq!(sdp(&opposite, &[0, 2]).unwrap(), 1.0);

        assert_eq!(sdp(&s, &[]), Err(Error::EmptySubset));
        assert!(matches!(sdp(&s, &[4]), Err(Error::IndexOutOfRange { index: 4, len: 4 })));
    }

    #[test]
    fn summarize_examples() {
        let one = study(vec![P; 5], vec![P; 5], vec![0; 5]);
        let sum = summarize(&one, &one.all_indices()).unwrap();
        assert_eq!(sum.counts(), &[5]);
        assert_eq!(sum.widths(), &[5]);

        // Module 0 has 3 members with 2 agreements, module 1 has 2 with 1.
        let two = study(vec![P, P, P, M, M], vec![P, P, M, M, P], vec![0, 0, 0, 1, 1]);
        let sum = summarize(&two, &two.all_indices()).unwrap();
        assert_eq!(sum.counts(), &[2, 1]);
        assert_eq!(sum.widths(), &[3, 2]);
        assert_eq!(sum.total_agree(), 3);
        assert_eq!(sum.total(), 5);
        assert_eq!(sum.sdp(), sdp(&two, &two.all_indices()).unwrap());

        let only_second = summarize(&two, &[3, 4]).unwrap();
        assert_eq!(only_second.widths(), &[2]);
        assert_eq!(only_second.counts(), &[1]);
    }

    #[test]
    fn study_validation() {
        assert!(SignStudy::new(vec![P], vec![P, M], vec![0], None).is_err());
        assert!(SignStudy::new(vec![P, P], vec![P, M], vec![0, 2], None).is_err());
        assert!(SignStudy::new(vec![P], vec![P], vec![0], Some(vec![])).is_err());
        assert!(SignStudy::new(vec![], vec![], vec![], None).is_err());
        assert!(Sign::try_from(0).is_err());
        assert_eq!(Sign::try_from(-1).unwrap(), M);
    }

    #[test]
    fn type_s_bound_examples() {
        assert!((type_s_bound(0.05, 0.5).unwrap() - 0.10).abs() < 1e-15);
        assert_eq!(type_s_bound(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(type_s_bound(0.6, 0.5).unwrap(), 1.0);
        assert_eq!(type_s_bound(0.1, 0.4), Err(Error::InvalidFaithfulness(0.4)));
        assert!(type_s_bound(0.1, 1.1).is_err());
    }

    #[test]
    fn split_examples() {
        let est = vec![vec![1.2, -0.3], vec![0.8, -0.1]];
        let s = split_replicates(&est, &[0], TieBreak::Error).unwrap();
        assert_eq!(s.proposed, vec![P, M]);
        assert_eq!(s.validation, vec![P, M]);

        let est = vec![vec![1.0], vec![-3.0], vec![5.0]];
        let s = split_replicates(&est, &[0, 1], TieBreak::Error).unwrap();
        assert_eq!(s.proposed, vec![M]);
        assert_eq!(s.validation, vec![P]);

        let est = vec![vec![0.5, 2.0, 3.0], vec![0.1, 0.2, 9.0]];
        let s = split_replicates(&est, &[1], TieBreak::Error).unwrap();
        assert_eq!(s.proposed, vec![P; 3]);
        assert_eq!(s.validation, vec![P; 3]);
    }

    #[test]
    fn split_ties() {
        let est = vec![vec![1.0, 2.0], vec![-1.0, 3.0], vec![4.0, 1.0]];
        assert_eq!(
            split_replicates(&est, &[0, 1], TieBreak::Error),
            Err(Error::DegenerateAverage { index: 0 })
        );
        let a = split_replicates(&est, &[0, 1], TieBreak::RandomSign { seed: 9 }).unwrap();
        let b = split_replicates(&est, &[0, 1], TieBreak::RandomSign { seed: 9 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.proposed_ties, vec![0]);

        let mut scores = vec![0.7, 0.2, 0.9];
        demote_ties(&mut scores, &[2]);
        assert_eq!(scores, vec![0.7, 0.2, 0.2]);

        assert!(split_replicates(&est, &[], TieBreak::Error).is_err());
        assert!(split_replicates(&est, &[0, 1, 2], TieBreak::Error).is_err());
    }

    #[test]
    fn split_enumeration_averages() {
        // Replicate 2 disagrees with the others on parameter 0 only.
        let est = vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![-0.5, 1.0]];
        let one = enumerate_splits(&est, 1, &[0, 1], TieBreak::Error).unwrap();
        let sdps: Vec<f64> = one.splits.iter().map(|(_, v)| *v).collect();
        assert_eq!(sdps, vec![0.0, 0.0, 0.5]);
        let two = enumerate_splits(&est, 2, &[0, 1], TieBreak::Error).unwrap();
        let sdps: Vec<f64> = two.splits.iter().map(|(_, v)| *v).collect();
        assert_eq!(sdps, vec![0.5, 0.0, 0.0]);
        assert!((two.mean_sdp - 1.0 / 6.0).abs() < 1e-15);

        let tied = vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![-1.0, 1.0]];
        assert_eq!(
            enumerate_splits(&tied, 1, &[0, 1], TieBreak::Error),
            Err(Error::DegenerateAverage { index: 0 })
        );
    }

}
