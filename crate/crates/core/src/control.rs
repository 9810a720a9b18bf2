//! Choosing a discovery set whose type S error is controlled.
//!
//! Parameters are nested by confidence score, an upper estimate `U_k` of the
//! disagreement rate is computed for every prefix, and the largest prefix
//! with `U_k <= q * V*` is selected. With `q`-faithful validation signs this
//! keeps the type S error proportion below `V*`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::confidence::{check_alpha, mean_lower_bound};
use crate::simultaneous::{merged_region, simultaneous_region, Member, NestedSummaries};
use crate::study::{check_faithfulness, summarize, Sign, SignStudy};
use crate::tail_bounds::WidthProfile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// The observed disagreement proportion itself.
    SdpPoint,
    /// A separate one-sided interval for every prefix.
    CiPerSubset,
    /// One region valid for all prefixes jointly.
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    ByParameterScore,
    ByModuleMeanScore,
}

/// Score-based filters applied before nesting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preprocess {
    /// Keep the `k` highest-scoring parameters of each module.
    TopKPerModule(usize),
    /// Keep the modules whose mean score ranks in the top `ceil(f * m)`.
    TopFractionOfModules(f64),
    /// Keep parameters scoring at least `t`.
    ScoreThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlConfig {
    /// Target type S error proportion `V*`.
    pub target_v: f64,
    /// Faithfulness of the validation signs.
    pub q: f64,
    pub alpha: f64,
    pub method: Method,
    pub ordering: Ordering,
    pub preprocess: Option<Preprocess>,
    /// Number of score thresholds merged into the simultaneous region.
    pub cuts: usize,
}

impl ControlConfig {
    /// A configuration with the natural ordering for `method` and no
    /// preprocessing.
    pub fn new(target_v: f64, q: f64, alpha: f64, method: Method) -> Self {
        let ordering = match method {
            Method::Simultaneous => Ordering::ByModuleMeanScore,
            _ => Ordering::ByParameterScore,
        };
        Self {
            target_v,
            q,
            alpha,
            method,
            ordering,
            preprocess: None,
            cuts: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_v > 0.0 && self.target_v < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target_v must lie in (0, 1), got {}",
                self.target_v
            )));
        }
        check_faithfulness(self.q)?;
        check_alpha(self.alpha)?;
        if self.method == Method::Simultaneous && self.ordering != Ordering::ByModuleMeanScore {
            return Err(Error::InvalidConfig(
                "the simultaneous method nests whole modules; use by-module-mean-score ordering"
                    .into(),
            ));
        }
        if self.cuts == 0 {
            return Err(Error::InvalidConfig("cuts must be at least 1".into()));
        }
        if self.cuts > 1 && self.method != Method::Simultaneous {
            return Err(Error::InvalidConfig("cuts only apply to the simultaneous method".into()));
        }
        match self.preprocess {
            Some(Preprocess::TopKPerModule(0)) => {
                Err(Error::InvalidConfig("top-k per module needs k >= 1".into()))
            }
            Some(Preprocess::TopFractionOfModules(f)) if !(f > 0.0 && f <= 1.0) => Err(
                Error::InvalidConfig(format!("module fraction must lie in (0, 1], got {f}")),
            ),
            Some(Preprocess::ScoreThreshold(t)) if t.is_nan() => {
                Err(Error::InvalidConfig("score threshold is NaN".into()))
            }
            _ => Ok(()),
        }
    }

    /// The selection threshold `q * V*` applied to the estimates.
    pub fn threshold(&self) -> f64 {
        self.q * self.target_v
    }
}

/// What the selected set is known to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "String")]
pub enum Guarantee {
    None,
    Heuristic,
    /// The false sign discovery exceedance is at most `alpha`.
    Exceedance(f64),
}

impl fmt::Display for Guarantee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guarantee::None => f.write_str("none"),
            Guarantee::Heuristic => f.write_str("heuristic"),
            Guarantee::Exceedance(a) => write!(f, "exceedance({a})"),
        }
    }
}

impl From<Guarantee> for String {
    fn from(g: Guarantee) -> String {
        g.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub size: usize,
    pub sdp: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlResult {
    /// Selected parameter indices in nesting order.
    pub selected: Vec<usize>,
    /// Number of nesting blocks selected; 0 when nothing qualifies.
    pub k_star: usize,
    pub trace: Vec<TraceEntry>,
    pub guarantee: Guarantee,
}

/// Indices surviving the preprocessing filter, in index order.
pub fn preprocess(study: &SignStudy, filter: Option<Preprocess>) -> Result<Vec<usize>> {
    let Some(filter) = filter else {
        return Ok(study.all_indices());
    };
    let scores = study.scores().ok_or(Error::MissingScores)?;
    let mut keep = vec![false; study.len()];
    match filter {
        Preprocess::ScoreThreshold(t) => {
            for (k, &s) in keep.iter_mut().zip(scores) {
                *k = s >= t;
            }
        }
        Preprocess::TopKPerModule(top) => {
            for mut members in study.modules() {
                members.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
                for &i in members.iter().take(top) {
                    keep[i] = true;
                }
            }
        }
        Preprocess::TopFractionOfModules(f) => {
            let modules = study.modules();
            let take = (f * modules.len() as f64).ceil() as usize;
            for m in ranked_modules(&modules, scores).into_iter().take(take) {
                for &i in &modules[m] {
                    keep[i] = true;
                }
            }
        }
    }
    Ok((0..study.len()).filter(|&i| keep[i]).collect())
}

/// Module ids by descending mean score; ties keep id order.
fn ranked_modules(modules: &[Vec<usize>], scores: &[f64]) -> Vec<usize> {
    let means: Vec<f64> = modules
        .iter()
        .map(|ms| ms.iter().map(|&i| scores[i]).sum::<f64>() / ms.len() as f64)
        .collect();
    let mut order: Vec<usize> = (0..modules.len()).filter(|&m| !modules[m].is_empty()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
    order
}

/// The nesting blocks: single parameters or whole (retained) modules, in
/// order of decreasing confidence.
pub fn nested_blocks(study: &SignStudy, config: &ControlConfig) -> Result<Vec<Vec<usize>>> {
    let scores = study.scores().ok_or(Error::MissingScores)?;
    let retained = preprocess(study, config.preprocess)?;
    if retained.is_empty() {
        return Ok(Vec::new());
    }
    Ok(match config.ordering {
        Ordering::ByParameterScore => {
            let mut order = retained;
            order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
            order.into_iter().map(|i| vec![i]).collect()
        }
        Ordering::ByModuleMeanScore => {
            let mut modules = vec![Vec::new(); study.module_count()];
            for i in retained {
                modules[study.module_of()[i]].push(i);
            }
            ranked_modules(&modules, scores)
                .into_iter()
                .map(|m| std::mem::take(&mut modules[m]))
                .collect()
        }
    })
}

/// Per-block agreement summaries for the nesting chosen by `config`.
pub fn nested_subsets(study: &SignStudy, config: &ControlConfig) -> Result<NestedSummaries> {
    let blocks = nested_blocks(study, config)?;
    if blocks.is_empty() {
        return Err(Error::EmptySubset);
    }
    let summaries = blocks
        .iter()
        .map(|b| summarize(study, b))
        .collect::<Result<Vec<_>>>()?;
    NestedSummaries::new(summaries)
}

/// Builds the trace of estimates and selects the largest qualifying prefix.
pub fn select(study: &SignStudy, config: &ControlConfig) -> Result<ControlResult> {
    config.validate()?;
    let blocks = nested_blocks(study, config)?;
    let guarantee = match config.method {
        Method::SdpPoint => Guarantee::None,
        Method::CiPerSubset => Guarantee::Heuristic,
        Method::Simultaneous => Guarantee::Exceedance(config.alpha),
    };
    if blocks.is_empty() {
        return Ok(ControlResult {
            selected: Vec::new(),
            k_star: 0,
            trace: Vec::new(),
            guarantee,
        });
    }
    let trace = match config.method {
        Method::SdpPoint => sdp_trace(study, &blocks),
        Method::CiPerSubset => ci_trace(study, &blocks, config.alpha)?,
        Method::Simultaneous => simultaneous_trace(study, &blocks, config)?,
    };
    let threshold = config.threshold();
    let k_star = trace
        .iter()
        .rposition(|e| e.estimate <= threshold)
        .map_or(0, |k| k + 1);
    let selected = blocks[..k_star].iter().flatten().copied().collect();
    Ok(ControlResult {
        selected,
        k_star,
        trace,
        guarantee,
    })
}

fn prefix_counts<'a>(
    study: &'a SignStudy,
    blocks: &'a [Vec<usize>],
) -> impl Iterator<Item = (usize, u64)> + 'a {
    let (mut size, mut agree) = (0usize, 0u64);
    blocks.iter().map(move |b| {
        size += b.len();
        agree += b.iter().filter(|&&i| study.agrees(i)).count() as u64;
        (size, agree)
    })
}

fn sdp_of(size: usize, agree: u64) -> f64 {
    (size as u64 - agree) as f64 / size as f64
}

fn sdp_trace(study: &SignStudy, blocks: &[Vec<usize>]) -> Vec<TraceEntry> {
    prefix_counts(study, blocks)
        .map(|(size, agree)| {
            let sdp = sdp_of(size, agree);
            TraceEntry {
                size,
                sdp,
                estimate: sdp,
            }
        })
        .collect()
}

fn ci_trace(study: &SignStudy, blocks: &[Vec<usize>], alpha: f64) -> Result<Vec<TraceEntry>> {
    // Module widths within the current prefix, and how many modules have
    // each width, both updated as blocks are added.
    let mut module_width: BTreeMap<usize, u64> = BTreeMap::new();
    let mut width_count: BTreeMap<u64, u64> = BTreeMap::new();
    let mut out = Vec::with_capacity(blocks.len());
    for (b, (size, agree)) in blocks.iter().zip(prefix_counts(study, blocks)) {
        for &i in b {
            let w = module_width.entry(study.module_of()[i]).or_default();
            if *w > 0 {
                let c = width_count.get_mut(w).expect("tracked width");
                *c -= 1;
                if *c == 0 {
                    width_count.remove(w);
                }
            }
            *w += 1;
            *width_count.entry(*w).or_default() += 1;
        }
        let profile =
            WidthProfile::from_counts(width_count.iter().map(|(&w, &c)| (w as f64, c)))?;
        let mu_low = mean_lower_bound(&profile, agree as f64, alpha)?;
        let sdp = sdp_of(size, agree);
        out.push(TraceEntry {
            size,
            sdp,
            estimate: (1.0 - mu_low / size as f64).clamp(sdp, 1.0),
        });
    }
    Ok(out)
}

fn simultaneous_trace(
    study: &SignStudy,
    blocks: &[Vec<usize>],
    config: &ControlConfig,
) -> Result<Vec<TraceEntry>> {
    let region = if config.cuts == 1 {
        let summaries = blocks
            .iter()
            .map(|b| summarize(study, b))
            .collect::<Result<Vec<_>>>()?;
        simultaneous_region(&NestedSummaries::new(summaries)?, config.alpha)?
    } else {
        let scores = study.scores().ok_or(Error::MissingScores)?;
        let members: Vec<Vec<Member>> = blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|&i| Member {
                        module: study.module_of()[i],
                        agrees: study.agrees(i),
                        score: scores[i],
                    })
                    .collect()
            })
            .collect();
        merged_region(&members, config.alpha, config.cuts)?
    };
    Ok(region
        .sizes
        .iter()
        .zip(&region.sdps)
        .zip(&region.uppers)
        .map(|((&size, &sdp), &estimate)| TraceEntry {
            size: size as usize,
            sdp,
            estimate,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExceedanceScale {
    #[default]
    Proportion,
    Count,
}

/// Number of selected indices whose sign differs from the sign of the true
/// parameter. A true value of exactly zero counts as an error.
pub fn false_sign_count(selected: &[usize], signs: &[Sign], truth: &[f64]) -> usize {
    selected
        .iter()
        .filter(|&&i| Sign::of(truth[i]) != Some(signs[i]))
        .count()
}

/// Type S error proportion among the selected indices; 0 when none are.
pub fn type_s_proportion(selected: &[usize], signs: &[Sign], truth: &[f64]) -> f64 {
    if selected.is_empty() {
        0.0
    } else {
        false_sign_count(selected, signs, truth) as f64 / selected.len() as f64
    }
}

/// Whether the sign errors among `selected` exceed `target_v`.
pub fn false_sign_exceedance(
    selected: &[usize],
    signs: &[Sign],
    truth: &[f64],
    target_v: f64,
    scale: ExceedanceScale,
) -> bool {
    match scale {
        ExceedanceScale::Proportion => type_s_proportion(selected, signs, truth) > target_v,
        ExceedanceScale::Count => false_sign_count(selected, signs, truth) as f64 > target_v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sign::{Minus as M, Plus as P};

    fn scored(
        proposed: Vec<Sign>,
        validation: Vec<Sign>,
        modules: Vec<usize>,
        scores: Vec<f64>,
    ) -> SignStudy {
        SignStudy::new(proposed, validation, modules, Some(scores)).unwrap()
    }

    #[test]
    fn parameter_ordering_takes_top_scores() {
        let s = scored(vec![P; 4], vec![P; 4], vec![0, 1, 2, 3], vec![0.2, 0.9, 0.5, 0.9]);
        let cfg = ControlConfig::new(0.1, 0.5, 0.05, Method::SdpPoint);
        let blocks = nested_blocks(&s, &cfg).unwrap();
        assert_eq!(blocks, vec![vec![1], vec![3], vec![2], vec![0]]);
    }

    #[test]
    fn module_ordering_uses_means() {
        let s = scored(vec![P; 4], vec![P; 4], vec![0, 0, 1, 1], vec![0.1, 0.1, 0.9, 0.9]);
        let cfg = ControlConfig::new(0.1, 0.5, 0.05, Method::Simultaneous);
        assert_eq!(nested_blocks(&s, &cfg).unwrap(), vec![vec![2, 3], vec![0, 1]]);
        let nested = nested_subsets(&s, &cfg).unwrap();
        assert_eq!(nested.cum_sizes(), &[2, 4]);
    }

    #[test]
    fn preprocess_filters() {
        let s = scored(
            vec![P; 6],
            vec![P; 6],
            vec![0, 0, 0, 1, 1, 2],
            vec![0.3, 0.9, 0.5, 0.1, 0.2, 0.8],
        );
        let t = preprocess(&s, Some(Preprocess::ScoreThreshold(0.5))).unwrap();
        assert_eq!(t, vec![1, 2, 5]);
        let k = preprocess(&s, Some(Preprocess::TopKPerModule(1))).unwrap();
        assert_eq!(k, vec![1, 4, 5]);
        let f = preprocess(&s, Some(Preprocess::TopFractionOfModules(0.5))).unwrap();
        // Module means 0.567, 0.15, 0.8: top ceil(1.5) = 2 are modules 2 and 0.
        assert_eq!(f, vec![0, 1, 2, 5]);
        let none = SignStudy::new(vec![P], vec![P], vec![0], None).unwrap();
        assert_eq!(
            preprocess(&none, Some(Preprocess::ScoreThreshold(0.0))),
            Err(Error::MissingScores)
        );
    }

    #[test]
    fn all_agreeing_selects_everything() {
        let s = scored(vec![P, M, P], vec![P, M, P], vec![0, 1, 2], vec![3.0, 2.0, 1.0]);
        let r = select(&s, &ControlConfig::new(0.1, 0.5, 0.05, Method::SdpPoint)).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2]);
        assert_eq!(r.k_star, 3);
        assert_eq!(r.guarantee, Guarantee::None);
    }

    #[test]
    fn nothing_qualifies_gives_empty_selection() {
        let s = scored(vec![P, M], vec![M, P], vec![0, 1], vec![2.0, 1.0]);
        for method in [Method::SdpPoint, Method::CiPerSubset, Method::Simultaneous] {
            let r = select(&s, &ControlConfig::new(0.1, 0.5, 0.05, method)).unwrap();
            assert!(r.selected.is_empty());
            assert_eq!(r.k_star, 0);
            assert_eq!(r.trace.len(), 2);
        }
    }

    #[test]
    fn selection_is_largest_qualifying_prefix() {
        // SDP trace: 0, 1/2, 1/3, 1/4, 2/5 -> largest k with SDP <= 0.25 is 4.
        let s = scored(
            vec![P; 5],
            vec![P, M, P, P, M],
            vec![0, 1, 2, 3, 4],
            vec![5.0, 4.0, 3.0, 2.0, 1.0],
        );
        let r = select(&s, &ControlConfig::new(0.5, 0.5, 0.05, Method::SdpPoint)).unwrap();
        assert_eq!(r.k_star, 4);
        assert_eq!(r.selected, vec![0, 1, 2, 3]);
        assert_eq!(r.guarantee.to_string(), "none");
    }

    #[test]
    fn config_conflicts() {
        let mut cfg = ControlConfig::new(0.1, 0.5, 0.05, Method::Simultaneous);
        cfg.ordering = Ordering::ByParameterScore;
        assert!(cfg.validate().is_err());
        assert!(ControlConfig::new(0.1, 0.4, 0.05, Method::SdpPoint).validate().is_err());
        assert!(ControlConfig::new(0.0, 0.5, 0.05, Method::SdpPoint).validate().is_err());
        let mut cuts = ControlConfig::new(0.1, 0.5, 0.05, Method::CiPerSubset);
        cuts.cuts = 4;
        assert!(cuts.validate().is_err());
        assert_eq!(
            Guarantee::Exceedance(0.05).to_string(),
            "exceedance(0.05)"
        );
    }

    #[test]
    fn exceedance_examples() {
        let signs = vec![P; 40];
        let truth = vec![1.0; 40];
        let all: Vec<usize> = (0..40).collect();
        let prop = ExceedanceScale::Proportion;
        assert!(!false_sign_exceedance(&all, &signs, &truth, 0.1, prop));
        let wrong = vec![-1.0; 40];
        assert!(false_sign_exceedance(&all, &signs, &wrong, 0.1, prop));
        let mut three = truth.clone();
        three[..3].fill(-2.0);
        assert!(!false_sign_exceedance(&all, &signs, &three, 0.1, prop));
        assert!(false_sign_exceedance(&all, &signs, &three, 2.0, ExceedanceScale::Count));
        assert!((type_s_proportion(&all, &signs, &three) - 0.075).abs() < 1e-15);
        assert_eq!(type_s_proportion(&[], &signs, &truth), 0.0);
    }
}
