//! Browser demo bindings. Each exported function takes plain numbers or
//! comma-separated lists and returns a JSON string for the page to draw.

use sdr_core::confidence::{hoeffding_sdr_upper, sdr_two_sided_ci, sdr_upper_ci};
use sdr_core::simultaneous::{simultaneous_region, NestedSummaries};
use sdr_core::study::AgreementSummary;
use sdr_core::tail_bounds::{hoeffding_exponent, tight_exponent, BoundProblem};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct BoundCurve {
    pub total: f64,
    pub mu: f64,
    pub s: Vec<f64>,
    pub tight: Vec<f64>,
    pub hoeffding: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct IntervalReport {
    pub sdp: f64,
    pub upper: f64,
    pub hoeffding_upper: f64,
    pub two_sided: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct RegionReport {
    pub sizes: Vec<u64>,
    pub sdps: Vec<f64>,
    pub simultaneous: Vec<f64>,
    pub per_subset: Vec<f64>,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("{what}: cannot parse {t:?}")))
        .collect()
}

/// Log tail bounds at `points` evenly spaced sums between `mu` and the total
/// width, where `mu` is given as a fraction of the total.
pub fn bound_curve(widths: &[f64], mu_fraction: f64, points: usize) -> Result<BoundCurve, String> {
    if !(0.0..1.0).contains(&mu_fraction) || points == 0 {
        return Err("need 0 <= mean fraction < 1 and at least one point".into());
    }
    let total: f64 = widths.iter().sum();
    let mu = mu_fraction * total;
    let mut curve = BoundCurve {
        total,
        mu,
        s: Vec::with_capacity(points),
        tight: Vec::with_capacity(points),
        hoeffding: Vec::with_capacity(points),
    };
    for j in 1..=points {
        let s = mu + (total - mu) * j as f64 / points as f64;
        let p = BoundProblem::new(widths.to_vec(), mu, s).map_err(|e| e.to_string())?;
        curve.tight.push(tight_exponent(&p).map_err(|e| e.to_string())?.log_bound);
        curve.hoeffding.push(hoeffding_exponent(&p));
        curve.s.push(s);
    }
    Ok(curve)
}

pub fn interval(counts: Vec<u64>, widths: Vec<u64>, alpha: f64) -> Result<IntervalReport, String> {
    let summary = AgreementSummary::new(counts, widths).map_err(|e| e.to_string())?;
    let two = sdr_two_sided_ci(&summary, alpha).map_err(|e| e.to_string())?;
    Ok(IntervalReport {
        sdp: summary.sdp(),
        upper: sdr_upper_ci(&summary, alpha).map_err(|e| e.to_string())?.upper,
        hoeffding_upper: hoeffding_sdr_upper(&summary, alpha).map_err(|e| e.to_string())?.upper,
        two_sided: [two.lower, two.upper],
    })
}

/// Modules enter in the order given; block `k` is module `k`.
pub fn region(counts: &[u64], widths: &[u64], alpha: f64) -> Result<RegionReport, String> {
    if counts.len() != widths.len() || counts.is_empty() {
        return Err("counts and widths must be nonempty and of equal length".into());
    }
    let blocks = counts
        .iter()
        .zip(widths)
        .map(|(&x, &a)| AgreementSummary::new(vec![x], vec![a]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let nested = NestedSummaries::new(blocks).map_err(|e| e.to_string())?;
    let joint = simultaneous_region(&nested, alpha).map_err(|e| e.to_string())?;
    let per_subset = (1..=counts.len())
        .map(|k| {
            let s = AgreementSummary::new(counts[..k].to_vec(), widths[..k].to_vec())?;
            Ok(sdr_upper_ci(&s, alpha)?.upper)
        })
        .collect::<sdr_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    Ok(RegionReport {
        sizes: joint.sizes,
        sdps: joint.sdps,
        simultaneous: joint.uppers,
        per_subset,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve_js(widths: &str, mu_fraction: f64, points: usize) -> Result<String, JsValue> {
    to_js(parse_list(widths, "widths").and_then(|w| bound_curve(&w, mu_fraction, points)))
}

#[wasm_bindgen(js_name = sdrInterval)]
pub fn interval_js(counts: &str, widths: &str, alpha: f64) -> Result<String, JsValue> {
    to_js(
        parse_list(counts, "counts")
            .and_then(|c| Ok((c, parse_list(widths, "widths")?)))
            .and_then(|(c, w)| interval(c, w, alpha)),
    )
}

#[wasm_bindgen(js_name = simultaneousRegion)]
pub fn region_js(counts: &str, widths: &str, alpha: f64) -> Result<String, JsValue> {
    to_js(
        parse_list::<u64>(counts, "counts")
            .and_then(|c| Ok((c, parse_list::<u64>(widths, "widths")?)))
            .and_then(|(c, w)| region(&c, &w, alpha)),
    )
}
