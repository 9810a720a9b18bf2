//! Subcommand implementations.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sdr_core::confidence::sdr_two_sided_ci;
use sdr_core::control::{select, type_s_proportion, ControlConfig, Method, Ordering, Preprocess};
use sdr_core::simulation::{
    generate_stream, run_comparison, BhInput, SimConfig, SimMethod, SimSettings,
};
use sdr_core::simultaneous::{simultaneous_region, NestedSummaries};
use sdr_core::study::{summarize, Sign};
use sdr_core::tail_bounds::{hoeffding_exponent, improvement_ratio, tight_exponent, BoundProblem};

use crate::table::{self, fmt_real, SweepRow};

#[derive(Debug, Parser)]
#[command(name = "sdr", version, about = "Sign disagreement rates and type S error control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the tight tail bound for one problem.
    Bound(BoundArgs),
    /// Sweep score thresholds and tabulate disagreement estimates.
    Assess(AssessArgs),
    /// Select discoveries at a target type S error level.
    Control(ControlArgs),
    /// Run the replicate simulation.
    Simulate(SimulateArgs),
    /// Score an external selection against simulated truth.
    Score(ScoreArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bound(a) => bound(a),
        Command::Assess(a) => assess(a),
        Command::Control(a) => control(a),
        Command::Simulate(a) => simulate(a),
        Command::Score(a) => score(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split([',', '\n', ' ', '\t'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| anyhow!("not a number: {s:?}")))
        .collect()
}

// ---- bound ----

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Comma-separated widths, or @path to a file of widths.
    #[arg(long)]
    pub widths: String,
    /// Bound on the total mean.
    #[arg(long)]
    pub mu: f64,
    /// Threshold for the sum.
    #[arg(long)]
    pub s: f64,
    /// Also report whether the bound rejects at this level.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub compare_hoeffding: bool,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct BoundReport {
    log_bound: f64,
    bound: f64,
    t_star: f64,
    lambda_star: f64,
    tau_star: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejects_at_alpha: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hoeffding_log_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hoeffding_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    improvement_ratio: Option<f64>,
}

fn bound(a: BoundArgs) -> Result<()> {
    let widths = match a.widths.strip_prefix('@') {
        Some(path) => parse_list(
            &fs::read_to_string(path).with_context(|| format!("reading widths from {path}"))?,
        )?,
        None => parse_list(&a.widths)?,
    };
    if let Some(alpha) = a.alpha {
        if !(alpha > 0.0 && alpha < 1.0) {
            bail!("--alpha must lie in (0, 1)");
        }
    }
    let problem = BoundProblem::new(widths, a.mu, a.s)?;
    let r = tight_exponent(&problem)?;
    let (h, ratio) = if a.compare_hoeffding {
        (Some(hoeffding_exponent(&problem)), Some(improvement_ratio(&problem)?))
    } else {
        (None, None)
    };
    let report = BoundReport {
        log_bound: r.log_bound,
        bound: r.log_bound.exp(),
        t_star: r.t_star,
        lambda_star: r.lambda_star,
        tau_star: r.tau_star,
        rejects_at_alpha: a.alpha.map(|al| al.ln() >= r.log_bound),
        hoeffding_log_bound: h,
        hoeffding_bound: h.map(f64::exp),
        improvement_ratio: ratio,
    };
    let mut out = io::stdout().lock();
    if a.json {
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "log_bound    {}", fmt_real(report.log_bound))?;
    writeln!(out, "bound        {}", fmt_real(report.bound))?;
    writeln!(out, "t_star       {}", fmt_real(report.t_star))?;
    writeln!(out, "lambda_star  {}", fmt_real(report.lambda_star))?;
    let tau: Vec<String> = report.tau_star.iter().map(|&t| fmt_real(t)).collect();
    writeln!(out, "tau_star     {}", tau.join(","))?;
    if let (Some(alpha), Some(rej)) = (a.alpha, report.rejects_at_alpha) {
        writeln!(out, "rejects at alpha={alpha}  {rej}")?;
    }
    if let (Some(h), Some(ratio)) = (h, ratio) {
        writeln!(out, "hoeffding_log_bound  {}", fmt_real(h))?;
        writeln!(out, "hoeffding_bound      {}", fmt_real(h.exp()))?;
        writeln!(out, "improvement_ratio    {}", fmt_real(ratio))?;
    }
    Ok(())
}

// ---- assess ----

#[derive(Debug, Clone)]
pub enum Thresholds {
    AllScores,
    Grid(usize),
}

fn parse_thresholds(s: &str) -> Result<Thresholds, String> {
    if s == "all-scores" {
        return Ok(Thresholds::AllScores);
    }
    match s.strip_prefix("grid:").map(str::parse::<usize>) {
        Some(Ok(n)) if n >= 1 => Ok(Thresholds::Grid(n)),
        _ => Err(format!("expected all-scores or grid:N with N >= 1, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long)]
    pub study: PathBuf,
    /// Two-sided interval level is 1 - alpha; the simultaneous column is
    /// one-sided at joint level 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// all-scores or grid:N.
    #[arg(long, default_value = "all-scores", value_parser = parse_thresholds)]
    pub thresholds: Thresholds,
}

fn assess(a: AssessArgs) -> Result<()> {
    let table = table::read_study(open(&a.study)?)?;
    let rows = sweep(&table.study, a.alpha, &a.thresholds)?;
    table::write_sweep(create(&a.out)?, &rows)
}

/// One row per distinct subset `{i : score_i >= t}` over the thresholds,
/// in order of increasing size.
pub fn sweep(
    study: &sdr_core::study::SignStudy,
    alpha: f64,
    thresholds: &Thresholds,
) -> Result<Vec<SweepRow>> {
    let scores = study.scores().ok_or(sdr_core::Error::MissingScores)?;
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ts: Vec<f64> = match *thresholds {
        Thresholds::AllScores => scores.to_vec(),
        Thresholds::Grid(1) => vec![lo],
        Thresholds::Grid(n) => (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect(),
    };
    ts.sort_by(|x, y| y.total_cmp(x));
    ts.dedup();

    let mut order: Vec<usize> = (0..study.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut taken = 0;
    for t in ts {
        let end = taken + order[taken..].iter().take_while(|&&i| scores[i] >= t).count();
        if end > taken {
            blocks.push(order[taken..end].to_vec());
            taken = end;
        }
    }

    let mut rows = Vec::with_capacity(blocks.len());
    let mut prefix = Vec::new();
    for b in &blocks {
        prefix.extend_from_slice(b);
        let summary = summarize(study, &prefix)?;
        let ci = sdr_two_sided_ci(&summary, alpha)?;
        rows.push(SweepRow {
            subset_size: prefix.len(),
            sdp: summary.sdp(),
            ci_lower: ci.lower,
            ci_upper: ci.upper,
            simultaneous_upper: None,
        });
    }

    // The joint bound needs every module to enter in a single block.
    let whole_modules = prefix.len() == study.len() && {
        let mut block_of = vec![usize::MAX; study.module_count()];
        blocks.iter().enumerate().all(|(k, b)| {
            b.iter().all(|&i| {
                let m = study.module_of()[i];
                let first = block_of[m] == usize::MAX;
                if first {
                    block_of[m] = k;
                }
                first || block_of[m] == k
            })
        })
    };
    if whole_modules {
        let summaries = blocks
            .iter()
            .map(|b| summarize(study, b))
            .collect::<sdr_core::Result<Vec<_>>>()?;
        let region = simultaneous_region(&NestedSummaries::new(summaries)?, alpha)?;
        for (row, u) in rows.iter_mut().zip(region.uppers) {
            row.simultaneous_upper = Some(u);
        }
    }
    Ok(rows)
}

// ---- control ----

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Sdp,
    Ci,
    Simultaneous,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderingArg {
    Parameter,
    Module,
}

fn parse_preprocess(s: &str) -> Result<Preprocess, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| format!("expected top-k:N, top-modules:F or threshold:T, got {s:?}"))?;
    let bad = || format!("bad value in {s:?}");
    match kind {
        "top-k" => Ok(Preprocess::TopKPerModule(value.parse().map_err(|_| bad())?)),
        "top-modules" => Ok(Preprocess::TopFractionOfModules(value.parse().map_err(|_| bad())?)),
        "threshold" => Ok(Preprocess::ScoreThreshold(value.parse().map_err(|_| bad())?)),
        _ => Err(format!("unknown preprocessing {kind:?}")),
    }
}

#[derive(Debug, Args)]
pub struct ControlArgs {
    #[arg(long)]
    pub study: PathBuf,
    /// Target type S error proportion.
    #[arg(long)]
    pub target_v: f64,
    /// Assumed faithfulness of the validation signs, in [0.5, 1].
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Thresholds merged into the simultaneous region.
    #[arg(long, default_value_t = 1)]
    pub cuts: usize,
    /// top-k:N, top-modules:F or threshold:T.
    #[arg(long, value_parser = parse_preprocess)]
    pub preprocess: Option<Preprocess>,
    /// Defaults to module for the simultaneous method, parameter otherwise.
    #[arg(long, value_enum)]
    pub ordering: Option<OrderingArg>,
    /// Selected param_ids, one per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Write the JSON summary here instead of standard output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct ControlSummary<'a> {
    method: Method,
    ordering: Ordering,
    target_v: f64,
    q: f64,
    alpha: f64,
    cuts: usize,
    threshold: f64,
    k_star: usize,
    selected: usize,
    guarantee: String,
    trace: &'a [sdr_core::control::TraceEntry],
}

fn control(a: ControlArgs) -> Result<()> {
    let table = table::read_study(open(&a.study)?)?;
    let method = match a.method {
        MethodArg::Sdp => Method::SdpPoint,
        MethodArg::Ci => Method::CiPerSubset,
        MethodArg::Simultaneous => Method::Simultaneous,
    };
    let mut config = ControlConfig::new(a.target_v, a.q, a.alpha, method);
    if let Some(o) = a.ordering {
        config.ordering = match o {
            OrderingArg::Parameter => Ordering::ByParameterScore,
            OrderingArg::Module => Ordering::ByModuleMeanScore,
        };
    }
    config.preprocess = a.preprocess;
    config.cuts = a.cuts;
    config.validate()?;
    let result = select(&table.study, &config)?;

    let mut out = create(&a.out)?;
    for &i in &result.selected {
        writeln!(out, "{}", table.param_ids[i])?;
    }
    out.flush()?;

    let summary = ControlSummary {
        method,
        ordering: config.ordering,
        target_v: config.target_v,
        q: config.q,
        alpha: config.alpha,
        cuts: config.cuts,
        threshold: config.threshold(),
        k_star: result.k_star,
        selected: result.selected.len(),
        guarantee: result.guarantee.to_string(),
        trace: &result.trace,
    };
    match &a.summary {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, &summary)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            serde_json::to_writer_pretty(&mut w, &summary)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

// ---- simulate ----

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BhInputArg {
    Proposer,
    Mean,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Parameters per data set.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Use 50,000 parameters per data set.
    #[arg(long, conflicts_with = "n")]
    pub full_scale: bool,
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    pub sigma_grid: String,
    #[arg(long, default_value = "1,2,3,4,5,6,7,8,9,10")]
    pub k_grid: String,
    /// Number of seeds per grid cell.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// First seed; cells use seed, seed + 1, ...
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of sdr-sdp, sdr-ci, sdr-simultaneous, bh.
    #[arg(long, default_value = "sdr-sdp,sdr-ci,sdr-simultaneous,bh")]
    pub methods: String,
    #[arg(long, default_value_t = 0.10)]
    pub target: f64,
    #[arg(long, default_value_t = 2)]
    pub replicates: usize,
    #[arg(long, value_enum, default_value = "proposer")]
    pub bh_input: BhInputArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each cell's truth and estimates to this directory.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let n = if a.full_scale { 50_000 } else { a.n };
    let sigma_grid = parse_list(&a.sigma_grid).context("--sigma-grid")?;
    let k_grid = parse_list(&a.k_grid).context("--k-grid")?;
    if sigma_grid.is_empty() || k_grid.is_empty() {
        bail!("grids must be nonempty");
    }
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let methods = a
        .methods
        .split(',')
        .map(|m| m.trim().parse::<SimMethod>())
        .collect::<sdr_core::Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (0..a.seeds).map(|i| a.seed + i).collect();
    let mut settings = SimSettings::new(n, sigma_grid, k_grid, seeds);
    settings.methods = methods;
    settings.target = a.target;
    settings.replicates = a.replicates;
    settings.bh_input = match a.bh_input {
        BhInputArg::Proposer => BhInput::Proposer,
        BhInputArg::Mean => BhInput::Mean,
    };
    // Validate every cell configuration before the (long) run.
    for &sigma in &settings.sigma_grid {
        for &k in &settings.k_grid {
            let mut c = SimConfig::new(n, sigma, k, 0);
            c.replicates = a.replicates;
            c.validate()?;
        }
    }
    if !(a.target > 0.0 && a.target < 1.0) {
        bail!("--target must lie in (0, 1)");
    }
    let rows = run_comparison(&settings)?;
    table::write_outcomes(create(&a.out)?, &rows)?;
    if let Some(dir) = &a.dump_dir {
        dump_cells(dir, &settings)?;
    }
    Ok(())
}

/// Writes `param_id,theta,rep0,rep1,...` for every cell.
fn dump_cells(dir: &Path, settings: &SimSettings) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (si, &sigma) in settings.sigma_grid.iter().enumerate() {
        for (ki, &k) in settings.k_grid.iter().enumerate() {
            for &seed in &settings.seeds {
                let mut config = SimConfig::new(settings.n, sigma, k, seed);
                config.inflated_fraction = settings.inflated_fraction;
                config.replicates = settings.replicates;
                let stream = (si * settings.k_grid.len() + ki) as u64;
                let data = generate_stream(&config, stream)?;
                let path = dir.join(format!("sigma{sigma}_k{k}_seed{seed}.csv"));
                let mut w = csv::Writer::from_writer(create(&path)?);
                let mut header = vec!["param_id".to_string(), "theta".to_string()];
                header.extend((0..settings.replicates).map(|r| format!("rep{r}")));
                w.write_record(&header)?;
                for i in 0..settings.n {
                    let mut rec = vec![format!("p{i}"), fmt_real(data.theta[i])];
                    rec.extend(data.estimates.iter().map(|row| fmt_real(row[i])));
                    w.write_record(&rec)?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

// ---- score ----

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Table with param_id and theta columns (as written by --dump-dir).
    #[arg(long)]
    pub truth: PathBuf,
    /// Table with param_id and sign columns, one row per discovery.
    #[arg(long)]
    pub selections: PathBuf,
    #[arg(long, default_value_t = 0.10)]
    pub target: f64,
}

fn score(a: ScoreArgs) -> Result<()> {
    let truth_rows = table::read_keyed(open(&a.truth)?, "theta")?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut truth = Vec::with_capacity(truth_rows.len());
    for (id, value) in truth_rows {
        let v: f64 = value.parse().map_err(|_| anyhow!("theta for {id:?} is not a number"))?;
        if index.insert(id.clone(), truth.len()).is_some() {
            bail!("duplicate param_id {id:?} in truth table");
        }
        truth.push(v);
    }
    let mut signs = vec![Sign::Plus; truth.len()];
    let mut selected = Vec::new();
    for (id, value) in table::read_keyed(open(&a.selections)?, "sign")? {
        let &i = index.get(&id).ok_or_else(|| anyhow!("unknown param_id {id:?}"))?;
        let v: i64 = value.trim_start_matches('+').parse().map_err(|_| anyhow!("bad sign {value:?}"))?;
        signs[i] = Sign::try_from(v)?;
        selected.push(i);
    }
    let prop = type_s_proportion(&selected, &signs, &truth);
    let mut out = io::stdout().lock();
    writeln!(out, "discoveries,type_s_proportion,target")?;
    writeln!(out, "{},{},{}", selected.len(), fmt_real(prop), fmt_real(a.target))?;
    Ok(())
}
