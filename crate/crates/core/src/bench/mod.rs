//! Experiment orchestration: the training grid, MR/TTC extraction,
//! Table-1-style summaries, metric correlations and report files.

mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::benchmark_circuit;
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec, PolicyValueModel};
use crate::ppo::{parse_rewards_csv, train, write_atomic, PpoConfig, RewardPoint, RewardSeries};
use crate::qmetrics::{parse_metrics_csv, MetricRecord};

pub use svg::{reward_curve_svg, scatter_svg, Curve, ScatterPoint};

pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
pub const SMOOTHING_WINDOW: usize = 10;
pub const TTC_TOLERANCE: f64 = 0.2;
/// Learning threshold drawn on every reward plot.
pub const REWARD_THRESHOLD: f64 = 0.81;

/// Largest raw checkpoint reward.
pub fn max_reward(series: &[RewardPoint]) -> f64 {
    series.iter().map(|p| p.reward).fold(f64::NEG_INFINITY, f64::max)
}

/// First checkpoint whose reward every later checkpoint stays within
/// `tolerance` of. Returns its timestep, or `None` for an empty series.
pub fn time_to_convergence(series: &[RewardPoint], tolerance: f64) -> Option<usize> {
    let tol = tolerance + 1e-9;
    (0..series.len())
        .find(|&t| series[t + 1..].iter().all(|p| (p.reward - series[t].reward).abs() <= tol))
        .map(|t| series[t].step)
}

/// Trailing moving average; the first `k < window` points average the first
/// `k` values.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| mean(&values[(i + 1).saturating_sub(w)..=i]))
        .collect()
}

/// Arithmetic mean; exact when all values are equal.
pub fn mean(xs: &[f64]) -> f64 {
    match xs.first() {
        Some(&first) if xs.iter().all(|&x| x == first) => first,
        _ => xs.iter().sum::<f64>() / xs.len() as f64,
    }
}

/// Sample standard deviation over `sqrt(n)`; 0 for fewer than two values.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Pearson correlation; `None` when either side has no spread.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// 1-based ranks with ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// One training run of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunKey {
    pub spec: ModelSpec,
    pub seed: u64,
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-s{}", self.spec.slug(), self.seed)
    }
}

impl FromStr for RunKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (spec, seed) = s
            .rsplit_once("-s")
            .ok_or_else(|| Error::Config(format!("bad run name {s:?}")))?;
        Ok(Self {
            spec: spec.parse()?,
            seed: seed.parse().map_err(|_| Error::Config(format!("bad run name {s:?}")))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub spec: ModelSpec,
    pub seed: u64,
    pub series: RewardSeries,
    pub weights: usize,
    pub mr: f64,
    pub ttc: usize,
}

impl RunRecord {
    pub fn new(spec: ModelSpec, seed: u64, series: RewardSeries) -> Result<Self> {
        let ttc = time_to_convergence(&series, TTC_TOLERANCE)
            .ok_or_else(|| Error::Config(format!("{spec} seed {seed}: empty reward series")))?;
        Ok(Self {
            spec,
            seed,
            mr: max_reward(&series),
            ttc,
            weights: Model::zeros(spec)?.num_params(),
            series,
        })
    }
}

/// Parses `pqc2,pqc6,nn4`.
pub fn parse_only(list: &str) -> Result<Vec<ModelSpec>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Done,
    Failed { error: String },
}

/// Completion state of every attempted run, keyed by run name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunStatus>,
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join("manifest.json");
        if !path.exists() {
            return Ok(Self::default());
        }
        serde_json::from_str(&fs::read_to_string(&path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&out.join("manifest.json"), &text)
    }

    pub fn is_done(&self, key: &RunKey, out: &Path) -> bool {
        matches!(self.runs.get(&key.to_string()), Some(RunStatus::Done))
            && run_dir(out, key).join("rewards.csv").exists()
    }
}

pub fn run_dir(out: &Path, key: &RunKey) -> PathBuf {
    out.join("runs").join(key.to_string())
}

#[derive(Debug, Clone)]
pub struct GridPlan {
    pub specs: Vec<ModelSpec>,
    pub seeds: Vec<u64>,
    pub config: PpoConfig,
}

impl GridPlan {
    pub fn paper_scale(config: PpoConfig) -> Self {
        Self {
            specs: ModelSpec::full_grid(),
            seeds: DEFAULT_SEEDS.to_vec(),
            config,
        }
    }

    pub fn runs(&self) -> Vec<RunKey> {
        self.specs
            .iter()
            .flat_map(|&spec| self.seeds.iter().map(move |&seed| RunKey { spec, seed }))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct GridReport {
    pub completed: Vec<RunKey>,
    pub skipped: Vec<RunKey>,
    pub failed: Vec<(RunKey, String)>,
}

/// Trains every run of `plan` not already marked done in `out`, up to
/// `jobs` at a time. Failures are recorded in the manifest and returned
/// rather than aborting the grid.
pub fn run_grid(plan: &GridPlan, out: &Path, jobs: usize) -> Result<GridReport> {
    plan.config.validate()?;
    fs::create_dir_all(out.join("runs"))?;
    let manifest = Mutex::new(Manifest::load(out)?);
    let (skipped, todo): (Vec<RunKey>, Vec<RunKey>) = {
        let m = manifest.lock().expect("manifest lock");
        plan.runs().into_iter().partition(|k| m.is_done(k, out))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<(RunKey, Result<()>)> = pool.install(|| {
        todo.par_iter()
            .map(|&key| {
                let cfg = PpoConfig {
                    seed: key.seed,
                    ..plan.config.clone()
                };
                let res = train(key.spec, &cfg).and_then(|o| o.write_run_dir(&run_dir(out, &key)));
                let status = match &res {
                    Ok(()) => RunStatus::Done,
                    Err(e) => RunStatus::Failed { error: e.to_string() },
                };
                let mut m = manifest.lock().expect("manifest lock");
                m.runs.insert(key.to_string(), status);
                let saved = m.save(out);
                (key, res.and(saved))
            })
            .collect()
    });
    let mut report = GridReport {
        skipped,
        ..Default::default()
    };
    for (key, res) in results {
        match res {
            Ok(()) => report.completed.push(key),
            Err(e) => report.failed.push((key, e.to_string())),
        }
    }
    Ok(report)
}

pub fn load_run(out: &Path, key: &RunKey) -> Result<RunRecord> {
    let path = run_dir(out, key).join("rewards.csv");
    let series = parse_rewards_csv(&fs::read_to_string(&path)?)?;
    RunRecord::new(key.spec, key.seed, series)
}

/// Loads every run of `plan`, listing all absent ones in the error.
pub fn load_runs(out: &Path, plan: &GridPlan) -> Result<Vec<RunRecord>> {
    let keys = plan.runs();
    let missing: Vec<String> = keys
        .iter()
        .filter(|k| !run_dir(out, k).join("rewards.csv").exists())
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingInputs(missing));
    }
    keys.iter().map(|k| load_run(out, k)).collect()
}

/// Table-1-style row: seed means with standard errors plus the metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub solution: ModelSpec,
    pub weights: usize,
    pub mr: f64,
    pub mr_se: f64,
    pub ttc_k: f64,
    pub ttc_k_se: f64,
    pub ent: Option<f64>,
    pub exp: Option<f64>,
    pub ed: Option<f64>,
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_field(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Config(format!("bad number {s:?}")))
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str = "solution,W,MR,MR_se,TTC_k,TTC_k_se,Ent,Exp,ED";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.solution,
            self.weights,
            self.mr,
            self.mr_se,
            self.ttc_k,
            self.ttc_k_se,
            opt_field(self.ent),
            opt_field(self.exp),
            opt_field(self.ed)
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Config(format!("summary row has {} fields: {line:?}", f.len())));
        }
        let req = |s: &str| parse_field(s)?.ok_or_else(|| Error::Config(format!("missing value in {line:?}")));
        Ok(Self {
            solution: f[0].parse()?,
            weights: f[1].trim().parse().map_err(|_| Error::Config(format!("bad W {:?}", f[1])))?,
            mr: req(f[2])?,
            mr_se: req(f[3])?,
            ttc_k: req(f[4])?,
            ttc_k_se: req(f[5])?,
            ent: parse_field(f[6])?,
            exp: parse_field(f[7])?,
            ed: parse_field(f[8])?,
        })
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{}\n", SummaryRow::CSV_HEADER);
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SummaryRow::CSV_HEADER) {
        return Err(Error::Config("unexpected summary.csv header".into()));
    }
    lines.filter(|l| !l.trim().is_empty()).map(SummaryRow::parse_csv_row).collect()
}

/// One row per solution, in first-appearance order of `records`.
pub fn summarize(records: &[RunRecord], metrics: &[MetricRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<ModelSpec> = Vec::new();
    for r in records {
        if !order.contains(&r.spec) {
            order.push(r.spec);
        }
    }
    order
        .into_iter()
        .map(|spec| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.spec == spec).collect();
            let mrs: Vec<f64> = runs.iter().map(|r| r.mr).collect();
            let ttcs: Vec<f64> = runs.iter().map(|r| r.ttc as f64 / 1000.0).collect();
            let m = metrics.iter().find(|m| m.solution == spec);
            SummaryRow {
                solution: spec,
                weights: runs[0].weights,
                mr: mean(&mrs),
                mr_se: standard_error(&mrs),
                ttc_k: mean(&ttcs),
                ttc_k_se: standard_error(&ttcs),
                ent: m.and_then(|m| m.ent),
                exp: m.and_then(|m| m.exp),
                ed: m.map(|m| m.ed),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ent,
    Exp,
    Ed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Mr,
    Ttc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Ent, Metric::Exp, Metric::Ed];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Ent => "Ent",
            Metric::Exp => "Exp",
            Metric::Ed => "ED",
        }
    }

    fn of(self, row: &SummaryRow) -> Option<f64> {
        match self {
            Metric::Ent => row.ent,
            Metric::Exp => row.exp,
            Metric::Ed => row.ed,
        }
    }
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Mr, Target::Ttc];

    pub fn label(self) -> &'static str {
        match self {
            Target::Mr => "MR",
            Target::Ttc => "TTC",
        }
    }

    fn of(self, row: &SummaryRow) -> f64 {
        match self {
            Target::Mr => row.mr,
            Target::Ttc => row.ttc_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub metric: Metric,
    pub target: Target,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub n: usize,
}

/// Metric/target pairs over the circuit rows that carry the metric.
pub fn metric_pairs(rows: &[SummaryRow], metric: Metric, target: Target) -> Vec<(ModelSpec, f64, f64)> {
    rows.iter()
        .filter(|r| matches!(r.solution, ModelSpec::Pqc(_)))
        .filter_map(|r| metric.of(r).map(|m| (r.solution, m, target.of(r))))
        .collect()
}

/// Pearson and Spearman coefficients for every metric/target pair. Pairs
/// with fewer than 3 rows or no spread are reported as undefined.
pub fn correlate(rows: &[SummaryRow]) -> Vec<CorrelationRow> {
    let mut out = Vec::new();
    for metric in Metric::ALL {
        for target in Target::ALL {
            let pairs = metric_pairs(rows, metric, target);
            let x: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let enough = pairs.len() >= 3;
            out.push(CorrelationRow {
                metric,
                target,
                pearson: if enough { pearson(&x, &y) } else { None },
                spearman: if enough { spearman(&x, &y) } else { None },
                n: pairs.len(),
            });
        }
    }
    out
}

pub fn correlations_csv(rows: &[CorrelationRow]) -> String {
    let mut out = String::from("metric,target,pearson,spearman,n\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.metric.label(),
            r.target.label(),
            opt_field(r.pearson),
            opt_field(r.spearman),
            r.n
        ));
    }
    out
}

/// Circuit rows labelled with their entangler, for scatter plots.
pub fn scatter_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut out = String::from("circuit_id,entangler,Ent,Exp,ED,MR,TTC_k\n");
    for r in rows {
        if let ModelSpec::Pqc(id) = r.solution {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                id,
                benchmark_circuit(id)?.entangler.label(),
                opt_field(r.ent),
                opt_field(r.exp),
                opt_field(r.ed),
                r.mr,
                r.ttc_k
            ));
        }
    }
    Ok(out)
}

/// Published Table 1: MR and TTC (thousands of steps) with their errors,
/// then Ent, Exp and ED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub solution: ModelSpec,
    pub weights: usize,
    pub mr: f64,
    pub mr_se: f64,
    pub ttc_k: f64,
    pub ttc_k_se: f64,
    pub ent: Option<f64>,
    pub exp: Option<f64>,
    pub ed: f64,
}

const fn pqc(id: usize, w: usize, r: [f64; 4], ent: f64, exp: f64, ed: f64) -> PublishedRow {
    PublishedRow {
        solution: ModelSpec::Pqc(id),
        weights: w,
        mr: r[0],
        mr_se: r[1],
        ttc_k: r[2],
        ttc_k_se: r[3],
        ent: Some(ent),
        exp: Some(exp),
        ed,
    }
}

const fn nn(h: usize, w: usize, r: [f64; 4], ed: f64) -> PublishedRow {
    PublishedRow {
        solution: ModelSpec::Nn(h),
        weights: w,
        mr: r[0],
        mr_se: r[1],
        ttc_k: r[2],
        ttc_k_se: r[3],
        ent: None,
        exp: None,
        ed,
    }
}

pub const PUBLISHED_TABLE: [PublishedRow; 23] = [
    pqc(2, 41, [0.77, 0.16, 10.33, 7.58], 0.81, 0.28, 3.50),
    pqc(5, 81, [0.78, 0.22, 11.33, 3.79], 0.41, 0.06, 6.91),
    pqc(11, 49, [0.71, 0.20, 12.33, 5.17], 0.73, 0.13, 5.08),
    pqc(9, 33, [0.75, 0.02, 12.50, 1.24], 1.00, 0.67, 3.48),
    pqc(8, 63, [0.72, 0.08, 14.33, 10.34], 0.39, 0.08, 6.24),
    pqc(19, 49, [0.71, 0.07, 14.33, 12.50], 0.59, 0.08, 6.29),
    pqc(7, 63, [0.72, 0.06, 15.33, 16.16], 0.33, 0.09, 5.82),
    pqc(14, 57, [0.78, 0.25, 16.33, 7.58], 0.66, 0.01, 7.68),
    pqc(15, 41, [0.76, 0.28, 19.67, 16.54], 0.82, 0.19, 4.60),
    pqc(16, 47, [0.78, 0.09, 20.00, 25.21], 0.35, 0.26, 3.73),
    pqc(18, 49, [0.72, 0.10, 20.00, 26.28], 0.44, 0.23, 3.70),
    pqc(1, 41, [0.72, 0.10, 21.67, 10.34], 0.00, 0.29, 3.29),
    pqc(4, 47, [0.81, 0.18, 23.67, 14.12], 0.47, 0.13, 5.58),
    pqc(17, 47, [0.72, 0.09, 25.00, 9.93], 0.40, 0.13, 5.74),
    pqc(13, 57, [0.72, 0.08, 25.00, 53.79], 0.61, 0.05, 7.07),
    pqc(6, 81, [0.85, 0.16, 26.00, 4.96], 0.78, 0.00, 7.79),
    pqc(12, 49, [0.75, 0.19, 26.66, 27.92], 0.65, 0.20, 4.91),
    pqc(3, 47, [0.79, 0.06, 27.67, 48.25], 0.34, 0.24, 3.72),
    pqc(10, 41, [0.81, 0.27, 31.67, 14.34], 0.54, 0.22, 3.98),
    nn(16, 1245, [0.81, 0.10, 11.33, 3.12], 48.78),
    nn(2, 125, [0.84, 0.04, 19.00, 15.51], 42.53),
    nn(4, 237, [0.86, 0.00, 22.00, 5.61], 72.13),
    nn(8, 509, [0.85, 0.02, 24.33, 6.84], 74.83),
];

pub fn published_row(spec: ModelSpec) -> Option<&'static PublishedRow> {
    PUBLISHED_TABLE.iter().find(|r| r.solution == spec)
}

/// The published table as summary rows, for feeding [`correlate`].
pub fn published_summary() -> Vec<SummaryRow> {
    PUBLISHED_TABLE
        .iter()
        .map(|r| SummaryRow {
            solution: r.solution,
            weights: r.weights,
            mr: r.mr,
            mr_se: r.mr_se,
            ttc_k: r.ttc_k,
            ttc_k_se: r.ttc_k_se,
            ent: r.ent,
            exp: r.exp,
            ed: Some(r.ed),
        })
        .collect()
}

/// Reward-curve panels: circuit groups, each drawn with a classical baseline.
pub const CURVE_GROUPS: [(&str, &[usize]); 5] = [
    ("pqc1-4", &[1, 2, 3, 4]),
    ("pqc3-4-16-17", &[3, 4, 16, 17]),
    ("pqc5-8", &[5, 6, 7, 8]),
    ("pqc9-12", &[9, 10, 11, 12]),
    ("pqc13-19", &[13, 14, 15, 16, 17, 18, 19]),
];

/// Seed-mean of the smoothed series with its standard-error band.
pub fn smoothed_curve(records: &[&RunRecord], window: usize) -> Curve {
    let smoothed: Vec<Vec<f64>> = records
        .iter()
        .map(|r| smooth(&r.series.iter().map(|p| p.reward).collect::<Vec<_>>(), window))
        .collect();
    let len = smoothed.iter().map(Vec::len).min().unwrap_or(0);
    let steps = records.first().map(|r| r.series[..len].iter().map(|p| p.step).collect()).unwrap_or_default();
    let column = |i: usize| smoothed.iter().map(|s| s[i]).collect::<Vec<_>>();
    Curve {
        label: records.first().map(|r| r.spec.to_string()).unwrap_or_default(),
        steps,
        mean: (0..len).map(|i| mean(&column(i))).collect(),
        se: (0..len).map(|i| standard_error(&column(i))).collect(),
    }
}

/// Everything [`render_report`] wrote, relative to the output directory.
#[derive(Debug, Clone, Default)]
pub struct ReportFiles {
    pub files: Vec<String>,
}

/// Writes the summary, correlation tables and SVG figures for the runs of
/// `plan` found under `out`, joined with `out/metrics.csv`.
pub fn render_report(out: &Path, plan: &GridPlan) -> Result<ReportFiles> {
    let metrics_path = out.join("metrics.csv");
    let records = match load_runs(out, plan) {
        Ok(r) if metrics_path.exists() => r,
        Ok(_) => return Err(Error::MissingInputs(vec!["metrics.csv".into()])),
        Err(Error::MissingInputs(mut missing)) => {
            if !metrics_path.exists() {
                missing.push("metrics.csv".into());
            }
            return Err(Error::MissingInputs(missing));
        }
        Err(e) => return Err(e),
    };
    let metrics = parse_metrics_csv(&fs::read_to_string(&metrics_path)?)?;
    let rows = summarize(&records, &metrics);
    let mut written = ReportFiles::default();
    let mut write = |name: &str, text: &str| -> Result<()> {
        write_atomic(&out.join(name), text)?;
        written.files.push(name.to_string());
        Ok(())
    };
    write("summary.csv", &summary_csv(&rows))?;
    write("correlations.csv", &correlations_csv(&correlate(&rows)))?;
    write("scatter.csv", &scatter_csv(&rows)?)?;

    let curve_for = |spec: ModelSpec| {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.spec == spec).collect();
        (!runs.is_empty()).then(|| smoothed_curve(&runs, SMOOTHING_WINDOW))
    };
    let baseline = plan
        .specs
        .iter()
        .copied()
        .filter(|s| matches!(s, ModelSpec::Nn(_)))
        .min_by_key(|s| if *s == ModelSpec::Nn(4) { 0 } else { 1 });
    for (name, ids) in CURVE_GROUPS {
        let mut curves: Vec<Curve> = ids.iter().filter_map(|&id| curve_for(ModelSpec::Pqc(id))).collect();
        if curves.is_empty() {
            continue;
        }
        curves.extend(baseline.and_then(curve_for));
        let title = format!("Reward, {name} (trailing mean over {SMOOTHING_WINDOW} checkpoints)");
        write(&format!("curves_{name}.svg"), &reward_curve_svg(&title, &curves, REWARD_THRESHOLD))?;
    }
    let nn_curves: Vec<Curve> = plan
        .specs
        .iter()
        .filter(|s| matches!(s, ModelSpec::Nn(_)))
        .filter_map(|&s| curve_for(s))
        .collect();
    if !nn_curves.is_empty() {
        let title = format!("Reward, classical (trailing mean over {SMOOTHING_WINDOW} checkpoints)");
        write("curves_nn.svg", &reward_curve_svg(&title, &nn_curves, REWARD_THRESHOLD))?;
    }
    for metric in Metric::ALL {
        for target in Target::ALL {
            let points: Vec<ScatterPoint> = metric_pairs(&rows, metric, target)
                .into_iter()
                .map(|(spec, x, y)| ScatterPoint {
                    x,
                    y,
                    label: spec.to_string(),
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            let svg = scatter_svg(
                &format!("{} vs {}", target.label(), metric.label()),
                metric.label(),
                target.label(),
                &points,
            );
            write(
                &format!("scatter_{}_{}.svg", metric.label().to_lowercase(), target.label().to_lowercase()),
                &svg,
            )?;
        }
    }
    Ok(written)
}
