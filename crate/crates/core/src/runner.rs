//! Declarative Monte Carlo experiments.
//!
//! A replication draws one dataset per `(n, replication)` and feeds the same
//! dataset and stacks to every requested method, so method comparisons are
//! paired. All randomness is keyed by `(seed, n, replication, stage)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiners::{
    across_apm_with, across_aps_with, across_apw_with, impw_estimate, within_imps, within_with, CompletedFits, Method,
    MethodResult,
};
use crate::dgp::{Dataset, World, WorldKind};
use crate::error::{Error, Result};
use crate::estimators::BaseEstimator;
use crate::exact::{
    build_joint, check_appendix_a, check_appendix_b, g_formula, plim_apm, plim_aps, plim_apw, plim_impw, plim_within,
    AppendixAReport, AppendixBReport, PlimReport,
};
use crate::imputation::{impute_fitted, impute_oracle, impute_propensity, ImputedStack, ResponseWeighting};
use crate::rng::derive_key;

pub const DEFAULT_M: usize = 50;

/// A named preset or inline world parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorldSpec {
    Preset(String),
    Inline(World),
}

impl WorldSpec {
    pub fn resolve(&self) -> Result<World> {
        let world = match self {
            WorldSpec::Preset(name) => World::preset(name)?,
            WorldSpec::Inline(world) => world.clone(),
        };
        world.validate()?;
        Ok(world)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub base: BaseEstimator,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputer {
    #[default]
    Oracle,
    Fitted,
}

impl Imputer {
    pub fn name(self) -> &'static str {
        match self {
            Imputer::Oracle => "oracle",
            Imputer::Fitted => "fitted",
        }
    }
}

fn default_m() -> usize {
    DEFAULT_M
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub imputer: Imputer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the configuration and resolves its world.
    pub fn validate(&self) -> Result<World> {
        let world = self.world.resolve()?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::Config("sample_sizes must be a non-empty list of positive sizes".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for (i, spec) in self.methods.iter().enumerate() {
            spec.method.check_base(spec.base)?;
            if self.methods[..i].contains(spec) {
                return Err(Error::Config(format!("method {}/{} listed twice", spec.method, spec.base)));
            }
            let discrete_only = matches!(spec.method, Method::WithinImps | Method::Impw);
            if discrete_only && world.kind() != WorldKind::Discrete {
                return Err(Error::Config(format!("method `{}` needs a discrete world", spec.method)));
            }
        }
        Ok(world)
    }
}

/// Outcome of one `(replication, n, method)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub replication: usize,
    pub n: usize,
    pub method: Method,
    pub base: BaseEstimator,
    pub imputer: String,
    pub tau_hat: Option<f64>,
    pub elapsed_ms: f64,
    pub error: Option<String>,
}

fn imputer_label(method: Method, imputer: Imputer) -> &'static str {
    match method {
        Method::WithinImps => "propensity",
        Method::Impw => "mean_weight",
        _ => imputer.name(),
    }
}

type FitsOutcome = std::result::Result<CompletedFits, String>;

/// Inputs shared by every method of one replication, built on first use.
struct Replication<'a> {
    world: &'a World,
    config: &'a ExperimentConfig,
    n: usize,
    rep: usize,
    data: std::result::Result<Dataset, String>,
    x_stack: Option<std::result::Result<(ImputedStack, Option<FitsOutcome>), String>>,
    ps_stack: Option<std::result::Result<ImputedStack, String>>,
}

impl<'a> Replication<'a> {
    fn new(world: &'a World, config: &'a ExperimentConfig, n: usize, rep: usize) -> Self {
        let data = world.generate(n, Self::key(config, n, rep, 0)).map_err(|e| e.to_string());
        Self {
            world,
            config,
            n,
            rep,
            data,
            x_stack: None,
            ps_stack: None,
        }
    }

    fn key(config: &ExperimentConfig, n: usize, rep: usize, stage: u64) -> u64 {
        derive_key(config.seed, &[n as u64, rep as u64, stage])
    }

    fn x_stack(&mut self) -> std::result::Result<&(ImputedStack, Option<FitsOutcome>), String> {
        if self.x_stack.is_none() {
            let seed = Self::key(self.config, self.n, self.rep, 1);
            let m = self.config.m;
            let needs_fits = self
                .config
                .methods
                .iter()
                .any(|s| s.method != Method::Within || s.base != BaseEstimator::OutcomeRegression);
            let built = self.data.clone().and_then(|ds| {
                let stack = match self.config.imputer {
                    Imputer::Oracle => impute_oracle(&ds, self.world, m, seed),
                    Imputer::Fitted => impute_fitted(&ds, ds.kind, m, seed),
                }
                .map_err(|e| e.to_string())?;
                // a failed fit only fails the methods that need it
                let fits = needs_fits.then(|| CompletedFits::new(&stack).map_err(|e| e.to_string()));
                Ok((stack, fits))
            });
            self.x_stack = Some(built);
        }
        self.x_stack.as_ref().unwrap().as_ref().map_err(Clone::clone)
    }

    fn ps_stack(&mut self) -> std::result::Result<&ImputedStack, String> {
        if self.ps_stack.is_none() {
            let seed = Self::key(self.config, self.n, self.rep, 2);
            let built = self.data.clone().and_then(|ds| {
                impute_propensity(&ds, self.config.m, seed, ResponseWeighting::Weighted)
                    .map(|(stack, _)| stack)
                    .map_err(|e| e.to_string())
            });
            self.ps_stack = Some(built);
        }
        self.ps_stack.as_ref().unwrap().as_ref().map_err(Clone::clone)
    }

    fn run(&mut self, spec: MethodSpec) -> std::result::Result<MethodResult, String> {
        let err = |e: Error| e.to_string();
        let form = || spec.base.ipw_form().ok_or_else(|| format!("base `{}` is not an IPW form", spec.base));
        match spec.method {
            Method::WithinImps => within_imps(self.ps_stack()?, spec.base).map_err(err),
            Method::Impw => impw_estimate(self.data.as_ref().map_err(Clone::clone)?, form()?).map_err(err),
            method => {
                let (stack, fits) = self.x_stack()?;
                if method == Method::Within && spec.base == BaseEstimator::OutcomeRegression {
                    return crate::combiners::within(stack, spec.base).map_err(err);
                }
                let fits = fits.as_ref().ok_or("propensity fits were not built")?.as_ref().map_err(Clone::clone)?;
                match method {
                    Method::Within => within_with(stack, fits, spec.base),
                    Method::Aps => across_aps_with(stack, fits, spec.base),
                    Method::Apm => across_apm_with(stack, fits),
                    _ => across_apw_with(stack, fits, form()?),
                }
                .map_err(err)
            }
        }
    }
}

fn run_cell(world: &World, config: &ExperimentConfig, n: usize, rep: usize) -> Vec<ResultRow> {
    let mut replication = Replication::new(world, config, n, rep);
    config
        .methods
        .iter()
        .map(|&spec| {
            let start = Instant::now();
            let outcome = replication.run(spec);
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            let (tau_hat, error) = match outcome {
                Ok(r) => (Some(r.tau_hat), None),
                Err(e) => (None, Some(e)),
            };
            ResultRow {
                replication: rep,
                n,
                method: spec.method,
                base: spec.base,
                imputer: imputer_label(spec.method, config.imputer).to_string(),
                tau_hat,
                elapsed_ms,
                error,
            }
        })
        .collect()
}

/// Runs every `(n, replication, method)` cell. Cells that fail are recorded
/// with their error; the run continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let world = config.validate()?;
    let workers = config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let tasks: Vec<(usize, usize)> = config
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |rep| (n, rep)))
        .collect();
    let mut rows: Vec<ResultRow> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(n, rep)| run_cell(&world, config, n, rep))
            .collect()
    });
    let order = |r: &ResultRow| config.methods.iter().position(|s| s.method == r.method && s.base == r.base);
    rows.sort_by_key(|r| (r.n, r.replication, order(r)));
    Ok(rows)
}

/// Summary statistics of one `(n, method, base, imputer)` group. The moment
/// statistics are absent when no replication succeeded; `sd` and `mc_se`
/// need two successes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub method: Method,
    pub base: BaseEstimator,
    pub imputer: String,
    pub count: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    pub bias: Option<f64>,
    pub mc_se: Option<f64>,
    pub sd: Option<f64>,
    pub rmse: Option<f64>,
}

/// Estimates and failure count of one (n, method, base, imputer) cell.
type CellTally<'a> = BTreeMap<(usize, Method, BaseEstimator, &'a str), (Vec<f64>, usize)>;

pub fn summarize(results: &[ResultRow], truth: f64) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(Error::Size("no results to summarize".into()));
    }
    let mut groups = CellTally::new();
    for r in results {
        let entry = groups.entry((r.n, r.method, r.base, r.imputer.as_str())).or_default();
        match r.tau_hat {
            Some(t) => entry.0.push(t),
            None => entry.1 += 1,
        }
    }
    Ok(groups
        .into_iter()
        .map(|((n, method, base, imputer), (taus, failures))| {
            let count = taus.len();
            let c = count as f64;
            let mean = (count > 0).then(|| taus.iter().sum::<f64>() / c);
            let sd = mean
                .filter(|_| count > 1)
                .map(|m| (taus.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (c - 1.0)).sqrt());
            SummaryRow {
                n,
                method,
                base,
                imputer: imputer.to_string(),
                count,
                failures,
                mean,
                bias: mean.map(|m| m - truth),
                mc_se: sd.map(|s| s / c.sqrt()),
                sd,
                rmse: mean.map(|_| (taus.iter().map(|t| (t - truth).powi(2)).sum::<f64>() / c).sqrt()),
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `replication,n,method,base,imputer,tau_hat,error`; timings are kept out
/// so that reruns produce identical files.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["replication", "n", "method", "base", "imputer", "tau_hat", "error"])?;
    for r in rows {
        out.write_record([
            r.replication.to_string(),
            r.n.to_string(),
            r.method.to_string(),
            r.base.to_string(),
            r.imputer.clone(),
            opt(r.tau_hat),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_timing_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["replication", "n", "method", "base", "elapsed_ms"])?;
    for r in rows {
        out.write_record([
            r.replication.to_string(),
            r.n.to_string(),
            r.method.to_string(),
            r.base.to_string(),
            format!("{:.3}", r.elapsed_ms),
        ])?;
    }
    out.flush()?;
    Ok(())
}

const SUMMARY_HEADER: [&str; 11] = [
    "n", "method", "base", "imputer", "count", "failures", "mean", "bias", "mc_se", "sd", "rmse",
];

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([
            r.n.to_string(),
            r.method.to_string(),
            r.base.to_string(),
            r.imputer.clone(),
            r.count.to_string(),
            r.failures.to_string(),
            opt(r.mean),
            opt(r.bias),
            opt(r.mc_se),
            opt(r.sd),
            opt(r.rmse),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Left-aligned text table.
pub fn format_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut text = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(text, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    text
}

fn fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.method.to_string(),
                r.base.to_string(),
                r.imputer.clone(),
                r.count.to_string(),
                r.failures.to_string(),
                fixed(r.mean),
                fixed(r.bias),
                fixed(r.mc_se),
                fixed(r.sd),
                fixed(r.rmse),
            ]
        })
        .collect();
    format_table(&SUMMARY_HEADER, &body)
}

/// Exact probability limits of every pooled method, plus the within method.
pub fn plim_reports(world: &World) -> Result<Vec<PlimReport>> {
    let World::Discrete(params) = world else {
        return Err(Error::Config("exact limits need a discrete world".into()));
    };
    let table = build_joint(params)?;
    let tau = g_formula(&table)?;
    let within = plim_within(&table)?;
    Ok(vec![
        PlimReport {
            method: "within".into(),
            plim: within,
            plim_ht: within,
            tau,
            bias: within - tau,
            weight_mass: [1.0, 1.0],
            cells: Vec::new(),
        },
        plim_aps(&table)?,
        plim_apm(&table)?,
        plim_apw(&table)?,
        plim_impw(&table)?,
    ])
}

pub fn format_plim(reports: &[PlimReport]) -> String {
    let body: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                format!("{:.10}", r.plim),
                format!("{:.10}", r.plim_ht),
                format!("{:.10}", r.tau),
                format!("{:+.3e}", r.bias),
            ]
        })
        .collect();
    format_table(&["method", "plim", "plim_ht", "tau", "bias"], &body)
}

pub fn write_plim_csv<W: Write>(reports: &[PlimReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "plim", "plim_ht", "tau", "bias"])?;
    for r in reports {
        out.write_record([
            r.method.clone(),
            r.plim.to_string(),
            r.plim_ht.to_string(),
            r.tau.to_string(),
            r.bias.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppendixReport {
    pub a: AppendixAReport,
    pub b: AppendixBReport,
}

pub fn appendix_report(world: &World) -> Result<AppendixReport> {
    let World::Discrete(params) = world else {
        return Err(Error::Config("appendix checks need a discrete world".into()));
    };
    Ok(AppendixReport {
        a: check_appendix_a(params)?,
        b: check_appendix_b(params)?,
    })
}

pub fn appendix_rows(report: &AppendixReport) -> Vec<(&'static str, f64)> {
    vec![
        ("max_red_gap", report.a.max_red_gap),
        ("max_blue_gap", report.a.max_blue_gap),
        ("max_joint_gap", report.b.max_joint_gap),
        ("naive_gap", report.b.naive_gap),
    ]
}
