//! Deterministic replication engine for operating characteristics: type I
//! error, power, CI coverage and width.
//!
//! Replicate `r` of a scenario draws its data from
//! `RandomStream::new(seed).substream(r).substream(0)` and its pivotal draws
//! from `...substream(r).substream(1).substream(k)`, so every number depends
//! only on `(seed, r, k)` and never on the worker count.

mod config;
mod table;

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{summarize, GroupedSample, Hypothesis, LmmParams, Method, SummaryStats};
use crate::error::{Error, Result};
use crate::gt::{map_indexed, GtConfig, PivotalSample, PlainSample};
use crate::rng::RandomStream;
use crate::special::chisq;
use crate::ztest::{z_score_test_with, z_wald_test, NullVariance};

pub use config::{load_config, parse_config};
pub use table::format_tables;

/// Group sizes of a design.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MSpec {
    Constant(usize),
    List(Vec<usize>),
}

impl MSpec {
    pub fn sizes(&self, n: usize) -> Vec<usize> {
        match self {
            MSpec::Constant(m) => vec![*m; n],
            MSpec::List(list) => list.clone(),
        }
    }
}

/// Position of a balanced-design scenario in the variance-fraction ×
/// variance-ratio grid, used only for table layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalancedCell {
    /// `(σ_w² + σ_b²)/ρ²`.
    pub var_frac: f64,
    /// `σ_w²/σ_b²`.
    pub ratio: f64,
}

impl BalancedCell {
    /// `σ_b² = fρ²/(1+r)`, `σ_w² = r σ_b²`, `μ = √((1−f)ρ²)`.
    pub fn params(&self, rho: f64) -> Result<LmmParams> {
        let total = self.var_frac * rho * rho;
        let sigma_b2 = total / (1.0 + self.ratio);
        LmmParams::new((rho * rho - total).max(0.0).sqrt(), self.ratio * sigma_b2, sigma_b2)
    }

    pub fn ratio_label(&self) -> String {
        if self.ratio < 1.0 {
            format!("1:{}", trim_float(1.0 / self.ratio))
        } else {
            format!("{}:1", trim_float(self.ratio))
        }
    }
}

fn trim_float(v: f64) -> String {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        format!("{r}")
    } else {
        format!("{v:.3}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub id: String,
    /// Tables group scenarios by this label.
    pub table: String,
    pub n: usize,
    pub m: MSpec,
    /// Generating truth.
    pub params: LmmParams,
    pub hyp: Hypothesis,
    pub nsim: usize,
    pub b: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub null_variance: NullVariance,
    pub cell: Option<BalancedCell>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.n < 2 {
            errors.push(format!("{}: n must be at least 2", self.id));
        }
        let sizes = self.m.sizes(self.n);
        if sizes.len() != self.n {
            errors.push(format!("{}: m_list has {} entries for n = {}", self.id, sizes.len(), self.n));
        }
        if sizes.contains(&0) {
            errors.push(format!("{}: group sizes must be positive", self.id));
        }
        if sizes.iter().all(|&m| m <= 1) {
            errors.push(format!("{}: at least one group needs m >= 2", self.id));
        }
        if self.nsim == 0 {
            errors.push(format!("{}: nsim must be at least 1", self.id));
        }
        if self.methods.iter().any(|m| m.is_generalized()) && self.b < 100 {
            errors.push(format!("{}: B must be at least 100", self.id));
        }
        if self.methods.is_empty() {
            errors.push(format!("{}: no methods requested", self.id));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// True `ρ` of the generating parameters.
    pub fn rho(&self) -> f64 {
        self.params.rms()
    }
}

/// One dataset from the sufficient-statistic laws
/// `ȳ_i ~ N(μ, σ_b² + σ_w²/m_i)` and `sse ~ σ_w² χ²_{N−n}`.
pub fn generate_summary<R: Rng + ?Sized>(m: &[usize], params: &LmmParams, rng: &mut R) -> Result<SummaryStats> {
    let ybar = m
        .iter()
        .map(|&mi| {
            let sd = (params.sigma_b2 + params.sigma_w2 / mi as f64).sqrt();
            let z: f64 = StandardNormal.sample(rng);
            params.mu + sd * z
        })
        .collect();
    let df = m.iter().sum::<usize>() - m.len();
    let sse = params.sigma_w2 * chisq(df as f64)?.sample(rng);
    SummaryStats::new(m.to_vec(), ybar, sse)
}

/// One raw dataset `y_ij = μ + u_i + ε_ij`.
pub fn generate_raw<R: Rng + ?Sized>(m: &[usize], params: &LmmParams, rng: &mut R) -> Result<GroupedSample> {
    let within = Normal::new(0.0, params.sigma_w2.sqrt()).map_err(|e| Error::domain(e.to_string()))?;
    let between = Normal::new(0.0, params.sigma_b2.sqrt()).map_err(|e| Error::domain(e.to_string()))?;
    let groups = m
        .iter()
        .enumerate()
        .map(|(i, &mi)| {
            let u = between.sample(rng);
            let values = (0..mi).map(|_| params.mu + u + within.sample(rng)).collect();
            (format!("s{}", i + 1), values)
        })
        .collect();
    GroupedSample::new(groups)
}

/// Raw generator followed by [`summarize`].
pub fn generate_dataset_raw<R: Rng + ?Sized>(m: &[usize], params: &LmmParams, rng: &mut R) -> Result<SummaryStats> {
    summarize(&generate_raw(m, params, rng)?)
}

/// Outcome of one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub scenario: String,
    pub replicate: usize,
    pub method: Method,
    pub p: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub reject: bool,
    pub cover: bool,
    /// Set when the method failed on this replicate.
    pub error: Option<String>,
}

impl ReplicateRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub completed: usize,
    pub failures: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// `√(p̂(1−p̂)/nsim)`.
    pub rejection_se: f64,
    pub coverage: f64,
    pub avg_ci_width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub methods: Vec<MethodSummary>,
    pub runtime_secs: f64,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

impl ScenarioResult {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Rejection rate of `method` at another level, from the stored p-values.
    pub fn rejection_rate_at(&self, method: Method, alpha: f64) -> Option<f64> {
        let ps: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.p)
            .collect();
        (!ps.is_empty()).then(|| ps.iter().filter(|&&p| p < alpha).count() as f64 / ps.len() as f64)
    }
}

/// Execution knobs that do not change a scenario's identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads (`None`: the ambient rayon pool).
    pub parallelism: Option<usize>,
    /// Override `nsim` and `B` with 10⁴ each.
    pub full_scale: bool,
}

pub const FULL_SCALE: usize = 10_000;

/// Share of failed replicates above which a scenario is an error.
const MAX_FAILURE_RATE: f64 = 0.01;

fn run_method(
    sc: &Scenario,
    method: Method,
    data: &SummaryStats,
    gt_root: RandomStream,
) -> Result<(f64, (f64, f64))> {
    let cfg = GtConfig {
        b: sc.b,
        seed: sc.seed,
        ..GtConfig::default()
    };
    match method {
        Method::Gt => {
            let sample = PivotalSample::generate_from(data, gt_root, &cfg)?;
            Ok((sample.pvalue(sc.hyp.rho0).value(), sample.ci(sc.hyp.alpha)?))
        }
        Method::GtPlain => {
            let sample = PlainSample::generate_from(data, gt_root, &cfg)?;
            Ok((sample.pvalue(sc.hyp.rho0).value(), sample.ci(sc.hyp.alpha)?))
        }
        Method::ZScore => {
            let res = z_score_test_with(data, &sc.hyp, sc.null_variance)?;
            Ok((res.p_value.value(), res.ci_rho))
        }
        Method::ZWald => {
            let res = z_wald_test(data, &sc.hyp)?;
            Ok((res.p_value.value(), res.ci_rho))
        }
    }
}

fn run_replicate(sc: &Scenario, sizes: &[usize], r: usize) -> Vec<ReplicateRecord> {
    let stream = RandomStream::new(sc.seed).substream(r as u64);
    let data = generate_summary(sizes, &sc.params, &mut stream.substream(0).rng());
    let rho = sc.rho();
    sc.methods
        .iter()
        .map(|&method| {
            let outcome = data
                .as_ref()
                .map_err(|e| Error::Numerical(e.to_string()))
                .and_then(|d| run_method(sc, method, d, stream.substream(1)));
            match outcome {
                Ok((p, (lo, hi))) => ReplicateRecord {
                    scenario: sc.id.clone(),
                    replicate: r,
                    method,
                    p: Some(p),
                    ci_lo: Some(lo),
                    ci_hi: Some(hi),
                    reject: p < sc.hyp.alpha,
                    cover: lo <= rho && rho <= hi,
                    error: None,
                },
                Err(e) => ReplicateRecord {
                    scenario: sc.id.clone(),
                    replicate: r,
                    method,
                    p: None,
                    ci_lo: None,
                    ci_hi: None,
                    reject: false,
                    cover: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Aggregates per-replicate records of one method (records in replicate order).
pub fn summarize_records(method: Method, records: &[ReplicateRecord]) -> MethodSummary {
    let mine: Vec<&ReplicateRecord> = records.iter().filter(|r| r.method == method).collect();
    let ok: Vec<&&ReplicateRecord> = mine.iter().filter(|r| !r.failed()).collect();
    let completed = ok.len();
    let rejections = ok.iter().filter(|r| r.reject).count();
    let covered = ok.iter().filter(|r| r.cover).count();
    let width: f64 = ok
        .iter()
        .map(|r| r.ci_hi.unwrap_or(0.0) - r.ci_lo.unwrap_or(0.0))
        .sum();
    let denom = completed.max(1) as f64;
    let rate = rejections as f64 / denom;
    MethodSummary {
        method,
        completed,
        failures: mine.len() - completed,
        rejections,
        rejection_rate: rate,
        rejection_se: (rate * (1.0 - rate) / denom).sqrt(),
        coverage: covered as f64 / denom,
        avg_ci_width: width / denom,
    }
}

/// Runs every replicate of one scenario.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<ScenarioResult> {
    let sc = effective(sc, opts);
    sc.validate()?;
    let start = Instant::now();
    let sizes = sc.m.sizes(sc.n);
    let per_rep = map_indexed(sc.nsim, opts.parallelism, |r| Ok(run_replicate(&sc, &sizes, r as usize)))?;
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let methods: Vec<MethodSummary> = sc.methods.iter().map(|&m| summarize_records(m, &records)).collect();
    for summary in &methods {
        if summary.failures as f64 > MAX_FAILURE_RATE * sc.nsim as f64 {
            let example = records
                .iter()
                .find(|r| r.method == summary.method && r.failed())
                .and_then(|r| r.error.clone())
                .unwrap_or_default();
            return Err(Error::Numerical(format!(
                "scenario {}: {} failed on {} of {} replicates (e.g. {example})",
                sc.id, summary.method, summary.failures, sc.nsim
            )));
        }
    }
    Ok(ScenarioResult {
        scenario: sc,
        methods,
        runtime_secs: start.elapsed().as_secs_f64(),
        records,
    })
}

fn effective(sc: &Scenario, opts: &RunOptions) -> Scenario {
    let mut sc = sc.clone();
    if opts.full_scale {
        sc.nsim = FULL_SCALE;
        sc.b = FULL_SCALE;
    }
    sc
}

/// Runs a list of scenarios; results come back in input order.
pub fn run_grid(scenarios: &[Scenario], opts: &RunOptions) -> Result<Vec<ScenarioResult>> {
    let mut errors = Vec::new();
    for sc in scenarios {
        if let Err(Error::Config(mut e)) = effective(sc, opts).validate() {
            errors.append(&mut e);
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let inner = RunOptions {
        parallelism: None,
        ..*opts
    };
    let run = || {
        scenarios
            .par_iter()
            .map(|sc| run_scenario(sc, &inner))
            .collect::<Result<Vec<_>>>()
    };
    match opts.parallelism {
        None => run(),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(run),
    }
}

/// Writes every replicate record as one JSON object per line.
pub fn write_replicate_log<W: Write>(results: &[ScenarioResult], mut out: W) -> Result<()> {
    for res in results {
        for rec in &res.records {
            serde_json::to_writer(&mut out, rec).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads records written by [`write_replicate_log`].
pub fn read_replicate_log<R: std::io::BufRead>(input: R) -> Result<Vec<ReplicateRecord>> {
    #[derive(serde::Deserialize)]
    struct Line {
        scenario: String,
        replicate: usize,
        method: Method,
        p: Option<f64>,
        ci_lo: Option<f64>,
        ci_hi: Option<f64>,
        reject: bool,
        cover: bool,
        error: Option<String>,
    }
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(ReplicateRecord {
            scenario: l.scenario,
            replicate: l.replicate,
            method: l.method,
            p: l.p,
            ci_lo: l.ci_lo,
            ci_hi: l.ci_hi,
            reject: l.reject,
            cover: l.cover,
            error: l.error,
        });
    }
    Ok(out)
}
