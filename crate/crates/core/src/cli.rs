//! The `rmsgt` command line.
//!
//! Every command first prints a `#`-prefixed header with the fully resolved
//! options and a `replay:` line that reproduces the run.
//!
//! Exit status: 0 success (whatever the test decides), 2 usage or parse
//! error, 3 unusable data, 4 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::data::{Hypothesis, Method, SummaryStats, TestResult};
use crate::error::{Error, Result};
use crate::estimation::{fit, Likelihood};
use crate::gt::{gt_pvalue, gt_pvalue_plain, GtConfig};
use crate::io::{inputs_digest, write_summary_csv, InputFormat, InputSpec, RunRecord, VERSION};
use crate::sim::{format_tables, load_config, run_grid, write_replicate_log, RunOptions};
use crate::ztest::{z_score_test_with, z_wald_test, NullVariance};

#[derive(Debug, Parser)]
#[command(name = "rmsgt", version, about = "Equivalence tests on the root mean square of paired differences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test H0: rho >= rho0 and report a CI for rho.
    Test(TestArgs),
    /// Maximum (or restricted) likelihood estimates.
    Estimate(EstimateArgs),
    /// Run a scenario file and print operating-characteristic tables.
    Simulate(SimulateArgs),
    /// Convert long CSV into summary CSV plus sse.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Data file.
    #[arg(long, short)]
    pub input: PathBuf,
    /// long-csv (subject,value) or summary-csv (m,mean).
    #[arg(long, default_value = "long-csv")]
    pub format: InputFormat,
    /// Within-subject sum of squares; required with summary-csv.
    #[arg(long)]
    pub sse: Option<f64>,
}

impl InputArgs {
    fn spec(&self) -> InputSpec {
        InputSpec {
            format: self.format,
            path: self.input.clone(),
            sse: self.sse,
        }
    }

    fn replay(&self) -> String {
        let mut s = format!("--input {} --format {}", self.input.display(), self.format);
        if let Some(sse) = self.sse {
            let _ = write!(s, " --sse {sse}");
        }
        s
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Equivalence margin for rho.
    #[arg(long)]
    pub rho0: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// gt | gt-plain | zscore | zwald
    #[arg(long, default_value = "gt")]
    pub method: Method,
    /// Monte Carlo size for the generalized methods.
    #[arg(long = "B", short = 'B', default_value_t = 10_000)]
    pub b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Null variance for the score test: reml | ml | scaled.
    #[arg(long, default_value = "reml")]
    pub null_variance: NullVariance,
    /// Worker threads (default: all cores).
    #[arg(long, env = "RMSGT_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Also print the run as one JSON line.
    #[arg(long)]
    pub json: bool,
    /// Append the JSON line to this file.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Restricted likelihood instead of ML.
    #[arg(long)]
    pub reml: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML scenario file.
    pub config: PathBuf,
    #[arg(long, env = "RMSGT_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Directory for tables.txt, results.json and replicates.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// nsim = B = 10000 for every scenario.
    #[arg(long)]
    pub full_scale: bool,
    /// Validate and print the resolved scenarios without running them.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Long CSV file.
    #[arg(long, short)]
    pub input: PathBuf,
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = if e.use_stderr() { e.render().to_string() } else { e.to_string() };
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Test(a) => cmd_test(a, out),
        Command::Estimate(a) => cmd_estimate(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Summarize(a) => cmd_summarize(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn emit_record(rec: &RunRecord, json: bool, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<()> {
    let line = rec.to_line();
    if json {
        writeln!(out, "{line}")?;
    }
    if let Some(p) = path {
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn data_header(out: &mut dyn Write, input: &InputArgs, data: &SummaryStats) -> Result<()> {
    writeln!(
        out,
        "# input: {} ({}), n = {}, N = {}, sse = {}",
        input.input.display(),
        input.format,
        data.n(),
        data.total(),
        data.sse()
    )?;
    writeln!(out, "# inputs sha256: {}", inputs_digest(data))?;
    Ok(())
}

pub fn cmd_test(a: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let hyp = Hypothesis::new(a.rho0, a.alpha)?;
    let cfg = GtConfig {
        b: a.b,
        seed: a.seed,
        parallelism: a.parallelism,
        ..GtConfig::default()
    };
    if a.method.is_generalized() {
        cfg.validate()?;
    }
    let data = a.input.spec().load()?;
    let parallelism = a.parallelism.map_or("auto".to_string(), |k| k.to_string());
    writeln!(out, "# rmsgt {VERSION} test")?;
    data_header(out, &a.input, &data)?;
    writeln!(
        out,
        "# method = {}, rho0 = {}, alpha = {}, B = {}, seed = {}, null-variance = {}, parallelism = {parallelism}",
        a.method, a.rho0, a.alpha, a.b, a.seed, a.null_variance
    )?;
    writeln!(
        out,
        "# replay: rmsgt test {} --rho0 {} --alpha {} --method {} --B {} --seed {} --null-variance {}",
        a.input.replay(),
        a.rho0,
        a.alpha,
        a.method,
        a.b,
        a.seed,
        a.null_variance
    )?;
    let res = run_test(&data, &hyp, a.method, &cfg, a.null_variance)?;
    write!(out, "{}", render_result(&res, a.alpha))?;
    let nv = (a.method == Method::ZScore).then(|| a.null_variance.to_string());
    emit_record(&RunRecord::for_test(&data, &res, a.rho0, a.alpha, nv), a.json, a.record.as_ref(), out)
}

/// Dispatches to the selected method.
pub fn run_test(data: &SummaryStats, hyp: &Hypothesis, method: Method, cfg: &GtConfig, nv: NullVariance) -> Result<TestResult> {
    match method {
        Method::Gt => gt_pvalue(data, hyp, cfg),
        Method::GtPlain => gt_pvalue_plain(data, hyp, cfg),
        Method::ZScore => z_score_test_with(data, hyp, nv),
        Method::ZWald => z_wald_test(data, hyp),
    }
}

/// Human-readable block: p-value to 4 decimals, CI endpoints to 3.
pub fn render_result(res: &TestResult, alpha: f64) -> String {
    let level = 100.0 * (1.0 - alpha);
    let e = &res.estimates;
    let mut s = String::new();
    let _ = writeln!(s, "method      {}", res.method);
    let _ = writeln!(s, "p-value     {:.4}", res.p_value.value());
    let _ = writeln!(s, "CI rho      [{:.3}, {:.3}]  ({level}%)", res.ci_rho.0, res.ci_rho.1);
    if let Some((lo, hi)) = res.ci_rho2 {
        let _ = writeln!(s, "CI rho^2    [{lo:.3}, {hi:.3}]  ({level}%)");
    }
    let _ = writeln!(
        s,
        "estimates   mu = {:.4}, sigma_w = {:.4}, sigma_b = {:.4}, rho = {:.4}",
        e.mu,
        e.sigma_w2.sqrt(),
        e.sigma_b2.sqrt(),
        e.rms()
    );
    if let Some(b) = res.b {
        let _ = writeln!(s, "B           {b}");
    }
    if let Some(seed) = res.seed {
        let _ = writeln!(s, "seed        {seed}");
    }
    s
}

pub fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write) -> Result<()> {
    let data = a.input.spec().load()?;
    let lik = if a.reml { Likelihood::Reml } else { Likelihood::Ml };
    writeln!(out, "# rmsgt {VERSION} estimate")?;
    data_header(out, &a.input, &data)?;
    writeln!(out, "# likelihood = {}", if a.reml { "reml" } else { "ml" })?;
    writeln!(
        out,
        "# replay: rmsgt estimate {}{}",
        a.input.replay(),
        if a.reml { " --reml" } else { "" }
    )?;
    let rep = fit(&data, lik)?;
    let p = rep.params;
    writeln!(out, "mu          {:.4}", p.mu)?;
    writeln!(out, "sigma_w     {:.4}", p.sigma_w2.sqrt())?;
    writeln!(out, "sigma_b     {:.4}", p.sigma_b2.sqrt())?;
    writeln!(out, "rho         {:.4}", p.rms())?;
    let label = if a.reml { "-2 log RL" } else { "-2 log L" };
    writeln!(out, "{label:<12}{:.4}", rep.neg2loglik)?;
    writeln!(out, "boundary    {}", if rep.boundary_sigma_b2 { "sigma_b = 0" } else { "no" })?;
    emit_record(&RunRecord::for_estimate(&data, p), a.json, a.record.as_ref(), out)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    if a.parallelism == Some(0) {
        return Err(Error::domain("parallelism must be at least 1"));
    }
    let scenarios = load_config(&a.config)?;
    let opts = RunOptions {
        parallelism: a.parallelism,
        full_scale: a.full_scale,
    };
    writeln!(out, "# rmsgt {VERSION} simulate {}", a.config.display())?;
    writeln!(
        out,
        "# parallelism = {}, full-scale = {}",
        a.parallelism.map_or("auto".to_string(), |k| k.to_string()),
        a.full_scale
    )?;
    for sc in &scenarios {
        let (nsim, b) = if a.full_scale { (crate::sim::FULL_SCALE, crate::sim::FULL_SCALE) } else { (sc.nsim, sc.b) };
        writeln!(
            out,
            "# scenario {}: n = {}, m = {:?}, mu = {}, sigma_w2 = {}, sigma_b2 = {}, rho0 = {}, alpha = {}, nsim = {nsim}, B = {b}, seed = {}, methods = {:?}, null-variance = {}",
            sc.id,
            sc.n,
            sc.m,
            sc.params.mu,
            sc.params.sigma_w2,
            sc.params.sigma_b2,
            sc.hyp.rho0,
            sc.hyp.alpha,
            sc.seed,
            sc.methods.iter().map(|m| m.label()).collect::<Vec<_>>(),
            sc.null_variance
        )?;
    }
    if a.dry_run {
        return Ok(());
    }
    let start = Instant::now();
    let results = run_grid(&scenarios, &opts)?;
    let tables = format_tables(&results);
    write!(out, "{tables}")?;
    writeln!(out, "total runtime {:.1} s", start.elapsed().as_secs_f64())?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        std::fs::write(dir.join("tables.txt"), &tables)?;
        let json = serde_json::to_string_pretty(&results).map_err(|e| Error::Io(e.into()))?;
        std::fs::write(dir.join("results.json"), json + "\n")?;
        let log = std::io::BufWriter::new(std::fs::File::create(dir.join("replicates.jsonl"))?);
        write_replicate_log(&results, log)?;
        writeln!(out, "wrote {}", dir.display())?;
    }
    Ok(())
}

pub fn cmd_summarize(a: &SummarizeArgs, out: &mut dyn Write) -> Result<()> {
    let spec = InputSpec {
        format: InputFormat::LongCsv,
        path: a.input.clone(),
        sse: None,
    };
    let data = spec.load()?;
    writeln!(out, "# sse = {}", data.sse())?;
    write_summary_csv(&data, out)
}
