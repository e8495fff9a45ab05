use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use baxter_core::experiment::write_report;
use baxter_core::filter::hhat_finite;
use baxter_core::{
    ar_inf_coeffs, autocovariance, estimate_constants, evaluate, hhat_infinite, infinite_predictor_coeffs,
    ma_inf_coeffs, parse_grid, finite_predictor_coeffs, shift_filter, ExperimentConfig, FilterSpec, ProcessSpec,
    RateReport, SeriesExpansion, Stages,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "baxter", version, about = "Finite-sample Wiener filters and uniform Baxter inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// MA(∞), AR(∞) and autocovariance coefficients as CSV.
    Coeffs {
        #[arg(long)]
        process: PathBuf,
        /// Number of coefficients.
        #[arg(long, default_value_t = 32)]
        len: usize,
    },
    /// Infinite- and finite-past m-step predictor coefficients as CSV.
    Predict {
        #[arg(long)]
        process: PathBuf,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Method::Levinson)]
        method: Method,
    },
    /// Filter taps, or with a process the optimal causal coefficients for n observations.
    Filter {
        #[arg(long)]
        filter: PathBuf,
        #[arg(long)]
        process: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Inequality constants as JSON.
    Constants {
        #[arg(long)]
        process: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.05)]
        r: f64,
        /// Range over which the K constants are maximised.
        #[arg(long, default_value_t = 10_000)]
        probe_len: usize,
    },
    /// Uniform Baxter check over the (n, m) grid.
    Baxter(GridArgs),
    /// Convergence-rate fits of the L1 and MSPE diagnostics.
    Rates(GridArgs),
    /// L1 distance, MSPEs and their bounds as CSV.
    Mspe(GridArgs),
    /// Full pipeline; writes report.csv, baxter.csv and summary.json.
    Run(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Levinson,
    Series,
}

#[derive(Args)]
struct GridArgs {
    /// Experiment config JSON; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    process: Option<PathBuf>,
    #[arg(long)]
    filter: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `A:B:xS`, `A:B:+S` or a comma list.
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    m_grid: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Tolerance override `NAME=VALUE`; repeatable.
    #[arg(long = "tol", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
}

fn parse_tol(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("{name}: {e}"))?;
    Ok((name.trim().to_string(), v))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_process(path: &Path) -> Result<ProcessSpec> {
    ProcessSpec::from_json(&read(path)?).with_context(|| format!("process {}", path.display()))
}

fn load_filter(path: &Path) -> Result<FilterSpec> {
    FilterSpec::from_json(&read(path)?).with_context(|| format!("filter {}", path.display()))
}

impl GridArgs {
    fn config(&self, default_filter: Option<FilterSpec>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_str::<ExperimentConfig>(&read(path)?)
                .with_context(|| format!("config {}", path.display()))?,
            None => {
                let process = match &self.process {
                    Some(p) => load_process(p)?,
                    None => bail!("--process or --config is required"),
                };
                let filter = match (&self.filter, default_filter) {
                    (Some(f), _) => load_filter(f)?,
                    (None, Some(f)) => f,
                    (None, None) => bail!("--filter or --config is required"),
                };
                ExperimentConfig::new(process, filter)
            }
        };
        if self.config.is_some() {
            if let Some(p) = &self.process {
                cfg.process = load_process(p)?;
            }
            if let Some(f) = &self.filter {
                cfg.filter = load_filter(f)?;
            }
        }
        if let Some(g) = &self.n_grid {
            cfg.n_grid = parse_grid(g)?;
        }
        if let Some(g) = &self.m_grid {
            cfg.m_grid = parse_grid(g)?;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(r) = self.r {
            cfg.r = r;
        }
        let overrides: BTreeMap<String, f64> = self.tol.iter().cloned().collect();
        cfg.tolerances.extend(overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Write to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn coeffs(process: &Path, len: usize) -> Result<String> {
    let spec = load_process(process)?;
    let psi = ma_inf_coeffs(&spec, len)?;
    let phi = ar_inf_coeffs(&spec, len)?;
    let gamma = autocovariance(&spec, len.saturating_sub(1), len)?;
    let mut out = String::from("j,psi,phi,gamma\n");
    for j in 0..len {
        writeln!(out, "{j},{},{},{}", psi.get(j), phi.get(j), gamma.gamma[j])?;
    }
    Ok(out)
}

fn predict(process: &Path, m: usize, n: usize, method: Method) -> Result<String> {
    let spec = load_process(process)?;
    let psi = ma_inf_coeffs(&spec, m + 2)?;
    let phi = ar_inf_coeffs(&spec, n + m + 2)?;
    let inf = infinite_predictor_coeffs(&psi, &phi, m, n)?.coeffs;
    let fin = match method {
        Method::Levinson => {
            let gamma = autocovariance(&spec, n + m, n + m)?;
            finite_predictor_coeffs(&gamma, m, n)?.coeffs
        }
        Method::Series => {
            let exp = SeriesExpansion::new(&spec, baxter_core::lm_expansion::DEFAULT_EXACT_NODES)?;
            exp.predictors(n, m, 400, 1e-12)?.coeffs.swap_remove(m - 1)
        }
    };
    let mut out = String::from("k,phi_inf,phi_fin,abs_diff\n");
    for (k, (a, b)) in inf.iter().zip(&fin).enumerate() {
        writeln!(out, "{},{a},{b},{}", k + 1, (a - b).abs())?;
    }
    Ok(out)
}

fn filter(filter: &Path, process: Option<&Path>, n: usize) -> Result<String> {
    let f = load_filter(filter)?;
    let mut out = String::new();
    let Some(process) = process else {
        out.push_str("k,h\n");
        for k in f.lo()..=f.hi() {
            writeln!(out, "{k},{}", f.tap(k))?;
        }
        return Ok(out);
    };
    let spec = load_process(process)?;
    let memory = spec.memory();
    f.check_compatible(&memory)?;
    let future = (-f.lo()).max(0) as usize;
    let span = (f.hi() - f.lo()) as usize;
    let psi = ma_inf_coeffs(&spec, future + 2)?;
    let phi = ar_inf_coeffs(&spec, n + future + 2)?;
    let lag = (n + future).max(span) + 1;
    let gamma = autocovariance(&spec, lag, lag)?;
    let hinf = hhat_infinite(&f, &memory, &psi, &phi, n)?;
    let hfin = hhat_finite(&f, &memory, &gamma, n)?;
    out.push_str("k,h,hhat_inf,hhat_fin\n");
    for k in 1..=n {
        writeln!(out, "{k},{},{},{}", f.tap(k as i64 - 1), hinf.values[k - 1], hfin[k - 1])?;
    }
    Ok(out)
}

fn mspe_csv(report: &RateReport) -> Result<String> {
    let mut out = String::from("n,l1_diff,sigma_tilde,sigma,bound1,bound2,rho_n\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            opt(r.l1_diff),
            opt(r.sigma_tilde),
            opt(r.sigma),
            opt(r.bound1),
            opt(r.bound2),
            opt(r.rho_n)
        )?;
    }
    Ok(out)
}

fn baxter_csv(report: &RateReport) -> Result<String> {
    let mut out = String::from("n,m,lhs,rhs,constant,margin,tail_lhs,tail_rhs,tail_margin,status\n");
    for c in &report.baxter {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.n,
            c.m,
            c.lhs,
            c.rhs,
            c.constant,
            c.margin,
            opt(c.tail_lhs),
            opt(c.tail_rhs),
            opt(c.tail_margin),
            c.status
        )?;
    }
    Ok(out)
}

/// Print stage errors and failed verdicts; true when every verdict passed.
fn verdict(report: &RateReport) -> bool {
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    let failed: Vec<&str> = report
        .pass
        .iter()
        .filter(|(k, v)| !**v && k.as_str() != "all")
        .map(|(k, _)| k.as_str())
        .collect();
    if failed.is_empty() {
        eprintln!("all checks passed");
        true
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        false
    }
}

fn grid(args: &GridArgs, stages: Stages, default_filter: Option<FilterSpec>) -> Result<(ExperimentConfig, RateReport)> {
    let cfg = args.config(default_filter)?;
    let report = evaluate(&cfg, stages)?;
    if let Some(out) = &args.out {
        write_report(&report, &cfg, out)?;
    }
    Ok((cfg, report))
}

fn run(cli: Cli) -> Result<bool> {
    let only = |diagnostics, baxter| Stages {
        diagnostics,
        baxter,
        cross_method: false,
    };
    match cli.command {
        Command::Coeffs { process, len } => emit(&coeffs(&process, len)?)?,
        Command::Predict { process, m, n, method } => emit(&predict(&process, m, n, method)?)?,
        Command::Filter { filter: f, process, n } => emit(&filter(&f, process.as_deref(), n)?)?,
        Command::Constants {
            process,
            epsilon,
            r,
            probe_len,
        } => {
            let c = estimate_constants(&load_process(&process)?, epsilon, r, probe_len)?;
            emit(&(serde_json::to_string_pretty(&c)? + "\n"))?;
        }
        Command::Baxter(args) => {
            // The check does not involve the filter.
            let (_, report) = grid(&args, only(false, true), Some(shift_filter(1)))?;
            emit(&baxter_csv(&report)?)?;
            return Ok(verdict(&report));
        }
        Command::Rates(args) => {
            let (_, report) = grid(&args, only(true, false), None)?;
            emit(&(serde_json::to_string_pretty(&report.fits)? + "\n"))?;
            return Ok(verdict(&report));
        }
        Command::Mspe(args) => {
            let (_, report) = grid(&args, only(true, false), None)?;
            emit(&mspe_csv(&report)?)?;
            return Ok(verdict(&report));
        }
        Command::Run(args) => {
            if args.out.is_none() {
                bail!("run needs --out");
            }
            let (_, report) = grid(&args, Stages::all(), None)?;
            return Ok(verdict(&report));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
