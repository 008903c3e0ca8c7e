//! `rowsparse` command-line front end.
//!
//! Exit status: 0 on success, 2 when a check fails, 1 on usage or input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rowsparse::estimator::{estimate_pls, estimate_rowwise_report, threshold_schedule};
use rowsparse::harness::{
    emit, grid_risks, oracle_gap, rate_sweep, render, tail_check, Emit, OutputFormat, RateFormula,
    SEED_ENV,
};
use rowsparse::packing::{
    embed_pad_ones, embed_replicate, pair_checks, random_pattern, separation_requirement,
    verify_pack, vg_pack, PackFile, PackingSet,
};
use rowsparse::rates::{rate_hard, soft_rate_labelled, ProblemDims};
use rowsparse::{ExperimentConfig, GridPoint, NoiseSpec, PenaltyConfig, RealMatrix};

#[derive(Parser)]
#[command(
    name = "rowsparse",
    version,
    about = "Row-sparse matrix denoising toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo risk on worst-case signals at every grid point of a config
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Risk over a grid regressed on the hard rate in log-log scale
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Exit with status 2 unless slope is in [0.8, 1.2] and R^2 >= 0.95
        #[arg(long)]
        check: bool,
    },
    /// Verification suites
    Check {
        #[command(subcommand)]
        suite: CheckSuite,
    },
    /// Closed-form rates for one parameter point
    Rates {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Soft-sparsity exponent in (0, 2); omit for hard sparsity
        #[arg(long)]
        q: Option<f64>,
    },
    /// Penalized least-squares fit of an observed matrix
    Estimate {
        /// Observed matrix (CSV, or JSON by extension)
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// Fit each row separately
        #[arg(long)]
        rowwise: bool,
        #[arg(long)]
        output: PathBuf,
        /// Fit summary as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a Hamming-separated pattern family
    Pack {
        #[command(flatten)]
        dims: PackDims,
        #[arg(long)]
        dmin: usize,
        #[arg(long, value_enum, default_value_t = ConstructionArg::Greedy)]
        construction: ConstructionArg,
        /// Row weight of the base family for `pad`
        #[arg(long, default_value_t = 1)]
        base_s: usize,
        #[arg(long, default_value_t = 1e-5)]
        c_target: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PackDims {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    s: usize,
    /// Consecutive rejections before the greedy search stops
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum CheckSuite {
    /// Smallest constant giving 95% coverage of the oracle bound
    Oracle {
        #[arg(long, default_value_t = 8)]
        n1: usize,
        #[arg(long, default_value_t = 32)]
        n2: usize,
        #[arg(long, default_value_t = 3)]
        s: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Penalty level; defaults to 4 sigma^2
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        slack: f64,
        /// Signal entry size; defaults to the square root of the first threshold
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the per-trial record here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exceedance curve of the projected-noise statistic
    Tail {
        #[arg(long, default_value_t = 8)]
        n1: usize,
        #[arg(long, default_value_t = 16)]
        n2: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        k1: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy packing certificate plus pairwise checks
    Pack {
        #[command(flatten)]
        dims: PackDims,
        #[arg(long, default_value_t = 1e-5)]
        c_target: f64,
        #[arg(long, default_value_t = 0.3)]
        gamma: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Svg => OutputFormat::Svg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructionArg {
    Greedy,
    Replicate,
    Pad,
}

enum Status {
    Pass,
    Fail,
}

type CliResult = Result<Status, rowsparse::Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Simulate { run } => simulate(&run),
        Command::Sweep { run, check } => sweep(&run, check),
        Command::Check { suite } => match suite {
            CheckSuite::Oracle {
                n1,
                n2,
                s,
                sigma,
                lambda,
                a,
                slack,
                amplitude,
                trials,
                seed,
                out,
            } => {
                let lambda = lambda.unwrap_or(4.0 * sigma * sigma);
                check_oracle(
                    GridPoint::new(n1, n2, s),
                    sigma,
                    lambda,
                    a,
                    slack,
                    amplitude,
                    trials,
                    seed_from_env(seed)?,
                    out.as_deref(),
                )
            }
            CheckSuite::Tail {
                n1,
                n2,
                sigma,
                k1,
                trials,
                seed,
                format,
                out,
            } => {
                let noise = NoiseSpec::gaussian(sigma, seed_from_env(seed)?)?;
                let curve = tail_check(&noise, n1, n2, k1, trials)?;
                write_results(std::slice::from_ref(&curve), format.into(), out.as_deref())?;
                let pass = curve.monotone() && curve.mean_positive.is_finite();
                Ok(status(pass))
            }
            CheckSuite::Pack {
                dims,
                c_target,
                gamma,
            } => check_pack(&dims, c_target, gamma),
        },
        Command::Rates {
            n1,
            n2,
            s,
            sigma,
            p,
            q,
        } => rates(n1, n2, s, sigma, p, q),
        Command::Estimate {
            input,
            lambda,
            rowwise,
            output,
            report,
        } => estimate(&input, lambda, rowwise, &output, report.as_deref()),
        Command::Pack {
            dims,
            dmin,
            construction,
            base_s,
            c_target,
            out,
        } => {
            let pack = build_pack(&dims, dmin, construction, base_s)?;
            let file = PackFile::new(&pack, c_target);
            write_text(&out, &(serde_json::to_string_pretty(&file)? + "\n"))?;
            println!(
                "{} patterns, d_min {:?}, log|pack| {:.4}",
                pack.len(),
                pack.d_min_achieved,
                pack.log_cardinality
            );
            Ok(status(file.certificate.pass()))
        }
    }
}

fn status(pass: bool) -> Status {
    if pass {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn seed_from_env(flag: u64) -> Result<u64, rowsparse::Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| rowsparse::Error::Parse(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(flag),
    }
}

fn load_config(run: &RunArgs) -> Result<ExperimentConfig, rowsparse::Error> {
    let text = std::fs::read_to_string(&run.config).map_err(|e| rowsparse::Error::Io {
        path: run.config.clone(),
        source: e,
    })?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    cfg.apply_seed_env()?;
    if run.threads.is_some() {
        cfg.threads = run.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_text(path: &Path, text: &str) -> Result<(), rowsparse::Error> {
    std::fs::write(path, text).map_err(|e| rowsparse::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_results<T: Emit>(
    results: &[T],
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<(), rowsparse::Error> {
    match out {
        Some(path) => emit(results, format, path),
        None => {
            print!("{}", render(results, format)?);
            Ok(())
        }
    }
}

fn simulate(run: &RunArgs) -> CliResult {
    let cfg = load_config(run)?;
    let reports = grid_risks(&cfg)?;
    write_results(&reports, run.format.into(), run.out.as_deref())?;
    Ok(Status::Pass)
}

fn sweep(run: &RunArgs, check: bool) -> CliResult {
    let cfg = load_config(run)?;
    let res = rate_sweep(&cfg, RateFormula::Hard)?;
    write_results(
        std::slice::from_ref(&res),
        run.format.into(),
        run.out.as_deref(),
    )?;
    let f = &res.fit;
    eprintln!(
        "slope {:.4}, R^2 {:.4}, constant {:.4}",
        f.slope, f.r_squared, f.fitted_constant
    );
    Ok(status(
        !check || ((0.8..=1.2).contains(&f.slope) && f.r_squared >= 0.95),
    ))
}

#[allow(clippy::too_many_arguments)]
fn check_oracle(
    point: GridPoint,
    sigma: f64,
    lambda: f64,
    a: f64,
    slack: f64,
    amplitude: Option<f64>,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> CliResult {
    let penalty = PenaltyConfig::with_lambda(lambda)?;
    let amplitude =
        amplitude.unwrap_or_else(|| threshold_schedule(point.n1, point.n2, lambda)[0].sqrt());
    let m = random_pattern(point.n1, point.n2, point.s, rowsparse::rng::mix(seed, 0))?
        .to_matrix()
        .scaled(amplitude)?;
    let cfg = ExperimentConfig::new(
        vec![point],
        NoiseSpec::gaussian(sigma, 0)?,
        penalty,
        trials,
        seed,
    );
    let report = oracle_gap(&m, &cfg, a, &[], slack)?;
    if let Some(path) = out {
        write_text(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    let at_m = report.probes[0].c_fit_95;
    let summary = json!({
        "trials": report.trials(),
        "amplitude": amplitude,
        "c_fit_95": report.c_fit_95,
        "c_fit_95_at_signal": at_m,
        "c_fit_95_at_zero": report.probes[1].c_fit_95,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(status(report.c_fit_95.is_some() && at_m.is_some()))
}

fn greedy_dmin(n1: usize, s: usize) -> usize {
    separation_requirement(n1, s).ceil().max(1.0) as usize
}

fn check_pack(dims: &PackDims, c_target: f64, gamma: f64) -> CliResult {
    let d_min = greedy_dmin(dims.n1, dims.s);
    let seed = seed_from_env(dims.seed)?;
    let pack = vg_pack(dims.n1, dims.n2, dims.s, d_min, dims.budget, seed)?;
    let cert = verify_pack(&pack, c_target);
    let pairs = pair_checks(&pack, gamma, 1.0, &[0.5, 1.0, 2.0])?;
    let summary = json!({ "d_min": d_min, "certificate": cert, "pairs": pairs });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(status(cert.pass() && pairs.clean()))
}

fn build_pack(
    dims: &PackDims,
    dmin: usize,
    construction: ConstructionArg,
    base_s: usize,
) -> Result<PackingSet, rowsparse::Error> {
    let PackDims {
        n1,
        n2,
        s,
        budget,
        seed,
    } = *dims;
    let seed = seed_from_env(seed)?;
    match construction {
        ConstructionArg::Greedy => vg_pack(n1, n2, s, dmin, budget, seed),
        ConstructionArg::Replicate => {
            if s == 0 {
                return Err(rowsparse::Error::Domain("s must be positive".into()));
            }
            let base = vg_pack(n1, n2 / s, 1, dmin.div_ceil(s).max(1), budget, seed)?;
            embed_replicate(&base, s, n2)
        }
        ConstructionArg::Pad => {
            if base_s > s || s - base_s >= n2 {
                return Err(rowsparse::Error::Domain(format!(
                    "base weight {base_s} cannot be padded to {s} within width {n2}"
                )));
            }
            let base = vg_pack(n1, n2 - (s - base_s), base_s, dmin, budget, seed)?;
            embed_pad_ones(&base, s, n2)
        }
    }
}

fn rates(n1: usize, n2: usize, s: f64, sigma: f64, p: f64, q: Option<f64>) -> CliResult {
    let value = match q {
        None => {
            if s.fract() != 0.0 || s < 1.0 {
                return Err(rowsparse::Error::Domain(format!(
                    "hard sparsity needs an integer s >= 1, got {s}"
                )));
            }
            let d = ProblemDims::hard(n1, n2, s as usize, sigma).with_p(p);
            json!({
                "regime": "hard",
                "rate": rate_hard(&d)?,
                "lower_bound_applies": d.hard_bound_applies(),
            })
        }
        Some(q) => {
            let d = ProblemDims::soft(n1, n2, s, q, sigma).with_p(p);
            let (rate, term) = soft_rate_labelled(&d)?;
            json!({ "regime": "soft", "rate": rate, "dominant_term": term })
        }
    };
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(Status::Pass)
}

fn estimate(
    input: &Path,
    lambda: f64,
    rowwise: bool,
    output: &Path,
    report: Option<&Path>,
) -> CliResult {
    let y = RealMatrix::read_path(input)?;
    let cfg = PenaltyConfig::with_lambda(lambda)?;
    let fit = if rowwise {
        estimate_rowwise_report(&y, &cfg)
    } else {
        estimate_pls(&y, &cfg)
    };
    fit.m_hat.write_path(output)?;
    if let Some(path) = report {
        let (n1, n2) = if rowwise { (1, y.n2()) } else { y.dims() };
        let head: Vec<f64> = threshold_schedule(n1, n2, lambda)
            .into_iter()
            .take(10)
            .collect();
        let value = json!({
            "k_star": fit.k_star,
            "objective_value": fit.objective_value,
            "kept_threshold": fit.kept_threshold.is_finite().then_some(fit.kept_threshold),
            "keep_rule": fit.keep_rule,
            "rowwise": rowwise,
            "lambda": lambda,
            "schedule_head": head,
        });
        write_text(path, &(serde_json::to_string_pretty(&value)? + "\n"))?;
    }
    Ok(Status::Pass)
}
