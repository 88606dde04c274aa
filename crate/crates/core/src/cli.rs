//! The `bdpd` command-line front end.
//!
//! Exit status is 0 on success, 2 for usage and data errors and 3 for
//! numerical failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::asymptotics::{sandwich, tune, SandwichVariance};
use crate::divergence::{BridgeConfig, GSpec};
use crate::error::{Error, Result};
use crate::families::{Family, Theta};
use crate::io::{fmt_num, profile_csv, read_data, write_results, Format};
use crate::optimize::{
    chain_fit, global_fit, log_grid, profile_objective, spurious_report, ChainPath, GlobalFit, LambdaGrid,
    ProfileSource, StartSpec, Tolerances,
};
use crate::simulate::{run_study, Contaminant, ContaminationSpec, SimConfig};

/// Chain roots farther than this from the global minimizer get a warning.
const SPURIOUS_GAP: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "bdpd", version, about = "Minimum bridge density power divergence estimation")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file (defaults to stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "json")]
    format: OutFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyId {
    #[value(alias = "exponential")]
    ExponentialScale,
    NormalScale,
    NormalMean,
    #[value(alias = "normal")]
    NormalLocationScale,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: FamilyId,

    /// Known mean for `normal-scale`.
    #[arg(long, default_value_t = 0.0)]
    fixed_mean: f64,

    /// Known standard deviation for `normal-mean`.
    #[arg(long, default_value_t = 1.0)]
    fixed_sd: f64,
}

impl FamilyArgs {
    fn family(&self) -> Result<Family> {
        let f = match self.family {
            FamilyId::ExponentialScale => Family::ExponentialScale,
            FamilyId::NormalScale => Family::NormalScale { mean: self.fixed_mean },
            FamilyId::NormalMean => Family::NormalMean { sigma: self.fixed_sd },
            FamilyId::NormalLocationScale => Family::NormalLocationScale,
        };
        if !self.fixed_mean.is_finite() || !(self.fixed_sd > 0.0 && self.fixed_sd.is_finite()) {
            return Err(Error::InvalidInput("--fixed-mean must be finite and --fixed-sd positive".into()));
        }
        Ok(f)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multistart fit at one (alpha, lambda) with its sandwich variance.
    Fit {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Chain algorithm from lambda = 1 down to 0, with global minimizers for comparison.
    Chain {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        alpha: f64,
        /// Comma-separated, descending from 1 to 0.
        #[arg(long)]
        lambda_grid: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Objective values over a parameter grid.
    Profile {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, conflicts_with = "gspec", required_unless_present = "gspec")]
        data: Option<PathBuf>,
        /// JSON description of a population distribution.
        #[arg(long)]
        gspec: Option<PathBuf>,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        lambda: f64,
        /// Scale grid `lo:hi:n`, log-spaced.
        #[arg(long)]
        sigma: Option<String>,
        /// Location grid `lo:hi:n`, evenly spaced, or a single value.
        #[arg(long)]
        mu: Option<String>,
    },
    /// Determinant-of-variance tuning over an (alpha, lambda) grid.
    Tune {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        alpha_grid: Option<String>,
        #[arg(long)]
        lambda_grid: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo study of the chain estimator under contamination.
    Simulate {
        #[command(flatten)]
        family: FamilyArgs,
        /// Majority-component parameter, comma-separated.
        #[arg(long)]
        theta: String,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// `point:X` or `uniform:LO,HI`.
        #[arg(long, default_value = "point:0")]
        contaminant: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        alpha_grid: Option<String>,
        #[arg(long)]
        lambda_grid: Option<String>,
    },
    /// Spurious-minimum diagnostics at one (alpha, lambda).
    Diagnose {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        lambda: f64,
    },
}

#[derive(Debug, Serialize)]
struct FitOutput {
    family: Family,
    config: BridgeConfig,
    fit: GlobalFit,
    sandwich: Option<SandwichVariance>,
    sandwich_error: Option<String>,
}

#[derive(Debug, Serialize)]
struct ChainRow {
    lambda: f64,
    theta_hat: Theta,
    objective: f64,
    global_theta: Theta,
    global_objective: f64,
    det_v: Option<f64>,
    warning: Option<String>,
}

#[derive(Debug, Serialize)]
struct ChainOutput {
    family: Family,
    alpha: f64,
    rows: Vec<ChainRow>,
    path: ChainPath,
}

impl ChainOutput {
    fn to_csv(&self) -> String {
        let names = self.family.param_names();
        let mut s = String::from("lambda");
        for n in names {
            s.push_str(&format!(",{n}_hat"));
        }
        s.push_str(",objective");
        for n in names {
            s.push_str(&format!(",{n}_global"));
        }
        s.push_str(",global_objective,det_V,spurious_warning\n");
        for r in &self.rows {
            s.push_str(&fmt_num(r.lambda));
            for v in r.theta_hat.as_slice() {
                s.push_str(&format!(",{}", fmt_num(*v)));
            }
            s.push_str(&format!(",{}", fmt_num(r.objective)));
            for v in r.global_theta.as_slice() {
                s.push_str(&format!(",{}", fmt_num(*v)));
            }
            s.push_str(&format!(
                ",{},{},{}\n",
                fmt_num(r.global_objective),
                r.det_v.map(fmt_num).unwrap_or_default(),
                r.warning.is_some()
            ));
        }
        s
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("{what}: {t:?} is not a number")))
        })
        .collect()
}

fn lambda_grid(s: &Option<String>) -> Result<LambdaGrid> {
    match s {
        Some(s) => LambdaGrid::new(parse_list(s, "--lambda-grid")?),
        None => Ok(LambdaGrid::standard()),
    }
}

fn alpha_grid(s: &Option<String>) -> Result<Vec<f64>> {
    match s {
        Some(s) => parse_list(s, "--alpha-grid"),
        None => Ok(vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]),
    }
}

fn parse_range(s: &str, what: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidInput(format!("{what} expects lo:hi:n, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

fn sigma_values(s: &Option<String>) -> Result<Vec<f64>> {
    let s = s
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--sigma lo:hi:n is required for this family".into()))?;
    let (lo, hi, n) = parse_range(s, "--sigma")?;
    if lo <= 0.0 {
        return Err(Error::InvalidInput("--sigma range must be positive".into()));
    }
    Ok(log_grid(lo, hi, n))
}

fn mu_values(s: &Option<String>) -> Result<Vec<f64>> {
    let s = s
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--mu is required for this family".into()))?;
    if !s.contains(':') {
        return parse_list(s, "--mu");
    }
    let (lo, hi, n) = parse_range(s, "--mu")?;
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn parse_contaminant(s: &str) -> Result<Contaminant> {
    let bad = || Error::InvalidInput(format!("--contaminant expects point:X or uniform:LO,HI, got {s:?}"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "point" => Ok(Contaminant::PointMass {
            location: rest.trim().parse().map_err(|_| bad())?,
        }),
        "uniform" => {
            let v = parse_list(rest, "--contaminant").map_err(|_| bad())?;
            match v[..] {
                [lo, hi] => Ok(Contaminant::UniformSlab { lo, hi }),
                _ => Err(bad()),
            }
        }
        _ => Err(bad()),
    }
}

fn read_gspec(path: &Path) -> Result<GSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let g: GSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })?;
    g.validate()?;
    Ok(g)
}

fn run_fit(family: Family, data: &[f64], cfg: BridgeConfig, seed: u64) -> Result<FitOutput> {
    let starts = StartSpec::standard(&family, data, seed);
    let fit = global_fit(&family, data, &cfg, &starts, &Tolerances::default())?;
    let (sandwich, sandwich_error) = match sandwich(&family, &fit.best.theta_hat, data, &cfg) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(FitOutput {
        family,
        config: cfg,
        fit,
        sandwich,
        sandwich_error,
    })
}

fn run_chain(family: Family, data: &[f64], alpha: f64, grid: &LambdaGrid, seed: u64) -> Result<ChainOutput> {
    let tol = Tolerances::default();
    let starts = StartSpec::standard(&family, data, seed);
    let path = chain_fit(&family, data, alpha, grid, &starts, &tol)?;
    let mut rows = Vec::with_capacity(path.fits.len());
    for (lambda, fit) in path.lambdas.iter().zip(&path.fits) {
        let cfg = BridgeConfig::new(alpha, *lambda)?;
        let global = global_fit(&family, data, &cfg, &starts, &tol)?;
        let gap = fit
            .theta_hat
            .as_slice()
            .iter()
            .zip(global.best.theta_hat.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let warning = (gap > SPURIOUS_GAP).then(|| {
            format!(
                "lambda = {lambda}: global minimizer {:?} differs from the chain root {:?}; \
                 the global minimum is likely spurious",
                global.best.theta_hat.as_slice(),
                fit.theta_hat.as_slice()
            )
        });
        rows.push(ChainRow {
            lambda: *lambda,
            theta_hat: fit.theta_hat.clone(),
            objective: fit.objective,
            global_theta: global.best.theta_hat.clone(),
            global_objective: global.best.objective,
            det_v: sandwich(&family, &fit.theta_hat, data, &cfg).ok().map(|v| v.det_v),
            warning,
        });
    }
    Ok(ChainOutput {
        family,
        alpha,
        rows,
        path,
    })
}

fn profile_grid(family: &Family, sigma: &Option<String>, mu: &Option<String>) -> Result<Vec<Theta>> {
    Ok(match family {
        Family::ExponentialScale | Family::NormalScale { .. } => {
            sigma_values(sigma)?.into_iter().map(Theta::scalar).collect()
        }
        Family::NormalMean { .. } => mu_values(mu)?.into_iter().map(Theta::scalar).collect(),
        Family::NormalLocationScale => {
            let s = sigma_values(sigma)?;
            mu_values(mu)?
                .into_iter()
                .flat_map(|m| s.iter().map(move |&v| Theta::new(vec![m, v])))
                .collect()
        }
    })
}

fn execute(cli: &Cli) -> Result<()> {
    let format = match cli.format {
        OutFormat::Json => Format::Json,
        OutFormat::Csv => Format::Csv,
    };
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Fit {
            family,
            data,
            alpha,
            lambda,
            seed,
        } => {
            let cfg = BridgeConfig::new(*alpha, *lambda)?;
            let res = run_fit(family.family()?, &read_data(data)?, cfg, *seed)?;
            write_results(&res, None, format, out)
        }
        Command::Chain {
            family,
            data,
            alpha,
            lambda_grid: grid,
            seed,
        } => {
            let res = run_chain(family.family()?, &read_data(data)?, *alpha, &lambda_grid(grid)?, *seed)?;
            for r in &res.rows {
                if let Some(w) = &r.warning {
                    eprintln!("warning: {w}");
                }
            }
            write_results(&res, Some(&|| res.to_csv()), format, out)
        }
        Command::Profile {
            family,
            data,
            gspec,
            alpha,
            lambda,
            sigma,
            mu,
        } => {
            let fam = family.family()?;
            let cfg = BridgeConfig::new(*alpha, *lambda)?;
            let grid = profile_grid(&fam, sigma, mu)?;
            let points = match (data, gspec) {
                (Some(d), _) => profile_objective(&fam, ProfileSource::Sample(&read_data(d)?), &cfg, &grid)?,
                (None, Some(g)) => profile_objective(&fam, ProfileSource::Population(&read_gspec(g)?), &cfg, &grid)?,
                (None, None) => return Err(Error::InvalidInput("--data or --gspec is required".into())),
            };
            write_results(&points, Some(&|| profile_csv(&fam, &points)), format, out)
        }
        Command::Tune {
            family,
            data,
            alpha_grid: ag,
            lambda_grid: lg,
            seed,
        } => {
            let fam = family.family()?;
            let x = read_data(data)?;
            let starts = StartSpec::standard(&fam, &x, *seed);
            let table = tune(&fam, &x, &alpha_grid(ag)?, &lambda_grid(lg)?, &starts, &Tolerances::default())?;
            write_results(&table, Some(&|| table.to_csv(fam.dim())), format, out)
        }
        Command::Simulate {
            family,
            theta,
            epsilon,
            contaminant,
            n,
            reps,
            seed,
            alpha_grid: ag,
            lambda_grid: lg,
        } => {
            let spec = ContaminationSpec {
                family: family.family()?,
                theta: Theta::new(parse_list(theta, "--theta")?),
                contaminant: parse_contaminant(contaminant)?,
                epsilon: *epsilon,
            };
            let mut cfg = SimConfig::new(spec, *n, *reps, *seed);
            cfg.alpha_grid = alpha_grid(ag)?;
            cfg.lambda_grid = lambda_grid(lg)?;
            let report = run_study(&cfg)?;
            let flagged = report.cells.iter().filter(|c| c.flagged).count();
            if flagged > 0 {
                eprintln!("warning: {flagged} cells had more than 1% failed replications");
            }
            write_results(&report, Some(&|| report.to_csv()), format, out)
        }
        Command::Diagnose {
            family,
            data,
            alpha,
            lambda,
        } => {
            let cfg = BridgeConfig::new(*alpha, *lambda)?;
            let report = spurious_report(&family.family()?, &read_data(data)?, &cfg, &Tolerances::default())?;
            write_results(&report, None, format, out)
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit status.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}
