//! Monte Carlo studies of the chain estimator under ε-contamination.
//!
//! Replication `r` draws from `ChaCha8Rng` seeded with the master seed and
//! switched to stream `r`, so replications are independent of scheduling.
//! One sample per replication is shared by every `α` cell; the start seeds
//! for each `α` come from the same stream after the sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Family, Theta};
use crate::io::fmt_num;
use crate::optimize::{chain_fit, LambdaGrid, StartBox, StartSpec, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Contaminant {
    PointMass { location: f64 },
    UniformSlab { lo: f64, hi: f64 },
}

impl Contaminant {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Contaminant::PointMass { location } => location,
            Contaminant::UniformSlab { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub family: Family,
    /// Parameter of the majority component.
    pub theta: Theta,
    pub contaminant: Contaminant,
    pub epsilon: f64,
}

impl ContaminationSpec {
    pub fn validate(&self) -> Result<()> {
        self.family.validate(&self.theta.0)?;
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        match self.contaminant {
            Contaminant::PointMass { location } if !location.is_finite() => {
                Err(Error::InvalidInput("contaminant location must be finite".into()))
            }
            Contaminant::UniformSlab { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                Err(Error::InvalidInput(format!("contaminant slab needs finite lo < hi, got [{lo}, {hi}]")))
            }
            _ => Ok(()),
        }
    }

    fn draw_majority<R: Rng>(&self, rng: &mut R) -> f64 {
        let (loc, s) = self.family.loc_scale(&self.theta.0);
        match self.family {
            Family::ExponentialScale => Exp::new(1.0 / s).expect("positive rate").sample(rng),
            _ => Normal::new(loc, s).expect("positive sd").sample(rng),
        }
    }

    /// `n` draws; each is contaminated independently with probability `ε`.
    pub fn sample_with<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                if self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon {
                    self.contaminant.draw(rng)
                } else {
                    self.draw_majority(rng)
                }
            })
            .collect()
    }
}

/// Draws `n` observations with a generator seeded by `seed`.
///
/// `ε = 1` is accepted here and yields a pure contaminant sample.
pub fn sample(spec: &ContaminationSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    if spec.epsilon == 1.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok((0..n).map(|_| spec.contaminant.draw(&mut rng)).collect());
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(spec.sample_with(n, &mut rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: ContaminationSpec,
    pub n: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub alpha_grid: Vec<f64>,
    pub lambda_grid: LambdaGrid,
    /// Parameter the errors are measured against.
    pub target: Theta,
    /// Start boxes for the DPD multistart; `None` uses the standard 25 + 75 design.
    pub start_boxes: Option<Vec<StartBox>>,
    pub tolerances: Tolerances,
}

impl SimConfig {
    pub fn new(spec: ContaminationSpec, n: usize, reps: usize, master_seed: u64) -> Self {
        SimConfig {
            target: spec.theta.clone(),
            spec,
            n,
            reps,
            master_seed,
            alpha_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            lambda_grid: LambdaGrid::standard(),
            start_boxes: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.spec.family.validate(&self.target.0)?;
        if self.n < 2 {
            return Err(Error::InvalidInput("sample size must be at least 2".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("at least one replication is required".into()));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidInput("alpha grid is empty".into()));
        }
        if let Some(&a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidInput(format!("alpha {a} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Scaled bias `√n·mean(θ̂ − θ*)` and scaled MSE `n·mean((θ̂ − θ*)²)`.
pub fn scaled_metrics(estimates: &[f64], target: f64, n: usize) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::EmptyData);
    }
    let m = estimates.len() as f64;
    let nf = n as f64;
    let bias = estimates.iter().map(|e| e - target).sum::<f64>() / m;
    let mse = estimates.iter().map(|e| (e - target).powi(2)).sum::<f64>() / m;
    Ok((nf.sqrt() * bias, nf * mse))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub alpha: f64,
    pub lambda: f64,
    /// Per parameter coordinate.
    pub scaled_bias: Vec<f64>,
    pub scaled_mse: Vec<f64>,
    pub bias_se: Vec<f64>,
    pub mse_se: Vec<f64>,
    pub successes: usize,
    pub failures: usize,
    /// More than 1% of replications failed.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub family: Family,
    pub n: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub epsilon: f64,
    pub target: Theta,
    pub param_names: Vec<String>,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Cells in `(alpha, lambda)` grid order.
    pub cells: Vec<SimCell>,
    /// `estimates[cell][rep]`, `None` for failed replications.
    #[serde(skip, default)]
    pub estimates: Vec<Vec<Option<Theta>>>,
}

impl SimReport {
    fn index(&self, alpha: f64, lambda: f64) -> Option<usize> {
        let i = self.alphas.iter().position(|&a| (a - alpha).abs() < 1e-12)?;
        let j = self.lambdas.iter().position(|&l| (l - lambda).abs() < 1e-12)?;
        Some(i * self.lambdas.len() + j)
    }

    pub fn cell(&self, alpha: f64, lambda: f64) -> Option<&SimCell> {
        self.index(alpha, lambda).map(|i| &self.cells[i])
    }

    /// Scaled-MSE difference `cell(a) − cell(b)` for coordinate `k` over
    /// replications where both succeeded, with its paired standard error.
    pub fn mse_difference(&self, a: (f64, f64), b: (f64, f64), k: usize) -> Option<(f64, f64)> {
        let ia = self.index(a.0, a.1)?;
        let ib = self.index(b.0, b.1)?;
        let nf = self.n as f64;
        let t = self.target[k];
        let d: Vec<f64> = self.estimates[ia]
            .iter()
            .zip(&self.estimates[ib])
            .filter_map(|(x, y)| Some(nf * ((x.as_ref()?[k] - t).powi(2) - (y.as_ref()?[k] - t).powi(2))))
            .collect();
        if d.len() < 2 {
            return None;
        }
        let (m, sd) = mean_sd(&d);
        Some((m, sd / (d.len() as f64).sqrt()))
    }

    /// One bias and one MSE row per `α`, columns `λ` descending.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,metric");
        for l in &self.lambdas {
            s.push_str(&format!(",lambda={}", fmt_num(*l)));
        }
        s.push('\n');
        let p = self.param_names.len();
        for (i, a) in self.alphas.iter().enumerate() {
            let row = &self.cells[i * self.lambdas.len()..(i + 1) * self.lambdas.len()];
            for k in 0..p {
                let suffix = if p > 1 { format!("[{}]", self.param_names[k]) } else { String::new() };
                for (name, pick) in [
                    ("bias", (|c: &SimCell, k: usize| c.scaled_bias[k]) as fn(&SimCell, usize) -> f64),
                    ("mse", |c: &SimCell, k: usize| c.scaled_mse[k]),
                ] {
                    s.push_str(&format!("{},{}{}", fmt_num(*a), name, suffix));
                    for c in row {
                        s.push(',');
                        s.push_str(&fmt_num(pick(c, k)));
                    }
                    s.push('\n');
                }
            }
        }
        s
    }
}

/// Chain estimates for every `(α, λ)` cell of one replication.
fn replicate(cfg: &SimConfig, rep: usize) -> Vec<Vec<Option<Theta>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(rep as u64);
    let data = cfg.spec.sample_with(cfg.n, &mut rng);
    let family = &cfg.spec.family;
    let k = cfg.lambda_grid.values().len();
    cfg.alpha_grid
        .iter()
        .map(|&alpha| {
            let seed: u64 = rng.random();
            let starts = match &cfg.start_boxes {
                Some(boxes) => StartSpec {
                    boxes: boxes.clone(),
                    seed,
                },
                None => StartSpec::standard(family, &data, seed),
            };
            let fits = match chain_fit(family, &data, alpha, &cfg.lambda_grid, &starts, &cfg.tolerances) {
                Ok(path) => path.fits,
                Err(Error::ChainBroken { partial, .. }) => partial.fits,
                Err(_) => Vec::new(),
            };
            let mut out: Vec<Option<Theta>> = fits.into_iter().map(|f| Some(f.theta_hat)).collect();
            out.resize(k, None);
            out
        })
        .collect()
}

pub fn run_study(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let per_rep: Vec<Vec<Vec<Option<Theta>>>> = (0..cfg.reps).into_par_iter().map(|r| replicate(cfg, r)).collect();

    let lambdas = cfg.lambda_grid.values().to_vec();
    let p = cfg.spec.family.dim();
    let nf = cfg.n as f64;
    let mut cells = Vec::new();
    let mut estimates = Vec::new();
    for (i, &alpha) in cfg.alpha_grid.iter().enumerate() {
        for (j, &lambda) in lambdas.iter().enumerate() {
            let est: Vec<Option<Theta>> = per_rep.iter().map(|r| r[i][j].clone()).collect();
            let ok: Vec<&Theta> = est.iter().flatten().collect();
            let failures = est.len() - ok.len();
            let mut cell = SimCell {
                alpha,
                lambda,
                scaled_bias: vec![f64::NAN; p],
                scaled_mse: vec![f64::NAN; p],
                bias_se: vec![f64::NAN; p],
                mse_se: vec![f64::NAN; p],
                successes: ok.len(),
                failures,
                flagged: failures as f64 > 0.01 * cfg.reps as f64,
            };
            if !ok.is_empty() {
                for k in 0..p {
                    let e: Vec<f64> = ok.iter().map(|t| t[k] - cfg.target[k]).collect();
                    let sq: Vec<f64> = e.iter().map(|x| x * x).collect();
                    let (mb, sb) = mean_sd(&e);
                    let (mm, sm) = mean_sd(&sq);
                    let root = (ok.len() as f64).sqrt();
                    cell.scaled_bias[k] = nf.sqrt() * mb;
                    cell.scaled_mse[k] = nf * mm;
                    cell.bias_se[k] = nf.sqrt() * sb / root;
                    cell.mse_se[k] = nf * sm / root;
                }
            }
            cells.push(cell);
            estimates.push(est);
        }
    }
    Ok(SimReport {
        family: cfg.spec.family,
        n: cfg.n,
        reps: cfg.reps,
        master_seed: cfg.master_seed,
        epsilon: cfg.spec.epsilon,
        target: cfg.target.clone(),
        param_names: cfg.spec.family.param_names().iter().map(|s| s.to_string()).collect(),
        alphas: cfg.alpha_grid.clone(),
        lambdas,
        cells,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_spec(eps: f64, c: Contaminant) -> ContaminationSpec {
        ContaminationSpec {
            family: Family::ExponentialScale,
            theta: Theta::scalar(1.0),
            contaminant: c,
            epsilon: eps,
        }
    }

    const SLAB: Contaminant = Contaminant::UniformSlab {
        lo: 6.0 - 1e-4,
        hi: 6.0 + 1e-4,
    };

    #[test]
    fn pure_majority_mean() {
        let n = 20000;
        let x = sample(&exp_spec(0.0, SLAB), n, 3).unwrap();
        let m = x.iter().sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn full_point_mass() {
        let x = sample(&exp_spec(1.0, Contaminant::PointMass { location: 6.0 }), 50, 1).unwrap();
        assert!(x.iter().all(|&v| v == 6.0));
    }

    #[test]
    fn contamination_fraction() {
        let n = 20000;
        let x = sample(&exp_spec(0.2, SLAB), n, 9).unwrap();
        let frac = x.iter().filter(|&&v| v > 5.9 && v < 6.1).count() as f64 / n as f64;
        // Exp(1) puts about 0.002 mass on (5.9, 6.1).
        assert!((frac - 0.2).abs() < 3.0 * (0.16 / n as f64).sqrt() + 0.003, "{frac}");
    }

    #[test]
    fn sampling_is_seeded() {
        let s = exp_spec(0.1, SLAB);
        assert_eq!(sample(&s, 100, 5).unwrap(), sample(&s, 100, 5).unwrap());
        assert_ne!(sample(&s, 100, 5).unwrap(), sample(&s, 100, 6).unwrap());
    }

    #[test]
    fn scaled_metric_examples() {
        assert_eq!(scaled_metrics(&[2.0, 2.0], 2.0, 100).unwrap(), (0.0, 0.0));
        assert_eq!(scaled_metrics(&[3.0], 2.0, 100).unwrap(), (10.0, 100.0));
        let (b, m) = scaled_metrics(&[0.9, 1.2, 1.0, 0.7, 1.4], 1.0, 25).unwrap();
        // errors: -0.1, 0.2, 0, -0.3, 0.4 -> mean 0.04, mean square 0.06
        assert!((b - 5.0 * 0.04).abs() < 1e-14);
        assert!((m - 25.0 * 0.06).abs() < 1e-13);
        assert!(scaled_metrics(&[], 1.0, 10).is_err());
    }

    fn small_config(seed: u64) -> SimConfig {
        let mut cfg = SimConfig::new(exp_spec(0.1, SLAB), 30, 6, seed);
        cfg.alpha_grid = vec![0.0, 0.5];
        cfg.lambda_grid = LambdaGrid::uniform(2).unwrap();
        cfg.start_boxes = Some(vec![
            StartBox {
                count: 2,
                bounds: vec![(0.0, 0.1)],
            },
            StartBox {
                count: 4,
                bounds: vec![(0.1, 10.0)],
            },
        ]);
        cfg
    }

    #[test]
    fn study_is_reproducible_and_consistent() {
        let a = run_study(&small_config(42)).unwrap();
        let b = run_study(&small_config(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 6);
        for c in &a.cells {
            assert!(c.scaled_mse[0] >= c.scaled_bias[0].powi(2) - 1e-12);
        }
        // α = 0 cells agree across λ.
        let c0: Vec<f64> = a.cells[..3].iter().map(|c| c.scaled_bias[0]).collect();
        assert!((c0[0] - c0[2]).abs() < 1e-6);
        let d = a.mse_difference((0.5, 1.0), (0.5, 0.0), 0).unwrap();
        assert!(d.1 >= 0.0);
        let csv = a.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "alpha,metric,lambda=1.0000000000000000e0,lambda=5.0000000000000000e-1,lambda=0.0000000000000000e0");
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert!(lines[1].starts_with("0.0000000000000000e0,bias,"));
        assert!(lines[2].starts_with("0.0000000000000000e0,mse,"));
    }

    #[test]
    fn report_json_round_trip_keeps_tables() {
        let a = run_study(&small_config(1)).unwrap();
        let js = serde_json::to_string(&a).unwrap();
        let back: SimReport = serde_json::from_str(&js).unwrap();
        assert_eq!(back.cells, a.cells);
        assert!(back.estimates.is_empty());
    }
}
