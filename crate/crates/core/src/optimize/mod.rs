//! Local and multistart minimization and the chain algorithm.
//!
//! Local fits run a damped Newton iteration in the unconstrained coordinates
//! `η`, where every scale coordinate is replaced by its logarithm. The Hessian
//! is a central difference of the analytic gradient, shifted to be positive
//! definite before each step, and steps are accepted by Armijo backtracking.

mod landscape;

pub use landscape::{
    boundary_fit, dpd_sample_size_threshold, global_fit, log_grid, profile_objective, spurious_alpha_boundary,
    spurious_lambda_boundary, spurious_report, GlobalFit, ProfilePoint, ProfileSource, RayPoint, SpuriousReport,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{check_inputs, eval_sample, BridgeConfig};
use crate::error::{Error, Result};
use crate::families::{Family, Theta};

/// A smooth objective over a family's parameter space.
pub trait Objective: Sync {
    fn family(&self) -> &Family;

    /// Value and θ-gradient at an in-domain point. Gradient entries past
    /// `family().dim()` are ignored; the gradient is unused when the value is
    /// not finite.
    fn eval(&self, theta: &[f64]) -> (f64, [f64; 2]);
}

#[derive(Debug, Clone, Copy)]
pub struct SampleObjective<'a> {
    pub family: Family,
    pub data: &'a [f64],
    pub cfg: BridgeConfig,
}

impl<'a> SampleObjective<'a> {
    pub fn new(family: Family, data: &'a [f64], cfg: BridgeConfig) -> Result<Self> {
        let probe = Theta(vec![1.0; family.dim()]);
        check_inputs(&family, &probe, data, &cfg)?;
        Ok(SampleObjective { family, data, cfg })
    }
}

impl Objective for SampleObjective<'_> {
    fn family(&self) -> &Family {
        &self.family
    }

    fn eval(&self, theta: &[f64]) -> (f64, [f64; 2]) {
        let e = eval_sample(&self.family, theta, self.data, &self.cfg);
        (e.value, e.gradient(self.cfg.alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Bound on the max-norm of the gradient, in both `η` and `θ` coordinates.
    pub gradient: f64,
    pub max_iter: usize,
    /// Largest step in `η` (max-norm).
    pub step_cap: f64,
    /// Relative difference step for the Hessian.
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            gradient: 1e-8,
            max_iter: 500,
            step_cap: 1.0,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    Local,
    GlobalMultistart,
    ChainStep,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    IterationLimit,
    LineSearchFailed,
    NotMinimum,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Theta,
    pub objective: f64,
    /// Max-norm of the θ-gradient at `theta_hat`.
    pub gradient_norm: f64,
    /// Max-norm of the gradient in the log-scale coordinates.
    pub eta_gradient_norm: f64,
    pub converged: bool,
    pub status: FitStatus,
    /// Smallest eigenvalue of the numerical Hessian in `η`.
    pub min_curvature: f64,
    pub iterations: usize,
    pub n_evals: usize,
    pub kind: FitKind,
}

struct EtaProblem<'o, O: Objective> {
    obj: &'o O,
    dim: usize,
    scale: [bool; 2],
    evals: std::cell::Cell<usize>,
}

impl<'o, O: Objective> EtaProblem<'o, O> {
    fn new(obj: &'o O) -> Self {
        let f = obj.family();
        EtaProblem {
            obj,
            dim: f.dim(),
            scale: [f.is_scale_coordinate(0), f.is_scale_coordinate(1)],
            evals: std::cell::Cell::new(0),
        }
    }

    fn theta(&self, eta: &[f64; 2]) -> [f64; 2] {
        let mut th = *eta;
        for i in 0..self.dim {
            if self.scale[i] {
                th[i] = eta[i].exp();
            }
        }
        th
    }

    fn eta(&self, th: &[f64]) -> [f64; 2] {
        let mut e = [0.0; 2];
        for i in 0..self.dim {
            e[i] = if self.scale[i] { th[i].ln() } else { th[i] };
        }
        e
    }

    /// Value, η-gradient and θ-gradient.
    fn eval(&self, eta: &[f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
        self.evals.set(self.evals.get() + 1);
        let th = self.theta(eta);
        for i in 0..self.dim {
            if !th[i].is_finite() || (self.scale[i] && th[i] <= 0.0) {
                return (f64::INFINITY, [f64::NAN; 2], [f64::NAN; 2]);
            }
        }
        let (v, gt) = self.obj.eval(&th[..self.dim]);
        if !v.is_finite() {
            return (v, [f64::NAN; 2], [f64::NAN; 2]);
        }
        let mut ge = [0.0; 2];
        let mut gth = [0.0; 2];
        for i in 0..self.dim {
            gth[i] = gt[i];
            ge[i] = if self.scale[i] { gt[i] * th[i] } else { gt[i] };
        }
        (v, ge, gth)
    }

    fn hessian(&self, eta: &[f64; 2], h_rel: f64) -> Option<DMatrix<f64>> {
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        for j in 0..d {
            let step = h_rel * eta[j].abs().max(1.0);
            let mut up = *eta;
            let mut dn = *eta;
            up[j] += step;
            dn[j] -= step;
            let (vu, gu, _) = self.eval(&up);
            let (vd, gd, _) = self.eval(&dn);
            if !vu.is_finite() || !vd.is_finite() {
                return None;
            }
            for i in 0..d {
                h[(i, j)] = (gu[i] - gd[i]) / (2.0 * step);
            }
        }
        Some((&h + h.transpose()) * 0.5)
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone()).eigenvalues.min()
}

/// Newton direction with the Hessian shifted to be safely positive definite.
fn newton_direction(h: &DMatrix<f64>, g: &[f64]) -> DVector<f64> {
    let d = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let top = eig.eigenvalues.amax().max(1e-12);
    let mut dir = DVector::zeros(d);
    for k in 0..d {
        let lam = eig.eigenvalues[k].abs().max(1e-8 * top);
        let v = eig.eigenvectors.column(k);
        let proj: f64 = (0..d).map(|i| v[i] * g[i]).sum();
        dir -= v * (proj / lam);
    }
    dir
}

/// Local minimization from `start`.
///
/// Returns `StartRejected` when the objective is not finite at `start`;
/// every other failure comes back as a `FitResult` with `converged = false`.
pub fn local_minimize<O: Objective>(obj: &O, start: &Theta, tol: &Tolerances) -> Result<FitResult> {
    let family = *obj.family();
    family.validate(&start.0)?;
    let prob = EtaProblem::new(obj);
    let d = prob.dim;
    let mut eta = prob.eta(&start.0);
    let (mut f, mut ge, mut gt) = prob.eval(&eta);
    if !f.is_finite() {
        return Err(Error::StartRejected { theta: start.0.clone() });
    }

    let mut status = FitStatus::IterationLimit;
    let mut iterations = 0;
    while iterations < tol.max_iter {
        let gn = max_norm(&ge[..d]);
        if gn <= tol.gradient && max_norm(&gt[..d]) <= tol.gradient {
            status = FitStatus::Converged;
            break;
        }
        iterations += 1;
        let Some(h) = prob.hessian(&eta, tol.fd_step) else {
            status = FitStatus::NonFinite;
            break;
        };
        let mut dir = newton_direction(&h, &ge[..d]);
        let dn = dir.amax();
        if dn > tol.step_cap {
            dir *= tol.step_cap / dn;
        }
        let slope: f64 = (0..d).map(|i| dir[i] * ge[i]).sum();

        // When the predicted decrease is below the resolution of `f`, Armijo
        // cannot tell steps apart; the full step is taken if it shrinks the gradient.
        let full_step = || {
            let mut trial = eta;
            for i in 0..d {
                trial[i] += dir[i];
            }
            let (ft, get, gtt) = prob.eval(&trial);
            (ft.is_finite() && ft <= f + 1e-12 * f.abs().max(1.0) && max_norm(&get[..d]) < gn)
                .then_some((trial, ft, get, gtt))
        };
        let mut accepted = None;
        if -slope <= 64.0 * f64::EPSILON * f.abs().max(1.0) {
            accepted = full_step();
        }
        let mut t = 1.0;
        for _ in 0..60 {
            if accepted.is_some() {
                break;
            }
            let mut trial = eta;
            for i in 0..d {
                trial[i] += t * dir[i];
            }
            let (ft, get, gtt) = prob.eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft, get, gtt));
                break;
            }
            t *= 0.5;
        }
        if accepted.is_none() {
            accepted = full_step();
        }
        match accepted {
            Some((e, fv, g1, g2)) => {
                let moved = (0..d).any(|i| e[i] != eta[i]);
                eta = e;
                f = fv;
                ge = g1;
                gt = g2;
                if !moved {
                    status = if gn <= tol.gradient {
                        FitStatus::Converged
                    } else {
                        FitStatus::LineSearchFailed
                    };
                    break;
                }
            }
            None => {
                status = if gn <= tol.gradient {
                    FitStatus::Converged
                } else {
                    FitStatus::LineSearchFailed
                };
                break;
            }
        }
    }
    if status == FitStatus::IterationLimit
        && max_norm(&ge[..d]) <= tol.gradient
        && max_norm(&gt[..d]) <= tol.gradient
    {
        status = FitStatus::Converged;
    }

    let mut min_curvature = f64::NAN;
    if status == FitStatus::Converged {
        match prob.hessian(&eta, tol.fd_step) {
            Some(h) => {
                min_curvature = min_eigenvalue(&h);
                if !(min_curvature > 0.0) {
                    status = FitStatus::NotMinimum;
                }
            }
            None => status = FitStatus::NonFinite,
        }
    }
    let th = prob.theta(&eta);
    Ok(FitResult {
        theta_hat: Theta(th[..d].to_vec()),
        objective: f,
        gradient_norm: max_norm(&gt[..d]),
        eta_gradient_norm: max_norm(&ge[..d]),
        converged: status == FitStatus::Converged,
        status,
        min_curvature,
        iterations,
        n_evals: prob.evals.get(),
        kind: FitKind::Local,
    })
}

/// Uniform starts: `count` draws from the box given by per-coordinate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartBox {
    pub count: usize,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSpec {
    pub boxes: Vec<StartBox>,
    pub seed: u64,
}

/// Smallest scale a start may take.
const MIN_START_SCALE: f64 = 1e-12;

impl StartSpec {
    /// 25 scale starts on `[0, 0.1]` and 75 on `(0.1, 10]`; location
    /// coordinates are drawn over the data range.
    pub fn standard(family: &Family, data: &[f64], seed: u64) -> StartSpec {
        let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
        let make = |count: usize, scale: (f64, f64)| StartBox {
            count,
            bounds: (0..family.dim())
                .map(|i| if family.is_scale_coordinate(i) { scale } else { (lo, hi) })
                .collect(),
        };
        StartSpec {
            boxes: vec![make(25, (0.0, 0.1)), make(75, (0.1, 10.0))],
            seed,
        }
    }

    pub fn validate(&self, family: &Family) -> Result<()> {
        if self.boxes.is_empty() {
            return Err(Error::InvalidInput("start specification has no boxes".into()));
        }
        for b in &self.boxes {
            if b.count == 0 {
                return Err(Error::InvalidInput("start box counts must be positive".into()));
            }
            if b.bounds.len() != family.dim() {
                return Err(Error::Dimension {
                    expected: family.dim(),
                    got: b.bounds.len(),
                });
            }
            for (i, &(lo, hi)) in b.bounds.iter().enumerate() {
                if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidInput(format!("start interval [{lo}, {hi}] is invalid")));
                }
                if family.is_scale_coordinate(i) && hi <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "start interval [{lo}, {hi}] lies outside the positive scale domain"
                    )));
                }
            }
        }
        Ok(())
    }

    /// All starts in box order.
    pub fn draw(&self, family: &Family) -> Vec<Theta> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for b in &self.boxes {
            for _ in 0..b.count {
                let th = b
                    .bounds
                    .iter()
                    .enumerate()
                    .map(|(i, &(lo, hi))| {
                        let v = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                        if family.is_scale_coordinate(i) {
                            v.max(MIN_START_SCALE)
                        } else {
                            v
                        }
                    })
                    .collect();
                out.push(Theta(th));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.boxes.iter().map(|b| b.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartFailure {
    pub index: usize,
    pub start: Vec<f64>,
    pub reason: String,
}

/// A distinct local minimum found by the multistart search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimum {
    pub theta: Theta,
    pub objective: f64,
    /// Number of starts that converged here.
    pub hits: usize,
    /// Index of the first start that converged here.
    pub first_start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartResult {
    pub best: FitResult,
    /// Distinct local minima in increasing objective order.
    pub minima: Vec<LocalMinimum>,
    pub failures: Vec<StartFailure>,
    pub n_starts: usize,
}

/// Whether two parameter vectors agree to 1e-6 relative.
pub(crate) fn same_point(family: &Family, a: &[f64], b: &[f64]) -> bool {
    (0..family.dim()).all(|i| {
        if family.is_scale_coordinate(i) {
            (a[i].ln() - b[i].ln()).abs() <= 1e-6
        } else {
            (a[i] - b[i]).abs() <= 1e-6 * a[i].abs().max(b[i].abs()).max(1.0)
        }
    })
}

/// Orders fits by objective; near-ties go to the larger scale, then to the earlier start.
fn better(family: &Family, a: (&FitResult, usize), b: (&FitResult, usize)) -> bool {
    let (fa, fb) = (a.0.objective, b.0.objective);
    let tie = (fa - fb).abs() <= 1e-12 * fa.abs().max(fb.abs()).max(1.0);
    if !tie {
        return fa < fb;
    }
    if let Some(k) = family.scale_index() {
        let (sa, sb) = (a.0.theta_hat[k], b.0.theta_hat[k]);
        if sa != sb {
            return sa > sb;
        }
    }
    a.1 < b.1
}

pub fn multistart_global<O: Objective>(obj: &O, starts: &StartSpec, tol: &Tolerances) -> Result<MultistartResult> {
    let family = *obj.family();
    starts.validate(&family)?;
    let points = starts.draw(&family);
    let fits: Vec<std::result::Result<FitResult, String>> = points
        .par_iter()
        .map(|s| match local_minimize(obj, s, tol) {
            Ok(fit) if fit.converged => Ok(fit),
            Ok(fit) => Err(format!("{:?} after {} iterations", fit.status, fit.iterations)),
            Err(e) => Err(e.to_string()),
        })
        .collect();

    let mut failures = Vec::new();
    let mut best: Option<(FitResult, usize)> = None;
    let mut minima: Vec<LocalMinimum> = Vec::new();
    for (i, r) in fits.into_iter().enumerate() {
        match r {
            Err(reason) => failures.push(StartFailure {
                index: i,
                start: points[i].0.clone(),
                reason,
            }),
            Ok(fit) => {
                match minima
                    .iter_mut()
                    .find(|m| same_point(&family, &m.theta.0, &fit.theta_hat.0))
                {
                    Some(m) => {
                        m.hits += 1;
                        if fit.objective < m.objective {
                            m.objective = fit.objective;
                            m.theta = fit.theta_hat.clone();
                        }
                    }
                    None => minima.push(LocalMinimum {
                        theta: fit.theta_hat.clone(),
                        objective: fit.objective,
                        hits: 1,
                        first_start: i,
                    }),
                }
                let replace = match &best {
                    None => true,
                    Some((b, j)) => better(&family, (&fit, i), (b, *j)),
                };
                if replace {
                    best = Some((fit, i));
                }
            }
        }
    }
    let Some((mut best, _)) = best else {
        return Err(Error::GlobalSearchFailed { failures });
    };
    best.kind = FitKind::GlobalMultistart;
    minima.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(a.first_start.cmp(&b.first_start)));
    Ok(MultistartResult {
        best,
        minima,
        failures,
        n_starts: points.len(),
    })
}

/// A descending bridge-parameter grid from 1 to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values[0] != 1.0 || *values.last().unwrap() != 0.0 {
            return Err(Error::InvalidInput("lambda grid must start at 1 and end at 0".into()));
        }
        if values.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidInput("lambda grid must be strictly decreasing".into()));
        }
        Ok(LambdaGrid(values))
    }

    /// `{1, (K−1)/K, …, 0}`.
    pub fn uniform(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidInput("lambda grid needs at least one step".into()));
        }
        Self::new((0..=steps).map(|i| (steps - i) as f64 / steps as f64).collect())
    }

    /// The step-0.1 grid.
    pub fn standard() -> Self {
        Self::uniform(10).expect("valid grid")
    }

    /// Inserts an extra point (e.g. `1 − n^{-1/2}`) keeping the order.
    pub fn with_point(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidInput(format!("extra grid point {lambda} must lie in (0, 1)")));
        }
        if !self.0.iter().any(|&l| (l - lambda).abs() < 1e-12) {
            let pos = self.0.iter().position(|&l| l < lambda).unwrap();
            self.0.insert(pos, lambda);
        }
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_step(&self) -> f64 {
        self.0.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LambdaGrid::new(v)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(g: LambdaGrid) -> Self {
        g.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    pub alpha: f64,
    /// Grid points solved so far, descending from 1.
    pub lambdas: Vec<f64>,
    pub fits: Vec<FitResult>,
    pub max_step: f64,
    /// Distinct minima of the DPD multistart search.
    pub dpd_minima: Vec<LocalMinimum>,
}

impl ChainPath {
    pub fn estimate_at(&self, lambda: f64) -> Option<&Theta> {
        self.lambdas
            .iter()
            .position(|&l| (l - lambda).abs() < 1e-12)
            .map(|i| &self.fits[i].theta_hat)
    }

    pub fn endpoint(&self) -> Option<&FitResult> {
        self.fits.last()
    }
}

/// DPD multistart fit, then warm-started local fits down the grid.
pub fn chain_fit(
    family: &Family,
    data: &[f64],
    alpha: f64,
    grid: &LambdaGrid,
    starts: &StartSpec,
    tol: &Tolerances,
) -> Result<ChainPath> {
    let lambdas = grid.values();
    let dpd = SampleObjective::new(*family, data, BridgeConfig::new(alpha, lambdas[0])?)?;
    let global = multistart_global(&dpd, starts, tol)?;
    let mut first = global.best;
    first.kind = FitKind::GlobalMultistart;
    let mut path = ChainPath {
        alpha,
        lambdas: vec![lambdas[0]],
        fits: vec![first],
        max_step: grid.max_step(),
        dpd_minima: global.minima,
    };
    for &lambda in &lambdas[1..] {
        let obj = SampleObjective::new(*family, data, BridgeConfig::new(alpha, lambda)?)?;
        let prev = path.fits.last().unwrap().theta_hat.clone();
        let step = match local_minimize(&obj, &prev, tol) {
            Ok(fit) if fit.converged => fit,
            Ok(fit) => {
                return Err(Error::ChainBroken {
                    lambda,
                    reason: format!("local fit ended with {:?} after {} iterations", fit.status, fit.iterations),
                    partial: Box::new(path),
                })
            }
            Err(e) => {
                return Err(Error::ChainBroken {
                    lambda,
                    reason: e.to_string(),
                    partial: Box::new(path),
                })
            }
        };
        path.lambdas.push(lambda);
        path.fits.push(FitResult {
            kind: FitKind::ChainStep,
            ..step
        });
    }
    Ok(path)
}

/// Closed-form maximum likelihood estimate, used as an interior reference start.
pub fn mle(family: &Family, data: &[f64]) -> Result<Theta> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let rms = |c: f64| (data.iter().map(|x| (x - c).powi(2)).sum::<f64>() / n).sqrt();
    let th = match *family {
        Family::ExponentialScale => vec![mean],
        Family::NormalMean { .. } => vec![mean],
        Family::NormalScale { mean: m } => vec![rms(m)],
        Family::NormalLocationScale => vec![mean, rms(mean)],
    };
    family.validate(&th).map_err(|_| {
        Error::InvalidInput(format!("maximum likelihood estimate {th:?} is outside the parameter domain"))
    })?;
    Ok(Theta(th))
}
