//! Objective landscapes and diagnostics for minima near the `σ → 0` boundary.

use serde::{Deserialize, Serialize};

use super::{local_minimize, mle, multistart_global, FitKind, FitResult, MultistartResult, Objective, SampleObjective, StartSpec, Tolerances};
use crate::divergence::{population_objective, BridgeConfig, GSpec};
use crate::error::{Error, Result};
use crate::families::{Family, Theta};

/// `n` points log-spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

#[derive(Debug, Clone, Copy)]
pub enum ProfileSource<'a> {
    Sample(&'a [f64]),
    Population(&'a GSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub theta: Theta,
    pub objective: f64,
}

/// Objective values over a parameter grid.
pub fn profile_objective(
    family: &Family,
    source: ProfileSource<'_>,
    cfg: &BridgeConfig,
    grid: &[Theta],
) -> Result<Vec<ProfilePoint>> {
    let sample = match source {
        ProfileSource::Sample(data) => Some(SampleObjective::new(*family, data, *cfg)?),
        ProfileSource::Population(g) => {
            g.validate()?;
            None
        }
    };
    grid.iter()
        .map(|th| {
            family.validate(&th.0)?;
            let objective = match (&sample, source) {
                (Some(obj), _) => obj.eval(&th.0).0,
                (None, ProfileSource::Population(g)) => population_objective(g, family, th, cfg)?,
                _ => unreachable!(),
            };
            Ok(ProfilePoint {
                theta: th.clone(),
                objective,
            })
        })
        .collect()
}

/// `(1+α) f^α(0) / (α ∫ f^{1+α})` for the standard normal density.
///
/// With `n` above this threshold the DPD objective grows without bound along
/// every ray `σ → 0`.
pub fn dpd_sample_size_threshold(family: &Family, alpha: f64) -> Option<f64> {
    if !family.is_normal() || !(alpha > 0.0) {
        return None;
    }
    let f0a = family.standard_density_at_zero().powf(alpha);
    Some((1.0 + alpha) * f0a / (alpha * family.standard_p0(alpha)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    pub theta: Theta,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousReport {
    pub family: Family,
    pub alpha: f64,
    pub lambda: f64,
    /// Local fit started from the maximum likelihood estimate.
    pub interior: FitResult,
    /// Best point found near the boundary.
    pub witness: Option<RayPoint>,
    /// Whether the witness is a converged local minimum (otherwise a ray point).
    pub witness_is_minimum: bool,
    pub spurious: bool,
    /// Objective along `σ = 10^{-k}`, `k = 1, …, 12`, at the location of the witness.
    pub ray: Vec<RayPoint>,
    pub sample_size: usize,
    /// DPD sample-size threshold, reported for normal families at `λ = 1`.
    pub dpd_threshold: Option<f64>,
}

const SCAN_POINTS: usize = 800;
const SCAN_FLOOR: f64 = 1e-12;

fn scale_theta(family: &Family, loc: f64, s: f64) -> Theta {
    match family {
        Family::NormalLocationScale => Theta(vec![loc, s]),
        _ => Theta::scalar(s),
    }
}

/// Lowest point of a log-grid scan of the scale over `[1e-12, upper]`.
fn scale_scan(obj: &SampleObjective<'_>, upper: f64) -> Option<RayPoint> {
    let mut best: Option<RayPoint> = None;
    for s in log_grid(SCAN_FLOOR, upper.max(SCAN_FLOOR * 10.0), SCAN_POINTS) {
        let v = obj.eval(&[s]).0;
        if v.is_finite() && best.as_ref().is_none_or(|b| v < b.objective) {
            best = Some(RayPoint {
                theta: Theta::scalar(s),
                objective: v,
            });
        }
    }
    best
}

fn unsupported(family: &Family) -> Error {
    Error::Unsupported(format!(
        "boundary diagnostics need a scale or location-scale family, got {}",
        family.name()
    ))
}

/// A converged local minimum with scale below a tenth of `reference`, for
/// the one-parameter scale families.
pub fn boundary_fit(
    family: &Family,
    data: &[f64],
    cfg: &BridgeConfig,
    reference: f64,
    tol: &Tolerances,
) -> Result<Option<FitResult>> {
    if !matches!(family, Family::ExponentialScale | Family::NormalScale { .. }) {
        return Err(unsupported(family));
    }
    let obj = SampleObjective::new(*family, data, *cfg)?;
    let Some(seed) = scale_scan(&obj, 0.1 * reference) else {
        return Ok(None);
    };
    match local_minimize(&obj, &seed.theta, tol) {
        Ok(fit) if fit.converged && fit.theta_hat[0] < 0.1 * reference => Ok(Some(FitResult {
            kind: FitKind::Boundary,
            ..fit
        })),
        _ => Ok(None),
    }
}

pub fn spurious_report(family: &Family, data: &[f64], cfg: &BridgeConfig, tol: &Tolerances) -> Result<SpuriousReport> {
    if matches!(family, Family::NormalMean { .. }) {
        return Err(unsupported(family));
    }
    let obj = SampleObjective::new(*family, data, *cfg)?;
    let start = mle(family, data)?;
    let interior = local_minimize(&obj, &start, tol)?;
    let k = family.scale_index().expect("scale family");
    let reference = interior.theta_hat[k].max(start[k]);

    let mut witness: Option<RayPoint> = None;
    let mut witness_is_minimum = false;
    let mut ray_loc = 0.0;
    match family {
        Family::NormalLocationScale => {
            for &x in data {
                let v = obj.eval(&[x, SCAN_FLOOR]).0;
                if v.is_finite() && witness.as_ref().is_none_or(|w| v < w.objective) {
                    witness = Some(RayPoint {
                        theta: Theta(vec![x, SCAN_FLOOR]),
                        objective: v,
                    });
                    ray_loc = x;
                }
            }
        }
        _ => {
            if let Some(fit) = boundary_fit(family, data, cfg, reference, tol)? {
                witness = Some(RayPoint {
                    theta: fit.theta_hat,
                    objective: fit.objective,
                });
                witness_is_minimum = true;
            } else {
                witness = scale_scan(&obj, 0.1 * reference);
            }
        }
    }
    let ray = (1..=12)
        .map(|p| {
            let th = scale_theta(family, ray_loc, 10f64.powi(-p));
            RayPoint {
                objective: obj.eval(&th.0).0,
                theta: th,
            }
        })
        .collect();
    let margin = 1e-12 * interior.objective.abs().max(1.0);
    let spurious = witness
        .as_ref()
        .is_some_and(|w| w.objective < interior.objective - margin);
    Ok(SpuriousReport {
        family: *family,
        alpha: cfg.alpha,
        lambda: cfg.lambda,
        interior,
        witness,
        witness_is_minimum,
        spurious,
        ray,
        sample_size: data.len(),
        dpd_threshold: if cfg.lambda == 1.0 {
            dpd_sample_size_threshold(family, cfg.alpha)
        } else {
            None
        },
    })
}

fn bisect<F: Fn(f64) -> Result<bool>>(flag: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = flag(a)?;
    if fa == flag(b)? {
        return Err(Error::InvalidInput(format!(
            "spurious flag does not change between {lo} and {hi}"
        )));
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if flag(m)? == fa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Robustness parameter where the spurious flag changes at fixed `λ`, by bisection on `[lo, hi]`.
pub fn spurious_alpha_boundary(
    family: &Family,
    data: &[f64],
    lambda: f64,
    (lo, hi): (f64, f64),
    tol: f64,
    opt: &Tolerances,
) -> Result<f64> {
    bisect(
        |a| Ok(spurious_report(family, data, &BridgeConfig::new(a, lambda)?, opt)?.spurious),
        lo,
        hi,
        tol,
    )
}

/// Bridge parameter where the spurious flag changes at fixed `α`, by bisection on `[lo, hi]`.
pub fn spurious_lambda_boundary(
    family: &Family,
    data: &[f64],
    alpha: f64,
    (lo, hi): (f64, f64),
    tol: f64,
    opt: &Tolerances,
) -> Result<f64> {
    bisect(
        |l| Ok(spurious_report(family, data, &BridgeConfig::new(alpha, l)?, opt)?.spurious),
        lo,
        hi,
        tol,
    )
}

/// Multistart search combined with the boundary scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFit {
    pub multistart: MultistartResult,
    pub boundary: Option<FitResult>,
    pub best: FitResult,
}

pub fn global_fit(
    family: &Family,
    data: &[f64],
    cfg: &BridgeConfig,
    starts: &StartSpec,
    tol: &Tolerances,
) -> Result<GlobalFit> {
    let obj = SampleObjective::new(*family, data, *cfg)?;
    let multistart = multistart_global(&obj, starts, tol)?;
    let boundary = match family {
        Family::ExponentialScale | Family::NormalScale { .. } => {
            let reference = multistart.best.theta_hat[0].max(mle(family, data)?[0]);
            boundary_fit(family, data, cfg, reference, tol)?
        }
        _ => None,
    };
    let best = match &boundary {
        Some(b) if b.objective < multistart.best.objective => b.clone(),
        _ => multistart.best.clone(),
    };
    Ok(GlobalFit {
        multistart,
        boundary,
        best,
    })
}
