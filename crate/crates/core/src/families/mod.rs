//! Parametric model families and their model-side integrals.
//!
//! Every family exposes its log-density, likelihood score `u(x) = d/dθ log f(x)`
//! and score Jacobian, plus the weighted model integrals
//!
//! * `P0 = ∫ f^{1+α}`
//! * `R0 = ∫ f^{1+α} u`
//! * `Q0 = ∫ f^{1+α} u uᵀ`
//! * `S0 = ∫ f^{1+α} ∇u`
//!
//! in closed form. [`quadrature_moment`](Family::quadrature_moment) computes
//! the same integrals numerically and serves as the oracle for the closed
//! forms. Normal families are parameterized by the standard deviation.

pub mod quadrature;

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use quadrature::{integrate, QuadOptions};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A parameter vector in the family's natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>) -> Self {
        Theta(values)
    }

    pub fn scalar(v: f64) -> Self {
        Theta(vec![v])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl From<Vec<f64>> for Theta {
    fn from(v: Vec<f64>) -> Self {
        Theta(v)
    }
}

impl std::ops::Index<usize> for Theta {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Exponential with mean `σ`; `θ = (σ)`.
    ExponentialScale,
    /// Normal; `θ = (μ, σ)`.
    NormalLocationScale,
    /// Normal with known standard deviation; `θ = (μ)`.
    NormalMean { sigma: f64 },
    /// Normal with known mean; `θ = (σ)`.
    NormalScale { mean: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMomentKind {
    P0,
    R0,
    Q0,
    S0,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Moment {
    Scalar(f64),
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl Moment {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Moment::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    /// Entries in column-major order.
    pub fn entries(&self) -> Vec<f64> {
        match self {
            Moment::Scalar(v) => vec![*v],
            Moment::Vector(v) => v.iter().copied().collect(),
            Moment::Matrix(m) => m.iter().copied().collect(),
        }
    }
}

/// All four model integrals at one `(θ, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMoments {
    pub log_p0: f64,
    pub p0: f64,
    pub r0: DVector<f64>,
    pub q0: DMatrix<f64>,
    pub s0: DMatrix<f64>,
}

/// Density, score and score Jacobian at one point, for `p ≤ 2`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointEval {
    pub logf: f64,
    pub u: [f64; 2],
    pub du: [[f64; 2]; 2],
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::ExponentialScale => write!(f, "exponential-scale"),
            Family::NormalLocationScale => write!(f, "normal-location-scale"),
            Family::NormalMean { sigma } => write!(f, "normal-mean(sd={sigma})"),
            Family::NormalScale { mean } => write!(f, "normal-scale(mean={mean})"),
        }
    }
}

impl Family {
    pub fn dim(&self) -> usize {
        match self {
            Family::NormalLocationScale => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::ExponentialScale => "exponential-scale",
            Family::NormalLocationScale => "normal-location-scale",
            Family::NormalMean { .. } => "normal-mean",
            Family::NormalScale { .. } => "normal-scale",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::ExponentialScale | Family::NormalScale { .. } => &["sigma"],
            Family::NormalLocationScale => &["mu", "sigma"],
            Family::NormalMean { .. } => &["mu"],
        }
    }

    /// Whether coordinate `i` is a positive scale (optimized on the log scale).
    pub fn is_scale_coordinate(&self, i: usize) -> bool {
        match self {
            Family::ExponentialScale | Family::NormalScale { .. } => i == 0,
            Family::NormalLocationScale => i == 1,
            Family::NormalMean { .. } => false,
        }
    }

    /// Index of the scale coordinate, if the family has one.
    pub fn scale_index(&self) -> Option<usize> {
        (0..self.dim()).find(|&i| self.is_scale_coordinate(i))
    }

    pub fn is_normal(&self) -> bool {
        !matches!(self, Family::ExponentialScale)
    }

    /// Support as a closed interval (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Family::ExponentialScale => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x >= lo && x <= hi
    }

    pub fn validate(&self, theta: &[f64]) -> Result<()> {
        match *self {
            Family::NormalMean { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return Err(Error::InvalidInput(format!(
                    "fixed standard deviation must be positive, got {sigma}"
                )))
            }
            Family::NormalScale { mean } if !mean.is_finite() => {
                return Err(Error::InvalidInput(format!("fixed mean must be finite, got {mean}")))
            }
            _ => {}
        }
        if theta.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        let names = self.param_names();
        for (i, &v) in theta.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain {
                    coordinate: i,
                    name: names[i],
                    value: v,
                    reason: "must be finite",
                });
            }
            if self.is_scale_coordinate(i) && v <= 0.0 {
                return Err(Error::Domain {
                    coordinate: i,
                    name: names[i],
                    value: v,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }

    /// Location and scale of the density at `θ`.
    pub(crate) fn loc_scale(&self, th: &[f64]) -> (f64, f64) {
        match *self {
            Family::ExponentialScale => (0.0, th[0]),
            Family::NormalLocationScale => (th[0], th[1]),
            Family::NormalMean { sigma } => (th[0], sigma),
            Family::NormalScale { mean } => (mean, th[0]),
        }
    }

    /// Point evaluation without validation; `None` outside the support.
    #[inline]
    pub(crate) fn eval_point(&self, th: &[f64], x: f64) -> Option<PointEval> {
        let mut u = [0.0; 2];
        let mut du = [[0.0; 2]; 2];
        let logf = match *self {
            Family::ExponentialScale => {
                if x < 0.0 {
                    return None;
                }
                let s = th[0];
                u[0] = (x - s) / (s * s);
                du[0][0] = -2.0 * x / (s * s * s) + 1.0 / (s * s);
                -x / s - s.ln()
            }
            Family::NormalMean { sigma } => {
                let z = x - th[0];
                let v = sigma * sigma;
                u[0] = z / v;
                du[0][0] = -1.0 / v;
                -0.5 * LN_2PI - sigma.ln() - 0.5 * z * z / v
            }
            Family::NormalScale { mean } => {
                let s = th[0];
                let z = x - mean;
                let (s2, z2) = (s * s, z * z);
                u[0] = z2 / (s2 * s) - 1.0 / s;
                du[0][0] = 1.0 / s2 - 3.0 * z2 / (s2 * s2);
                -0.5 * LN_2PI - s.ln() - 0.5 * z2 / s2
            }
            Family::NormalLocationScale => {
                let (m, s) = (th[0], th[1]);
                let z = x - m;
                let (s2, z2) = (s * s, z * z);
                u[0] = z / s2;
                u[1] = z2 / (s2 * s) - 1.0 / s;
                du[0][0] = -1.0 / s2;
                du[0][1] = -2.0 * z / (s2 * s);
                du[1][0] = du[0][1];
                du[1][1] = 1.0 / s2 - 3.0 * z2 / (s2 * s2);
                -0.5 * LN_2PI - s.ln() - 0.5 * z2 / s2
            }
        };
        Some(PointEval { logf, u, du })
    }

    /// `log f_θ(x)`; `-∞` outside the support.
    pub fn log_density(&self, theta: &Theta, x: f64) -> Result<f64> {
        self.validate(&theta.0)?;
        Ok(self
            .eval_point(&theta.0, x)
            .map_or(f64::NEG_INFINITY, |p| p.logf))
    }

    pub fn density(&self, theta: &Theta, x: f64) -> Result<f64> {
        self.log_density(theta, x).map(f64::exp)
    }

    fn checked_point(&self, theta: &Theta, x: f64) -> Result<PointEval> {
        self.validate(&theta.0)?;
        self.eval_point(&theta.0, x).ok_or(Error::Support {
            x,
            family: self.name(),
        })
    }

    pub fn score(&self, theta: &Theta, x: f64) -> Result<DVector<f64>> {
        let p = self.checked_point(theta, x)?;
        Ok(DVector::from_column_slice(&p.u[..self.dim()]))
    }

    pub fn score_jacobian(&self, theta: &Theta, x: f64) -> Result<DMatrix<f64>> {
        let p = self.checked_point(theta, x)?;
        let d = self.dim();
        Ok(DMatrix::from_fn(d, d, |i, j| p.du[i][j]))
    }

    /// Closed-form `log ∫ f_θ^{1+α}`.
    pub(crate) fn log_p0_unchecked(&self, th: &[f64], alpha: f64) -> f64 {
        let g = 1.0 + alpha;
        let (_, s) = self.loc_scale(th);
        match self {
            Family::ExponentialScale => -alpha * s.ln() - g.ln(),
            _ => -0.5 * alpha * LN_2PI - alpha * s.ln() - 0.5 * g.ln(),
        }
    }

    pub(crate) fn moments_unchecked(&self, th: &[f64], alpha: f64) -> ModelMoments {
        let g = 1.0 + alpha;
        let log_p0 = self.log_p0_unchecked(th, alpha);
        let p0 = log_p0.exp();
        let (_, s) = self.loc_scale(th);
        let s2 = s * s;
        let d = self.dim();
        let mut r0 = DVector::zeros(d);
        let mut q0 = DMatrix::zeros(d, d);
        let mut s0 = DMatrix::zeros(d, d);
        match self {
            Family::ExponentialScale => {
                let m = s / g;
                r0[0] = p0 * (m - s) / s2;
                q0[(0, 0)] = p0 * (2.0 * m * m - 2.0 * m * s + s2) / (s2 * s2);
                s0[(0, 0)] = p0 * (-2.0 * m / (s2 * s) + 1.0 / s2);
            }
            Family::NormalMean { .. } => {
                q0[(0, 0)] = p0 / (g * s2);
                s0[(0, 0)] = -p0 / s2;
            }
            Family::NormalScale { .. } => {
                r0[0] = p0 * (1.0 / g - 1.0) / s;
                q0[(0, 0)] = p0 * (3.0 / (g * g) - 2.0 / g + 1.0) / s2;
                s0[(0, 0)] = p0 * (1.0 - 3.0 / g) / s2;
            }
            Family::NormalLocationScale => {
                r0[1] = p0 * (1.0 / g - 1.0) / s;
                q0[(0, 0)] = p0 / (g * s2);
                q0[(1, 1)] = p0 * (3.0 / (g * g) - 2.0 / g + 1.0) / s2;
                s0[(0, 0)] = -p0 / s2;
                s0[(1, 1)] = p0 * (1.0 - 3.0 / g) / s2;
            }
        }
        ModelMoments {
            log_p0,
            p0,
            r0,
            q0,
            s0,
        }
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "model moments need alpha > 0, got {alpha}"
            )));
        }
        Ok(())
    }

    /// All closed-form model integrals at `(θ, α)`.
    pub fn model_moments(&self, theta: &Theta, alpha: f64) -> Result<ModelMoments> {
        self.validate(&theta.0)?;
        Self::check_alpha(alpha)?;
        Ok(self.moments_unchecked(&theta.0, alpha))
    }

    pub fn model_moment(&self, theta: &Theta, alpha: f64, kind: ModelMomentKind) -> Result<Moment> {
        let m = self.model_moments(theta, alpha)?;
        Ok(match kind {
            ModelMomentKind::P0 => Moment::Scalar(m.p0),
            ModelMomentKind::R0 => Moment::Vector(m.r0),
            ModelMomentKind::Q0 => Moment::Matrix(m.q0),
            ModelMomentKind::S0 => Moment::Matrix(m.s0),
        })
    }

    /// Interior points where integrands of this family change character.
    pub(crate) fn breakpoints(&self, th: &[f64], alpha: f64) -> Vec<f64> {
        let (loc, s) = self.loc_scale(th);
        match self {
            Family::ExponentialScale => {
                let m = s / (1.0 + alpha);
                [0.0, 1.0, 3.0, 10.0, 30.0].iter().map(|k| k * m).collect()
            }
            _ => {
                let m = s / (1.0 + alpha).sqrt();
                let mut v = vec![loc];
                for k in [1.0, 3.0, 10.0, 30.0] {
                    v.push(loc - k * m);
                    v.push(loc + k * m);
                }
                v
            }
        }
    }

    /// Integrates `f_θ^{1+α}·h(point)` over the support.
    pub(crate) fn integrate_weighted<H: Fn(&PointEval) -> f64>(
        &self,
        th: &[f64],
        alpha: f64,
        h: H,
        opts: &QuadOptions,
    ) -> Result<f64> {
        let g = 1.0 + alpha;
        let (lo, hi) = self.support();
        let (_, s) = self.loc_scale(th);
        let integrand = |x: f64| match self.eval_point(th, x) {
            Some(p) => {
                let w = (g * p.logf).exp();
                if w == 0.0 {
                    0.0
                } else {
                    w * h(&p)
                }
            }
            None => 0.0,
        };
        let breaks = self.breakpoints(th, alpha);
        Ok(integrate(integrand, lo, hi, &breaks, s / g.sqrt(), opts)?.value)
    }

    /// Quadrature evaluation of a model integral, independent of the closed forms.
    pub fn quadrature_moment(
        &self,
        theta: &Theta,
        alpha: f64,
        kind: ModelMomentKind,
        tol: f64,
    ) -> Result<Moment> {
        self.validate(&theta.0)?;
        Self::check_alpha(alpha)?;
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        let opts = QuadOptions {
            abs_tol: tol,
            ..QuadOptions::default()
        };
        let th = &theta.0;
        let d = self.dim();
        Ok(match kind {
            ModelMomentKind::P0 => Moment::Scalar(self.integrate_weighted(th, alpha, |_| 1.0, &opts)?),
            ModelMomentKind::R0 => {
                let mut v = DVector::zeros(d);
                for i in 0..d {
                    v[i] = self.integrate_weighted(th, alpha, |p| p.u[i], &opts)?;
                }
                Moment::Vector(v)
            }
            ModelMomentKind::Q0 | ModelMomentKind::S0 => {
                let mut m = DMatrix::zeros(d, d);
                for i in 0..d {
                    for j in i..d {
                        let v = if kind == ModelMomentKind::Q0 {
                            self.integrate_weighted(th, alpha, |p| p.u[i] * p.u[j], &opts)?
                        } else {
                            self.integrate_weighted(th, alpha, |p| p.du[i][j], &opts)?
                        };
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                Moment::Matrix(m)
            }
        })
    }

    /// Location of the mode.
    pub fn mode(&self, theta: &Theta) -> f64 {
        let (loc, _) = self.loc_scale(&theta.0);
        match self {
            Family::ExponentialScale => 0.0,
            _ => loc,
        }
    }

    /// `R0 / P0`, the score mean under the `f^{1+α}`-tilted density.
    #[inline]
    pub(crate) fn normalized_r0(&self, th: &[f64], alpha: f64) -> [f64; 2] {
        let (_, s) = self.loc_scale(th);
        let r = (1.0 / (1.0 + alpha) - 1.0) / s;
        match self {
            Family::ExponentialScale | Family::NormalScale { .. } => [r, 0.0],
            Family::NormalLocationScale => [0.0, r],
            Family::NormalMean { .. } => [0.0, 0.0],
        }
    }

    /// `∫ f_θ^{1+α}` for the standardized member (location 0, scale 1).
    pub(crate) fn standard_p0(&self, alpha: f64) -> f64 {
        match self {
            Family::ExponentialScale => 1.0 / (1.0 + alpha),
            _ => (-0.5 * alpha * LN_2PI).exp() / (1.0 + alpha).sqrt(),
        }
    }

    /// Standardized density at zero: `1` for the exponential, `1/√(2π)` for normals.
    pub(crate) fn standard_density_at_zero(&self) -> f64 {
        match self {
            Family::ExponentialScale => 1.0,
            _ => 1.0 / (2.0 * PI).sqrt(),
        }
    }
}
