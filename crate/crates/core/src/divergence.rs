//! Bridge density power divergence objectives.
//!
//! With `t1 = ∫f^{1+α}`, `t2 = ∫g f^α` and `λ̄ = 1 − λ` the θ-dependent part
//! of the divergence is
//!
//! ```text
//! (1/λ̄) log(λ + λ̄ t1) − (1/λ̄)((1+α)/α) log(λ + λ̄ t2)
//! ```
//!
//! The sample objective replaces `t2` by the mean of `f^α(X_i)`. `λ = 1` uses
//! the DPD form `t1 − (1 + 1/α) t2` (the limit differs only by the constant
//! `1/α`), and `α = 0` is the negative mean log-likelihood for every `λ`.
//!
//! All sums of density powers are accumulated in log space so that the
//! objective stays finite at scales where `f^α` over- or underflows.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::quadrature::{integrate, QuadOptions};
use crate::families::{Family, Theta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub alpha: f64,
    pub lambda: f64,
}

impl BridgeConfig {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidInput(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(BridgeConfig { alpha, lambda })
    }

    pub fn dpd(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    pub fn ldpd(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0)
    }

    pub fn lambda_bar(&self) -> f64 {
        1.0 - self.lambda
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.alpha, self.lambda).map(|_| ())
    }
}

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `log(λ + λ̄ e^{lt})`.
#[inline]
fn log_bridge(cfg: &BridgeConfig, lt: f64) -> f64 {
    log_add_exp(cfg.lambda.ln(), cfg.lambda_bar().ln() + lt)
}

/// The objective given `log t1` and `log t2`.
#[inline]
fn objective_from_logs(cfg: &BridgeConfig, lt1: f64, lt2: f64) -> f64 {
    let a = cfg.alpha;
    if cfg.lambda == 1.0 {
        lt1.exp() - (1.0 + 1.0 / a) * lt2.exp()
    } else {
        (log_bridge(cfg, lt1) - (1.0 + a) / a * log_bridge(cfg, lt2)) / cfg.lambda_bar()
    }
}

/// Plug-in moments of the sample objective at one θ.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMoments {
    pub t1: f64,
    pub t2_hat: f64,
    pub s_hat: DVector<f64>,
    pub log_t1: f64,
    pub log_t2_hat: f64,
}

/// One pass over the data at `θ`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SampleEval {
    pub value: f64,
    pub residual: [f64; 2],
    pub log_t1: f64,
    pub log_t2: f64,
    /// `Σ f^α u / Σ f^α`.
    pub weighted_score: [f64; 2],
}

impl SampleEval {
    pub fn gradient(&self, alpha: f64) -> [f64; 2] {
        if alpha == 0.0 {
            self.residual
        } else {
            [(1.0 + alpha) * self.residual[0], (1.0 + alpha) * self.residual[1]]
        }
    }
}

/// Unchecked evaluation; callers validate `θ`, data and `cfg`.
///
/// For `α = 0` `residual` holds the gradient `−mean u`.
pub(crate) fn eval_sample(family: &Family, th: &[f64], data: &[f64], cfg: &BridgeConfig) -> SampleEval {
    let n = data.len() as f64;
    let alpha = cfg.alpha;
    if alpha == 0.0 {
        let mut ll = 0.0;
        let mut u = [0.0; 2];
        for &x in data {
            match family.eval_point(th, x) {
                Some(p) => {
                    ll += p.logf;
                    u[0] += p.u[0];
                    u[1] += p.u[1];
                }
                None => {
                    return SampleEval {
                        value: f64::INFINITY,
                        residual: [f64::NAN; 2],
                        log_t1: 0.0,
                        log_t2: f64::NEG_INFINITY,
                        weighted_score: [f64::NAN; 2],
                    }
                }
            }
        }
        return SampleEval {
            value: -ll / n,
            residual: [-u[0] / n, -u[1] / n],
            log_t1: 0.0,
            log_t2: 0.0,
            weighted_score: [u[0] / n, u[1] / n],
        };
    }

    let lt1 = family.log_p0_unchecked(th, alpha);
    let r0bar = family.normalized_r0(th, alpha);

    // Two passes: the running maximum keeps every exponent ≤ 0.
    let mut m = f64::NEG_INFINITY;
    for &x in data {
        if let Some(p) = family.eval_point(th, x) {
            m = m.max(alpha * p.logf);
        }
    }
    let mut s = 0.0;
    let mut su = [0.0; 2];
    if m > f64::NEG_INFINITY {
        for &x in data {
            if let Some(p) = family.eval_point(th, x) {
                let w = (alpha * p.logf - m).exp();
                s += w;
                su[0] += w * p.u[0];
                su[1] += w * p.u[1];
            }
        }
    }
    let lt2 = if s > 0.0 { m + s.ln() - n.ln() } else { f64::NEG_INFINITY };
    let ubar = if s > 0.0 { [su[0] / s, su[1] / s] } else { [0.0; 2] };

    let value = objective_from_logs(cfg, lt1, lt2);
    let c1 = (lt1 - log_bridge(cfg, lt1)).exp();
    let residual = if lt2 == f64::NEG_INFINITY {
        if cfg.lambda == 0.0 {
            [f64::INFINITY; 2]
        } else {
            [c1 * r0bar[0], c1 * r0bar[1]]
        }
    } else {
        let c2 = (lt2 - log_bridge(cfg, lt2)).exp();
        [c1 * r0bar[0] - c2 * ubar[0], c1 * r0bar[1] - c2 * ubar[1]]
    };
    SampleEval {
        value,
        residual,
        log_t1: lt1,
        log_t2: lt2,
        weighted_score: ubar,
    }
}

pub(crate) fn check_inputs(family: &Family, theta: &Theta, data: &[f64], cfg: &BridgeConfig) -> Result<()> {
    cfg.validate()?;
    family.validate(&theta.0)?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if let Some((i, x)) = data.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("observation {} is not finite ({x})", i + 1)));
    }
    Ok(())
}

fn vec_of(family: &Family, v: [f64; 2]) -> DVector<f64> {
    DVector::from_column_slice(&v[..family.dim()])
}

/// Plug-in moments `t1`, `t̂2` and `ŝ = mean f^α u` at `θ`.
pub fn empirical_moments(family: &Family, theta: &Theta, data: &[f64], alpha: f64) -> Result<EmpiricalMoments> {
    let cfg = BridgeConfig::new(alpha, 0.0)?;
    check_inputs(family, theta, data, &cfg)?;
    if alpha == 0.0 {
        return Err(Error::InvalidInput("empirical moments need alpha > 0".into()));
    }
    let e = eval_sample(family, &theta.0, data, &cfg);
    let t2 = e.log_t2.exp();
    Ok(EmpiricalMoments {
        t1: e.log_t1.exp(),
        t2_hat: t2,
        s_hat: vec_of(family, [t2 * e.weighted_score[0], t2 * e.weighted_score[1]]),
        log_t1: e.log_t1,
        log_t2_hat: e.log_t2,
    })
}

/// Sample objective; `+∞` when `λ = 0` and every observation has zero density.
pub fn sample_objective(family: &Family, theta: &Theta, data: &[f64], cfg: &BridgeConfig) -> Result<f64> {
    check_inputs(family, theta, data, cfg)?;
    Ok(eval_sample(family, &theta.0, data, cfg).value)
}

/// Analytic gradient of [`sample_objective`] in `θ`.
pub fn objective_gradient(family: &Family, theta: &Theta, data: &[f64], cfg: &BridgeConfig) -> Result<DVector<f64>> {
    check_inputs(family, theta, data, cfg)?;
    let e = eval_sample(family, &theta.0, data, cfg);
    Ok(vec_of(family, e.gradient(cfg.alpha)))
}

/// `R0/(λ + λ̄ t1) − ŝ/(λ + λ̄ t̂2)`; the gradient is `(1+α)` times this.
pub fn moment_residual(family: &Family, theta: &Theta, data: &[f64], cfg: &BridgeConfig) -> Result<DVector<f64>> {
    check_inputs(family, theta, data, cfg)?;
    if cfg.alpha == 0.0 {
        return Err(Error::InvalidInput("the moment residual needs alpha > 0".into()));
    }
    Ok(vec_of(family, eval_sample(family, &theta.0, data, cfg).residual))
}

/// One mixture component of a data-generating density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Component {
    Model { family: Family, theta: Theta },
    PointMass { location: f64 },
    UniformSlab { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedComponent {
    pub weight: f64,
    #[serde(flatten)]
    pub component: Component,
}

/// A finite mixture standing in for the true density `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSpec {
    pub components: Vec<WeightedComponent>,
}

const QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-12,
    max_evals: 1_000_000,
};

impl Component {
    fn breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Component::Model { family, theta } => out.extend(family.breakpoints(&theta.0, 0.0)),
            Component::PointMass { location } => out.push(*location),
            Component::UniformSlab { lo, hi } => {
                out.push(*lo);
                out.push(*hi);
            }
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Component::Model { family, theta } => family.loc_scale(&theta.0).1,
            Component::PointMass { .. } => 0.0,
            Component::UniformSlab { lo, hi } => hi - lo,
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match self {
            Component::Model { family, theta } => family.eval_point(&theta.0, x).map_or(0.0, |p| p.logf.exp()),
            Component::PointMass { .. } => 0.0,
            Component::UniformSlab { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }
}

impl GSpec {
    pub fn single(family: Family, theta: Theta) -> Self {
        GSpec {
            components: vec![WeightedComponent {
                weight: 1.0,
                component: Component::Model { family, theta },
            }],
        }
    }

    /// `(1 − ε) f_θ + ε δ`.
    pub fn contaminated(family: Family, theta: Theta, eps: f64, contaminant: Component) -> Self {
        GSpec {
            components: vec![
                WeightedComponent {
                    weight: 1.0 - eps,
                    component: Component::Model { family, theta },
                },
                WeightedComponent {
                    weight: eps,
                    component: contaminant,
                },
            ],
        }
    }

    /// Weighted mixture of two specs.
    pub fn mix(a: &GSpec, b: &GSpec, weight_b: f64) -> Self {
        let mut components = Vec::new();
        for c in &a.components {
            components.push(WeightedComponent {
                weight: c.weight * (1.0 - weight_b),
                component: c.component.clone(),
            });
        }
        for c in &b.components {
            components.push(WeightedComponent {
                weight: c.weight * weight_b,
                component: c.component.clone(),
            });
        }
        GSpec { components }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidInput("density spec has no components".into()));
        }
        let mut total = 0.0;
        for c in &self.components {
            if !(0.0..=1.0).contains(&c.weight) {
                return Err(Error::InvalidInput(format!("component weight {} outside [0, 1]", c.weight)));
            }
            total += c.weight;
            match &c.component {
                Component::Model { family, theta } => family.validate(&theta.0)?,
                Component::PointMass { location } if !location.is_finite() => {
                    return Err(Error::InvalidInput("point mass location must be finite".into()))
                }
                Component::UniformSlab { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                    return Err(Error::InvalidInput(format!("slab needs finite lo < hi, got [{lo}, {hi}]")))
                }
                _ => {}
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("component weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn has_point_mass(&self) -> bool {
        self.components
            .iter()
            .any(|c| c.weight > 0.0 && matches!(c.component, Component::PointMass { .. }))
    }

    /// Density of the continuous part.
    pub fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.component.pdf(x)).sum()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for c in &self.components {
            c.component.breakpoints(&mut v);
        }
        v
    }

    fn tail_scale(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.component.scale())
            .fold(0.0, f64::max)
            .max(1e-300)
    }

    fn as_single_model(&self) -> Option<(&Family, &Theta)> {
        match self.components.as_slice() {
            [WeightedComponent {
                component: Component::Model { family, theta },
                ..
            }] => Some((family, theta)),
            _ => None,
        }
    }

    /// `∫ g f_θ^α`, exact for point masses and same-type model components.
    pub fn power_integral(&self, family: &Family, theta: &Theta, alpha: f64) -> Result<f64> {
        let th = &theta.0;
        let fa = |x: f64| family.eval_point(th, x).map_or(0.0, |p| (alpha * p.logf).exp());
        let mut total = 0.0;
        for c in &self.components {
            if c.weight == 0.0 {
                continue;
            }
            let v = match &c.component {
                Component::PointMass { location } => fa(*location),
                Component::UniformSlab { lo, hi } => {
                    let mut br = family.breakpoints(th, alpha);
                    br.push(*lo);
                    br.push(*hi);
                    integrate(fa, *lo, *hi, &br, hi - lo, &QUAD)?.value / (hi - lo)
                }
                Component::Model { family: gf, theta: gt } => match cross_power_closed_form(gf, &gt.0, family, th, alpha) {
                    Some(v) => v,
                    None => {
                        let mut br = family.breakpoints(th, alpha);
                        br.extend(gf.breakpoints(&gt.0, 0.0));
                        let (lo, hi) = gf.support();
                        let s = family.loc_scale(th).1.max(gf.loc_scale(&gt.0).1);
                        integrate(
                            |x| gf.eval_point(&gt.0, x).map_or(0.0, |p| p.logf.exp()) * fa(x),
                            lo,
                            hi,
                            &br,
                            s,
                            &QUAD,
                        )?
                        .value
                    }
                },
            };
            total += c.weight * v;
        }
        Ok(total)
    }

    /// `∫ g h^α` for a general density `h` without point masses.
    pub fn power_integral_against(&self, h: &GSpec, alpha: f64) -> Result<f64> {
        if h.has_point_mass() {
            return Err(Error::Unsupported("h must not contain point masses".into()));
        }
        if let Some((f, t)) = h.as_single_model() {
            return self.power_integral(f, t, alpha);
        }
        let ha = |x: f64| h.pdf(x).powf(alpha);
        let mut total = 0.0;
        let mut br = h.breakpoints();
        br.extend(self.breakpoints());
        let scale = self.tail_scale().max(h.tail_scale());
        for c in &self.components {
            if c.weight == 0.0 {
                continue;
            }
            let v = match &c.component {
                Component::PointMass { location } => ha(*location),
                comp => {
                    integrate(
                        |x| {
                            let g = comp.pdf(x);
                            if g == 0.0 {
                                0.0
                            } else {
                                g * ha(x)
                            }
                        },
                        f64::NEG_INFINITY,
                        f64::INFINITY,
                        &br,
                        scale,
                        &QUAD,
                    )?
                    .value
                }
            };
            total += c.weight * v;
        }
        Ok(total)
    }

    /// `∫ g^{1+α}`; undefined when `g` has point masses.
    pub fn self_power_integral(&self, alpha: f64) -> Result<f64> {
        if self.has_point_mass() {
            return Err(Error::Unsupported(
                "the integral of g^(1+alpha) does not exist for point-mass contamination".into(),
            ));
        }
        if let Some((f, t)) = self.as_single_model() {
            return Ok(f.log_p0_unchecked(&t.0, alpha).exp());
        }
        Ok(integrate(
            |x| self.pdf(x).powf(1.0 + alpha),
            f64::NEG_INFINITY,
            f64::INFINITY,
            &self.breakpoints(),
            self.tail_scale(),
            &QUAD,
        )?
        .value)
    }
}

/// `∫ g f^α` when both are exponentials or both normals.
fn cross_power_closed_form(gf: &Family, gt: &[f64], f: &Family, th: &[f64], alpha: f64) -> Option<f64> {
    let (gl, gs) = gf.loc_scale(gt);
    let (fl, fs) = f.loc_scale(th);
    match (gf.is_normal(), f.is_normal()) {
        (false, false) => Some((-alpha * fs.ln()).exp() / (1.0 + alpha * gs / fs)),
        (true, true) => {
            let v = gs * gs + fs * fs / alpha;
            let z = gl - fl;
            let ln = -0.5 * alpha * (2.0 * std::f64::consts::PI * fs * fs).ln()
                + 0.5 * (2.0 * std::f64::consts::PI * fs * fs / alpha).ln()
                - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
                - 0.5 * z * z / v;
            Some(ln.exp())
        }
        _ => None,
    }
}

fn check_population(g: &GSpec, family: &Family, theta: &Theta, cfg: &BridgeConfig) -> Result<()> {
    cfg.validate()?;
    g.validate()?;
    family.validate(&theta.0)?;
    if cfg.alpha == 0.0 {
        return Err(Error::InvalidInput("population objectives need alpha > 0".into()));
    }
    Ok(())
}

/// θ-dependent part of the divergence between `g` and `f_θ` (the `∫g^{1+α}` term is omitted).
pub fn population_objective(g: &GSpec, family: &Family, theta: &Theta, cfg: &BridgeConfig) -> Result<f64> {
    check_population(g, family, theta, cfg)?;
    let lt1 = family.log_p0_unchecked(&theta.0, cfg.alpha);
    let t2 = g.power_integral(family, theta, cfg.alpha)?;
    Ok(objective_from_logs(cfg, lt1, t2.ln()))
}

/// Full divergence `ρ(g, f_θ)` including the `∫g^{1+α}` term.
pub fn population_divergence(g: &GSpec, family: &Family, theta: &Theta, cfg: &BridgeConfig) -> Result<f64> {
    check_population(g, family, theta, cfg)?;
    let t1 = family.log_p0_unchecked(&theta.0, cfg.alpha).exp();
    let t2 = g.power_integral(family, theta, cfg.alpha)?;
    let t3 = g.self_power_integral(cfg.alpha)?;
    Ok(rho(cfg, t1, t2, t3))
}

fn rho(cfg: &BridgeConfig, t1: f64, t2: f64, t3: f64) -> f64 {
    let a = cfg.alpha;
    if cfg.lambda == 1.0 {
        t1 - (1.0 + 1.0 / a) * t2 + t3 / a
    } else {
        let (l, lb) = (cfg.lambda, cfg.lambda_bar());
        ((l + lb * t1).ln() - (1.0 + a) / a * (l + lb * t2).ln() + (l + lb * t3).ln() / a) / lb
    }
}

fn check_cfg_positive(cfg: &BridgeConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.alpha == 0.0 {
        return Err(Error::InvalidInput("cross entropies need alpha > 0".into()));
    }
    Ok(())
}

/// Cross entropy `d(g, h)` given `∫h^{1+α}` and `∫g h^α`.
fn cross_entropy_from(cfg: &BridgeConfig, h_power: f64, gh_power: f64) -> f64 {
    let a = cfg.alpha;
    if cfg.lambda == 1.0 {
        h_power / (1.0 + a) - gh_power / a
    } else {
        let (l, lb) = (cfg.lambda, cfg.lambda_bar());
        (l + lb * h_power).ln() / (lb * (1.0 + a)) - (l + lb * gh_power).ln() / (a * lb)
    }
}

/// Cross entropy `d(g, h)` between two densities; `h` must be continuous.
pub fn cross_entropy(g: &GSpec, h: &GSpec, cfg: &BridgeConfig) -> Result<f64> {
    check_cfg_positive(cfg)?;
    g.validate()?;
    h.validate()?;
    let hp = h.self_power_integral(cfg.alpha)?;
    let ghp = g.power_integral_against(h, cfg.alpha)?;
    Ok(cross_entropy_from(cfg, hp, ghp))
}

/// Induced divergence `D(g, h) = d(g, h) − d(g, g)`, equal to `ρ/(1+α)`.
pub fn induced_divergence(g: &GSpec, h: &GSpec, cfg: &BridgeConfig) -> Result<f64> {
    if g.has_point_mass() {
        return Err(Error::Unsupported("the induced divergence needs a continuous g".into()));
    }
    Ok(cross_entropy(g, h, cfg)? - cross_entropy(g, g, cfg)?)
}

/// Defect in the Pythagorean relation and its scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PythagoreanDefect {
    /// `D(g,h) − D(g,f) − D(f,h)` with `g = (1−ε)f + εδ`.
    pub defect: f64,
    /// `λ + λ̄ max(∫δf^α, ∫δh^α)`.
    pub nu: f64,
}

pub fn pythagorean_defect(f: &GSpec, delta: &GSpec, eps: f64, h: &GSpec, cfg: &BridgeConfig) -> Result<PythagoreanDefect> {
    check_cfg_positive(cfg)?;
    if cfg.lambda == 1.0 {
        return Err(Error::InvalidInput("the Pythagorean defect is defined for lambda < 1".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1], got {eps}")));
    }
    for d in [f, delta, h] {
        d.validate()?;
        if d.has_point_mass() {
            return Err(Error::Unsupported("Pythagorean defect needs proper densities".into()));
        }
    }
    let g = GSpec::mix(f, delta, eps);
    let defect = induced_divergence(&g, h, cfg)? - induced_divergence(&g, f, cfg)? - induced_divergence(f, h, cfg)?;
    let df = delta.power_integral_against(f, cfg.alpha)?;
    let dh = delta.power_integral_against(h, cfg.alpha)?;
    Ok(PythagoreanDefect {
        defect,
        nu: cfg.lambda + cfg.lambda_bar() * df.max(dh),
    })
}

/// Remainder scale `ε/(1−ε) [λ + λ̄∫δh^α] / (α λ̄ [λ + λ̄∫f h^α])` of the contamination expansion.
pub fn contamination_remainder(f: &GSpec, delta: &GSpec, eps: f64, h: &GSpec, cfg: &BridgeConfig) -> Result<f64> {
    check_cfg_positive(cfg)?;
    if cfg.lambda == 1.0 {
        return Err(Error::InvalidInput("the remainder scale is defined for lambda < 1".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1), got {eps}")));
    }
    let (l, lb, a) = (cfg.lambda, cfg.lambda_bar(), cfg.alpha);
    let dh = delta.power_integral_against(h, a)?;
    let fh = f.power_integral_against(h, a)?;
    Ok(eps / (1.0 - eps) * (l + lb * dh) / (a * lb * (l + lb * fh)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp_model(s: f64) -> GSpec {
        GSpec::single(Family::ExponentialScale, Theta::scalar(s))
    }

    #[test]
    fn config_bounds() {
        assert!(BridgeConfig::new(1.1, 0.5).is_err());
        assert!(BridgeConfig::new(0.5, -0.1).is_err());
        assert_eq!(BridgeConfig::new(0.3, 0.4).unwrap().lambda_bar(), 0.6);
    }

    #[test]
    fn objective_examples() {
        let f = Family::ExponentialScale;
        let th = Theta::scalar(1.0);
        let v = sample_objective(&f, &th, &[0.0], &BridgeConfig::dpd(1.0).unwrap()).unwrap();
        assert_relative_eq!(v, -1.5, epsilon = 1e-15);
        let v = sample_objective(&f, &th, &[0.0], &BridgeConfig::ldpd(1.0).unwrap()).unwrap();
        assert_relative_eq!(v, 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn general_lambda_matches_direct_formula() {
        let f = Family::NormalScale { mean: 0.0 };
        let data = [0.3, -1.2, 2.2, 0.01];
        let (a, l) = (0.6, 0.35);
        let th = Theta::scalar(0.9);
        let t1 = f.model_moments(&th, a).unwrap().p0;
        let t2: f64 = data.iter().map(|&x| f.density(&th, x).unwrap().powf(a)).sum::<f64>() / 4.0;
        let lb = 1.0 - l;
        let direct = ((l + lb * t1).ln() - (1.0 + a) / a * (l + lb * t2).ln()) / lb;
        let v = sample_objective(&f, &th, &data, &BridgeConfig::new(a, l).unwrap()).unwrap();
        assert_relative_eq!(v, direct, max_relative = 1e-13);
    }

    #[test]
    fn alpha_zero_is_negative_log_likelihood() {
        let f = Family::NormalMean { sigma: 1.0 };
        let data = [0.5, 1.5, 4.0];
        for l in [0.0, 0.4, 1.0] {
            let cfg = BridgeConfig::new(0.0, l).unwrap();
            let v = sample_objective(&f, &Theta::scalar(1.0), &data, &cfg).unwrap();
            let nll = -data.iter().map(|&x| f.log_density(&Theta::scalar(1.0), x).unwrap()).sum::<f64>() / 3.0;
            assert_relative_eq!(v, nll, epsilon = 1e-14);
            let g = objective_gradient(&f, &Theta::scalar(2.0), &data, &cfg).unwrap();
            assert!(g[0].abs() < 1e-15);
        }
    }

    #[test]
    fn ldpd_with_zero_density_is_infinite() {
        let f = Family::ExponentialScale;
        let v = sample_objective(&f, &Theta::scalar(1.0), &[-1.0, -2.0], &BridgeConfig::ldpd(0.5).unwrap()).unwrap();
        assert_eq!(v, f64::INFINITY);
        let r = moment_residual(&f, &Theta::scalar(1.0), &[-1.0], &BridgeConfig::ldpd(0.5).unwrap()).unwrap();
        assert!(r[0].is_infinite());
        let v = sample_objective(&f, &Theta::scalar(1.0), &[-1.0], &BridgeConfig::new(0.5, 0.5).unwrap()).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn extreme_scales_stay_finite() {
        let f = Family::NormalScale { mean: 0.0 };
        let data = crate::fixtures::normal20();
        for s in [1e-12, 1e-8, 1e3] {
            for l in [0.0, 0.5, 1.0] {
                let v = sample_objective(&f, &Theta::scalar(s), &data, &BridgeConfig::new(0.8, l).unwrap()).unwrap();
                assert!(v.is_finite(), "sigma={s} lambda={l}: {v}");
            }
        }
    }

    #[test]
    fn dpd_residual_is_unnormalized() {
        let f = Family::NormalLocationScale;
        let th = Theta(vec![0.2, 1.3]);
        let data = [0.1, -0.7, 1.9, 3.0];
        let a = 0.4;
        let r = moment_residual(&f, &th, &data, &BridgeConfig::dpd(a).unwrap()).unwrap();
        let mm = f.model_moments(&th, a).unwrap();
        let mut s = DVector::zeros(2);
        for &x in &data {
            s += f.density(&th, x).unwrap().powf(a) * f.score(&th, x).unwrap();
        }
        s /= 4.0;
        let expected = mm.r0 - s;
        assert!((r - expected).amax() < 1e-14);
    }

    #[test]
    fn ldpd_residual_cross_multiplied() {
        // t̂2·R0 − t1·ŝ = residual·t1·t̂2 at λ = 0.
        let f = Family::NormalLocationScale;
        let data = [0.1, -0.7, 1.9, 3.0, -2.2];
        let a = 0.7;
        let mut rng_state = 7u64;
        for _ in 0..10 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u1 = (rng_state >> 11) as f64 / (1u64 << 53) as f64;
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u2 = (rng_state >> 11) as f64 / (1u64 << 53) as f64;
            let th = Theta(vec![4.0 * u1 - 2.0, 0.3 + 3.0 * u2]);
            let r = moment_residual(&f, &th, &data, &BridgeConfig::ldpd(a).unwrap()).unwrap();
            let em = empirical_moments(&f, &th, &data, a).unwrap();
            let mm = f.model_moments(&th, a).unwrap();
            let cross = &mm.r0 * em.t2_hat - &em.s_hat * em.t1;
            let lhs = r * em.t1 * em.t2_hat;
            assert!((lhs - &cross).amax() < 1e-12 * cross.amax().max(1.0));
        }
    }

    #[test]
    fn cross_power_closed_forms_match_quadrature() {
        let cases = [
            (Family::ExponentialScale, vec![1.3], Family::ExponentialScale, vec![0.7]),
            (Family::NormalScale { mean: 1.0 }, vec![0.6], Family::NormalLocationScale, vec![-0.4, 1.7]),
            (Family::NormalMean { sigma: 2.0 }, vec![3.0], Family::NormalScale { mean: 0.0 }, vec![0.9]),
        ];
        for (gf, gt, f, th) in cases {
            for alpha in [0.25, 0.9] {
                let closed = cross_power_closed_form(&gf, &gt, &f, &th, alpha).unwrap();
                let (lo, hi) = gf.support();
                let mut br = f.breakpoints(&th, alpha);
                br.extend(gf.breakpoints(&gt, 0.0));
                let q = integrate(
                    |x| {
                        gf.eval_point(&gt, x).map_or(0.0, |p| p.logf.exp())
                            * f.eval_point(&th, x).map_or(0.0, |p| (alpha * p.logf).exp())
                    },
                    lo,
                    hi,
                    &br,
                    1.0,
                    &QUAD,
                )
                .unwrap()
                .value;
                assert_relative_eq!(closed, q, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn divergence_at_model_is_zero() {
        let models = [
            (Family::ExponentialScale, Theta::scalar(1.7)),
            (Family::NormalLocationScale, Theta(vec![0.5, 0.8])),
        ];
        for (f, th) in models {
            let g = GSpec::single(f, th.clone());
            for l in [0.0, 0.25, 0.5, 0.75] {
                for a in [0.25, 0.5, 1.0] {
                    let cfg = BridgeConfig::new(a, l).unwrap();
                    let r = population_divergence(&g, &f, &th, &cfg).unwrap();
                    assert!(r.abs() < 1e-9, "{f} {l} {a}: {r}");
                }
            }
        }
    }

    #[test]
    fn induced_divergence_is_scaled_rho() {
        let g = GSpec::single(Family::NormalLocationScale, Theta(vec![0.3, 1.1]));
        let f = Family::NormalLocationScale;
        let th = Theta(vec![-0.2, 0.7]);
        let h = GSpec::single(f, th.clone());
        for l in [0.0, 0.6, 1.0] {
            let cfg = BridgeConfig::new(0.5, l).unwrap();
            let d = induced_divergence(&g, &h, &cfg).unwrap();
            let r = population_divergence(&g, &f, &th, &cfg).unwrap();
            assert_relative_eq!(d, r / 1.5, max_relative = 1e-9);
            assert!(induced_divergence(&g, &g, &cfg).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn dpd_cross_entropy_matches_quadrature() {
        let g = GSpec::contaminated(
            Family::ExponentialScale,
            Theta::scalar(1.0),
            0.1,
            Component::UniformSlab { lo: 5.0, hi: 7.0 },
        );
        let h = exp_model(1.4);
        let a = 0.6;
        let d = cross_entropy(&g, &h, &BridgeConfig::dpd(a).unwrap()).unwrap();
        let hp = integrate(|x| h.pdf(x).powf(1.0 + a), 0.0, f64::INFINITY, &[1.0, 5.0], 1.0, &QUAD).unwrap().value;
        let ghp = integrate(|x| g.pdf(x) * h.pdf(x).powf(a), 0.0, f64::INFINITY, &[1.0, 5.0, 7.0], 1.0, &QUAD)
            .unwrap()
            .value;
        assert_relative_eq!(d, hp / (1.0 + a) - ghp / a, max_relative = 1e-9);
    }

    #[test]
    fn point_mass_rejected_for_induced_divergence() {
        let g = GSpec::contaminated(
            Family::ExponentialScale,
            Theta::scalar(1.0),
            0.1,
            Component::PointMass { location: 3.0 },
        );
        assert!(matches!(
            induced_divergence(&g, &exp_model(1.0), &BridgeConfig::ldpd(0.5).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn pythagorean_defect_vanishes_without_contamination() {
        let f = exp_model(1.0);
        let delta = GSpec {
            components: vec![WeightedComponent {
                weight: 1.0,
                component: Component::UniformSlab { lo: 6.0 - 1e-4, hi: 6.0 + 1e-4 },
            }],
        };
        let h = exp_model(1.2);
        let r = pythagorean_defect(&f, &delta, 0.0, &h, &BridgeConfig::ldpd(0.5).unwrap()).unwrap();
        assert!(r.defect.abs() < 1e-10);
        assert!(r.nu > 0.0);
    }

    #[test]
    fn remainder_increases_in_lambda() {
        let f = exp_model(1.0);
        let delta = GSpec {
            components: vec![WeightedComponent {
                weight: 1.0,
                component: Component::UniformSlab { lo: 5.9, hi: 6.1 },
            }],
        };
        let h = exp_model(1.2);
        let a = 0.5;
        assert!(delta.power_integral_against(&h, a).unwrap() <= f.power_integral_against(&h, a).unwrap());
        let mut last = 0.0;
        for k in 0..10 {
            let cfg = BridgeConfig::new(a, k as f64 / 10.0).unwrap();
            let t = contamination_remainder(&f, &delta, 0.1, &h, &cfg).unwrap();
            assert!(t > last, "lambda {}: {t} <= {last}", cfg.lambda);
            last = t;
        }
    }

    #[test]
    fn population_landscape_exponential_point_mass() {
        let g = GSpec::contaminated(
            Family::ExponentialScale,
            Theta::scalar(1.0),
            0.15,
            Component::PointMass { location: 1e-4 },
        );
        let f = Family::ExponentialScale;
        let grid: Vec<f64> = (0..4000).map(|i| 10f64.powf(-6.0 + 7.0 * i as f64 / 3999.0)).collect();
        let argmin = |cfg: &BridgeConfig| {
            let vals: Vec<f64> = grid
                .iter()
                .map(|&s| population_objective(&g, &f, &Theta::scalar(s), cfg).unwrap())
                .collect();
            let i = (0..grid.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
            (grid[i], vals)
        };
        let (s0, vals) = argmin(&BridgeConfig::ldpd(0.5).unwrap());
        assert!(s0 < 0.01, "{s0}");
        let local = (1..grid.len() - 1)
            .filter(|&i| vals[i] < vals[i - 1] && vals[i] < vals[i + 1])
            .map(|i| grid[i])
            .any(|s| s > 0.3 && s < 2.0);
        assert!(local);
        let (s1, _) = argmin(&BridgeConfig::dpd(0.5).unwrap());
        assert!(s1 > 0.5 && s1 < 1.5, "{s1}");
    }

    #[test]
    fn slab_and_point_mass_landscapes_agree() {
        let f = Family::ExponentialScale;
        let pm = GSpec::contaminated(f, Theta::scalar(1.0), 0.2, Component::PointMass { location: 6.0 });
        let slab = GSpec::contaminated(
            f,
            Theta::scalar(1.0),
            0.2,
            Component::UniformSlab { lo: 6.0 - 1e-4, hi: 6.0 + 1e-4 },
        );
        let cfg = BridgeConfig::new(0.5, 0.3).unwrap();
        let grid: Vec<f64> = (0..2001).map(|i| 0.5 + i as f64 * 1e-3).collect();
        let am = |g: &GSpec| {
            grid.iter()
                .copied()
                .min_by(|&a, &b| {
                    population_objective(g, &f, &Theta::scalar(a), &cfg)
                        .unwrap()
                        .total_cmp(&population_objective(g, &f, &Theta::scalar(b), &cfg).unwrap())
                })
                .unwrap()
        };
        assert!((am(&pm) - am(&slab)).abs() <= 1e-4);
    }

    #[test]
    fn gspec_json_round_trip() {
        let g = GSpec::contaminated(
            Family::NormalScale { mean: 0.0 },
            Theta::scalar(1.0),
            0.15,
            Component::PointMass { location: 0.001 },
        );
        let s = serde_json::to_string(&g).unwrap();
        let back: GSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        assert!(back.validate().is_ok());
    }

    fn fam_theta() -> impl Strategy<Value = (Family, Vec<f64>)> {
        prop_oneof![
            (0.2f64..5.0).prop_map(|s| (Family::ExponentialScale, vec![s])),
            (-2.0f64..2.0, 0.3f64..3.0).prop_map(|(m, s)| (Family::NormalLocationScale, vec![m, s])),
            (-2.0f64..2.0).prop_map(|m| (Family::NormalMean { sigma: 0.8 }, vec![m])),
            (0.3f64..3.0).prop_map(|s| (Family::NormalScale { mean: 0.5 }, vec![s])),
        ]
    }

    proptest! {
        #[test]
        fn gradient_is_scaled_residual(
            (f, th) in fam_theta(),
            data in prop::collection::vec(0.0f64..4.0, 1..30),
            alpha in 0.05f64..1.0,
            lambda in 0.0f64..=1.0,
        ) {
            let cfg = BridgeConfig::new(alpha, lambda).unwrap();
            let th = Theta(th);
            let g = objective_gradient(&f, &th, &data, &cfg).unwrap();
            let r = moment_residual(&f, &th, &data, &cfg).unwrap();
            for i in 0..f.dim() {
                prop_assert!((g[i] - (1.0 + alpha) * r[i]).abs() <= 1e-10 * g[i].abs().max(1.0));
            }
        }

        #[test]
        fn gradient_matches_central_differences(
            (f, th) in fam_theta(),
            data in prop::collection::vec(0.0f64..4.0, 1..30),
            alpha in 0.0f64..1.0,
            lambda in 0.0f64..=1.0,
        ) {
            let cfg = BridgeConfig::new(alpha, lambda).unwrap();
            let g = objective_gradient(&f, &Theta(th.clone()), &data, &cfg).unwrap();
            let h = 1e-6;
            for i in 0..f.dim() {
                let mut up = th.clone();
                let mut dn = th.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (sample_objective(&f, &Theta(up), &data, &cfg).unwrap()
                    - sample_objective(&f, &Theta(dn), &data, &cfg).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-5, "coordinate {}: fd {} analytic {}", i, fd, g[i]);
            }
        }
    }
}
