//! Sandwich variance of the bridge estimator and tuning by its determinant.
//!
//! Model-side integrals (`P0, R0, Q0, S0` at power `1+α`) are exact; every
//! integral against the unknown `g` is replaced by its sample mean at the
//! data. The per-observation variance is `V = J⁻ᵀ K J⁻¹`; `J` is symmetric at
//! every root of the estimating equation, where this is the usual `J⁻¹ K J⁻¹`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{check_inputs, BridgeConfig};
use crate::error::{Error, Result};
use crate::families::{Family, ModelMoments, Theta};
use crate::optimize::{chain_fit, LambdaGrid, StartSpec, Tolerances};

/// Condition number of `J` beyond which the variance is not reported.
pub const MAX_CONDITION: f64 = 1e12;

/// Integrals of `g·f^γ·(1, u, uuᵀ, ∇u)` at the powers `α` and `2α`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSide {
    pub p_a: f64,
    pub p_2a: f64,
    pub r_a: DVector<f64>,
    pub r_2a: DVector<f64>,
    pub q_a: DMatrix<f64>,
    pub q_2a: DMatrix<f64>,
    pub s_a: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub model: ModelMoments,
    pub empirical: EmpiricalSide,
}

/// Plug-in (sample mean) estimates of the `g`-side integrals.
pub fn empirical_moments(family: &Family, theta: &Theta, data: &[f64], alpha: f64) -> Result<EmpiricalSide> {
    check_inputs(family, theta, data, &BridgeConfig::new(alpha, 1.0)?)?;
    let d = family.dim();
    let n = data.len() as f64;
    let mut e = EmpiricalSide {
        p_a: 0.0,
        p_2a: 0.0,
        r_a: DVector::zeros(d),
        r_2a: DVector::zeros(d),
        q_a: DMatrix::zeros(d, d),
        q_2a: DMatrix::zeros(d, d),
        s_a: DMatrix::zeros(d, d),
    };
    for &x in data {
        let Some(p) = family.eval_point(&theta.0, x) else {
            continue;
        };
        let w = (alpha * p.logf).exp();
        let w2 = (2.0 * alpha * p.logf).exp();
        e.p_a += w;
        e.p_2a += w2;
        for i in 0..d {
            e.r_a[i] += w * p.u[i];
            e.r_2a[i] += w2 * p.u[i];
            for j in 0..d {
                e.q_a[(i, j)] += w * p.u[i] * p.u[j];
                e.q_2a[(i, j)] += w2 * p.u[i] * p.u[j];
                e.s_a[(i, j)] += w * p.du[i][j];
            }
        }
    }
    e.p_a /= n;
    e.p_2a /= n;
    e.r_a /= n;
    e.r_2a /= n;
    e.q_a /= n;
    e.q_2a /= n;
    e.s_a /= n;
    Ok(e)
}

/// Moment set at the model itself (`g = f_θ`), in closed form.
pub fn model_moment_set(family: &Family, theta: &Theta, alpha: f64) -> Result<MomentSet> {
    family.validate(&theta.0)?;
    BridgeConfig::new(alpha, 1.0)?;
    let at = |gamma_minus_one: f64| family.moments_unchecked(&theta.0, gamma_minus_one);
    let m_a = at(alpha);
    let m_2a = at(2.0 * alpha);
    Ok(MomentSet {
        empirical: EmpiricalSide {
            p_a: m_a.p0,
            p_2a: m_2a.p0,
            r_a: m_a.r0.clone(),
            r_2a: m_2a.r0,
            q_a: m_a.q0.clone(),
            q_2a: m_2a.q0,
            s_a: m_a.s0.clone(),
        },
        model: m_a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichVariance {
    #[serde(with = "matrix_rows")]
    pub k: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub j: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub v: DMatrix<f64>,
    pub det_v: f64,
    /// Reported for comparison only; selection uses the determinant.
    pub trace_v: f64,
    /// Ratio of extreme singular values of `J`.
    pub condition: f64,
}

/// `K` and `J` from a moment set.
pub fn information_matrices(m: &MomentSet, cfg: &BridgeConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let (l, lb, a) = (cfg.lambda, cfg.lambda_bar(), cfg.alpha);
    let mm = &m.model;
    let e = &m.empirical;
    let b0 = l + lb * mm.p0;
    let b1 = l + lb * e.p_a;
    let r0 = &mm.r0;
    let r0r0 = r0 * r0.transpose();

    let k = &r0r0 * (lb * lb * e.p_2a)
        - (r0 * e.r_2a.transpose()) * (lb * b0)
        - (&e.r_2a * r0.transpose()) * (lb * b0)
        + &e.q_2a * (b0 * b0)
        - &r0r0 * (lb * lb * e.p_a * e.p_a)
        + (&e.r_a * r0.transpose()) * (lb * b0 * e.p_a)
        + (r0 * e.r_a.transpose()) * (lb * b0 * e.p_a)
        - (&e.r_a * e.r_a.transpose()) * (b0 * b0);

    let j = &mm.q0 * ((a + 1.0) * b1) + &mm.s0 * b1
        - &e.q_a * (a * b0)
        - &e.s_a * b0
        + (&e.r_a * r0.transpose()) * (lb * a)
        - (r0 * e.r_a.transpose()) * (lb * (a + 1.0));
    (k, j)
}

pub fn sandwich_from_moments(m: &MomentSet, cfg: &BridgeConfig) -> Result<SandwichVariance> {
    cfg.validate()?;
    let (k, j) = information_matrices(m, cfg);
    let sv = j.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularInformation { condition });
    }
    let j_inv = j
        .clone()
        .try_inverse()
        .ok_or(Error::SingularInformation { condition })?;
    let v = j_inv.transpose() * &k * &j_inv;
    let v = (&v + v.transpose()) * 0.5;
    Ok(SandwichVariance {
        det_v: v.determinant(),
        trace_v: v.trace(),
        k,
        j,
        v,
        condition,
    })
}

/// Plug-in sandwich variance at a fitted `θ`.
pub fn sandwich(family: &Family, theta: &Theta, data: &[f64], cfg: &BridgeConfig) -> Result<SandwichVariance> {
    check_inputs(family, theta, data, cfg)?;
    let m = MomentSet {
        model: family.moments_unchecked(&theta.0, cfg.alpha),
        empirical: empirical_moments(family, theta, data, cfg.alpha)?,
    };
    sandwich_from_moments(&m, cfg)
}

/// Determinant as a closeness measure of a symmetric PSD matrix.
pub fn closeness_det(v: &DMatrix<f64>) -> Result<f64> {
    if !v.is_square() {
        return Err(Error::InvalidInput("closeness measure needs a square matrix".into()));
    }
    let scale = v.amax().max(f64::MIN_POSITIVE);
    if (v - v.transpose()).amax() > 1e-10 * scale {
        return Err(Error::InvalidInput("closeness measure needs a symmetric matrix".into()));
    }
    Ok(v.determinant())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningCell {
    pub alpha: f64,
    pub lambda: f64,
    pub theta_hat: Option<Theta>,
    pub det_v: Option<f64>,
    pub trace_v: Option<f64>,
    pub valid: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningTable {
    pub alpha_star: f64,
    pub lambda_star: f64,
    pub det_star: f64,
    /// Cells in `(alpha, lambda)` grid order.
    pub cells: Vec<TuningCell>,
}

impl TuningTable {
    pub fn to_csv(&self, dim: usize) -> String {
        let mut s = String::from("alpha,lambda");
        for i in 0..dim {
            s.push_str(&format!(",theta_{}", i + 1));
        }
        s.push_str(",det_V,valid\n");
        for c in &self.cells {
            s.push_str(&format!("{},{}", crate::io::fmt_num(c.alpha), crate::io::fmt_num(c.lambda)));
            for i in 0..dim {
                let v = c.theta_hat.as_ref().map_or(f64::NAN, |t| t[i]);
                s.push(',');
                s.push_str(&crate::io::fmt_num(v));
            }
            s.push_str(&format!(",{},{}\n", crate::io::fmt_num(c.det_v.unwrap_or(f64::NAN)), c.valid));
        }
        s
    }
}

/// Chain fits per `α`, sandwich at every chain root, and the `(α, λ)` with the smallest determinant.
pub fn tune(
    family: &Family,
    data: &[f64],
    alpha_grid: &[f64],
    lambda_grid: &LambdaGrid,
    starts: &StartSpec,
    tol: &Tolerances,
) -> Result<TuningTable> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidInput("alpha grid is empty".into()));
    }
    for &a in alpha_grid {
        BridgeConfig::new(a, 0.0)?;
    }
    let rows: Vec<Vec<TuningCell>> = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let invalid = |lambda: f64, reason: String| TuningCell {
                alpha,
                lambda,
                theta_hat: None,
                det_v: None,
                trace_v: None,
                valid: false,
                reason: Some(reason),
            };
            let path = match chain_fit(family, data, alpha, lambda_grid, starts, tol) {
                Ok(p) => p,
                Err(Error::ChainBroken { lambda, reason, partial }) => {
                    let mut cells = cells_for(family, data, alpha, &partial.lambdas, &partial.fits);
                    for &l in &lambda_grid.values()[partial.lambdas.len()..] {
                        cells.push(invalid(l, format!("chain broken at lambda = {lambda}: {reason}")));
                    }
                    return cells;
                }
                Err(e) => return lambda_grid.values().iter().map(|&l| invalid(l, e.to_string())).collect(),
            };
            cells_for(family, data, alpha, &path.lambdas, &path.fits)
        })
        .collect();
    let cells: Vec<TuningCell> = rows.into_iter().flatten().collect();
    let best = cells
        .iter()
        .filter(|c| c.valid)
        .fold(None::<&TuningCell>, |b, c| match b {
            Some(b) if b.det_v.unwrap() <= c.det_v.unwrap() => Some(b),
            _ => Some(c),
        })
        .ok_or_else(|| Error::InvalidInput("no tuning cell produced a valid variance".into()))?;
    Ok(TuningTable {
        alpha_star: best.alpha,
        lambda_star: best.lambda,
        det_star: best.det_v.unwrap(),
        cells: cells.clone(),
    })
}

fn cells_for(
    family: &Family,
    data: &[f64],
    alpha: f64,
    lambdas: &[f64],
    fits: &[crate::optimize::FitResult],
) -> Vec<TuningCell> {
    lambdas
        .iter()
        .zip(fits)
        .map(|(&lambda, fit)| {
            let cfg = BridgeConfig { alpha, lambda };
            match sandwich(family, &fit.theta_hat, data, &cfg) {
                Ok(s) if s.det_v.is_finite() && s.det_v >= 0.0 => TuningCell {
                    alpha,
                    lambda,
                    theta_hat: Some(fit.theta_hat.clone()),
                    det_v: Some(s.det_v),
                    trace_v: Some(s.trace_v),
                    valid: true,
                    reason: None,
                },
                Ok(s) => TuningCell {
                    alpha,
                    lambda,
                    theta_hat: Some(fit.theta_hat.clone()),
                    det_v: None,
                    trace_v: None,
                    valid: false,
                    reason: Some(format!("determinant {} is not a valid variance", s.det_v)),
                },
                Err(e) => TuningCell {
                    alpha,
                    lambda,
                    theta_hat: Some(fit.theta_hat.clone()),
                    det_v: None,
                    trace_v: None,
                    valid: false,
                    reason: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::normal20;
    use crate::optimize::{local_minimize, SampleObjective};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, Normal};

    fn normal_sample(n: usize, seed: u64, m: f64, s: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(m, s).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn fit(f: Family, data: &[f64], cfg: BridgeConfig, start: Vec<f64>) -> Theta {
        let obj = SampleObjective::new(f, data, cfg).unwrap();
        let r = local_minimize(&obj, &Theta(start), &Tolerances::default()).unwrap();
        assert!(r.converged);
        r.theta_hat
    }

    fn classical(f: &Family, th: &Theta, data: &[f64]) -> DMatrix<f64> {
        let d = f.dim();
        let n = data.len() as f64;
        let mut a = DMatrix::zeros(d, d);
        let mut b = DMatrix::zeros(d, d);
        let mut mu = DVector::zeros(d);
        for &x in data {
            let u = f.score(th, x).unwrap();
            a -= f.score_jacobian(th, x).unwrap() / n;
            b += &u * u.transpose() / n;
            mu += u / n;
        }
        let ai = a.try_inverse().unwrap();
        &ai * (b - &mu * mu.transpose()) * &ai
    }

    #[test]
    fn alpha_zero_reduces_to_classical_sandwich() {
        let cases: Vec<(Family, Vec<f64>, Vec<f64>)> = vec![
            (Family::NormalLocationScale, normal_sample(50, 1, 0.3, 1.4), vec![0.0, 1.0]),
            (Family::NormalScale { mean: 5.0 }, normal_sample(40, 2, 5.0, 0.7), vec![1.0]),
            (Family::NormalMean { sigma: 2.0 }, normal_sample(30, 3, -1.0, 2.0), vec![0.0]),
            (Family::ExponentialScale, normal_sample(60, 4, 3.0, 0.8).iter().map(|x| x.abs()).collect(), vec![1.0]),
        ];
        for (f, data, start) in cases {
            // Also at a point that is not a root: the identity is algebraic.
            let th_fit = fit(f, &data, BridgeConfig::new(0.0, 0.5).unwrap(), start.clone());
            let th_off = Theta(th_fit.0.iter().map(|v| v * 1.1 + 0.05).collect());
            for th in [th_fit, th_off] {
                let c = classical(&f, &th, &data);
                for l in [0.0, 0.3, 0.7, 1.0] {
                    let s = sandwich(&f, &th, &data, &BridgeConfig::new(0.0, l).unwrap()).unwrap();
                    assert!((&s.v - &c).amax() <= 1e-9 * c.amax().max(1.0), "{f} {l}: {} vs {}", s.v, c);
                }
            }
        }
    }

    #[test]
    fn dpd_reduction_matches_independent_formulas() {
        let data = normal_sample(80, 7, 0.0, 1.0);
        let f = Family::NormalLocationScale;
        let a = 0.5;
        let th = fit(f, &data, BridgeConfig::dpd(a).unwrap(), vec![0.0, 1.0]);
        let s = sandwich(&f, &th, &data, &BridgeConfig::dpd(a).unwrap()).unwrap();

        let mm = f.model_moments(&th, a).unwrap();
        let n = data.len() as f64;
        let (mut q1, mut s1, mut q2) = (DMatrix::zeros(2, 2), DMatrix::zeros(2, 2), DMatrix::zeros(2, 2));
        let mut r1 = DVector::zeros(2);
        for &x in &data {
            let w = f.density(&th, x).unwrap().powf(a);
            let u = f.score(&th, x).unwrap();
            q1 += w * &u * u.transpose() / n;
            q2 += w * w * &u * u.transpose() / n;
            s1 += w * f.score_jacobian(&th, x).unwrap() / n;
            r1 += w * &u / n;
        }
        let j = (1.0 + a) * &mm.q0 + &mm.s0 - a * q1 - s1;
        let k = q2 - &r1 * r1.transpose();
        let ji = j.clone().try_inverse().unwrap();
        let v = &ji * &k * &ji;
        assert!((&s.j - &j).amax() < 1e-12 * j.amax());
        assert!((&s.k - &k).amax() < 1e-12 * k.amax());
        assert!((&s.v - &v).amax() < 1e-9 * v.amax());
    }

    #[test]
    fn information_is_symmetric_at_roots() {
        let data = normal20();
        let f = Family::NormalLocationScale;
        for l in [0.0, 0.4, 1.0] {
            let cfg = BridgeConfig::new(0.6, l).unwrap();
            let th = fit(f, &data, cfg, vec![0.0, 1.0]);
            let s = sandwich(&f, &th, &data, &cfg).unwrap();
            assert!((&s.j - s.j.transpose()).amax() < 1e-7 * s.j.amax());
            let eig = s.k.clone().symmetric_eigen().eigenvalues;
            assert!(eig.min() >= -1e-10);
            assert!(s.det_v > 0.0);
        }
    }

    #[test]
    fn normal_mean_mle_variance_is_one() {
        let data = normal_sample(20000, 11, 0.0, 1.0);
        let f = Family::NormalMean { sigma: 1.0 };
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let s = sandwich(&f, &Theta::scalar(mean), &data, &BridgeConfig::new(0.0, 0.2).unwrap()).unwrap();
        assert!((s.v[(0, 0)] - 1.0).abs() < 0.05);
    }

    #[test]
    fn empirical_single_datum() {
        let f = Family::NormalLocationScale;
        let th = Theta(vec![0.5, 2.0]);
        let e = empirical_moments(&f, &th, &[1.3], 0.4).unwrap();
        let w = f.density(&th, 1.3).unwrap().powf(0.4);
        let u = f.score(&th, 1.3).unwrap();
        assert!((e.p_a - w).abs() < 1e-15);
        assert!((&e.r_a - w * u).amax() < 1e-15);
    }

    #[test]
    fn empirical_jacobian_matches_differences() {
        // Ŝ is the plug-in of ∫g f^α ∇u, so d/dθ R̂ = α Q̂ + Ŝ.
        let data = normal_sample(30, 5, 0.2, 1.1);
        let f = Family::NormalLocationScale;
        let th = vec![0.1, 0.9];
        let a = 0.3;
        let e = empirical_moments(&f, &Theta(th.clone()), &data, a).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut up = th.clone();
            let mut dn = th.clone();
            up[j] += h;
            dn[j] -= h;
            let ru = empirical_moments(&f, &Theta(up), &data, a).unwrap().r_a;
            let rd = empirical_moments(&f, &Theta(dn), &data, a).unwrap().r_a;
            let fd = (ru - rd) / (2.0 * h);
            for i in 0..2 {
                let analytic = a * e.q_a[(i, j)] + e.s_a[(i, j)];
                assert!((fd[i] - analytic).abs() < 1e-5, "({i},{j}) {} vs {analytic}", fd[i]);
            }
        }
    }

    #[test]
    fn plug_in_variance_converges() {
        let f = Family::ExponentialScale;
        let th0 = Theta::scalar(1.0);
        let cfg = BridgeConfig::new(0.5, 0.4).unwrap();
        let pop = sandwich_from_moments(&model_moment_set(&f, &th0, 0.5).unwrap(), &cfg).unwrap();
        let mut errs = Vec::new();
        for (n, seed) in [(100, 21), (1000, 22), (10000, 23)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..n).map(|_| Exp::new(1.0).unwrap().sample(&mut rng)).collect();
            let th = fit(f, &data, cfg, vec![1.0]);
            let s = sandwich(&f, &th, &data, &cfg).unwrap();
            errs.push((s.v[(0, 0)] / pop.v[(0, 0)] - 1.0).abs());
        }
        assert!(errs[2] < errs[0]);
        assert!(errs[2] <= 0.05, "{errs:?}");
    }

    #[test]
    fn closeness_examples() {
        assert_eq!(closeness_det(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let w = DVector::from_column_slice(&[0.4, -1.0]);
        assert!(closeness_det(&(&v + &w * w.transpose())).unwrap() >= closeness_det(&v).unwrap());
        assert_eq!(closeness_det(&DMatrix::from_element(1, 1, 0.37)).unwrap(), 0.37);
        assert!(closeness_det(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
    }

    #[test]
    fn singular_information_is_reported() {
        let m = MomentSet {
            model: ModelMoments {
                log_p0: 0.0,
                p0: 1.0,
                r0: DVector::zeros(2),
                q0: DMatrix::zeros(2, 2),
                s0: DMatrix::zeros(2, 2),
            },
            empirical: EmpiricalSide {
                p_a: 1.0,
                p_2a: 1.0,
                r_a: DVector::zeros(2),
                r_2a: DVector::zeros(2),
                q_a: DMatrix::zeros(2, 2),
                q_2a: DMatrix::identity(2, 2),
                s_a: DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]),
            },
        };
        assert!(matches!(
            sandwich_from_moments(&m, &BridgeConfig::dpd(0.0).unwrap()),
            Err(Error::SingularInformation { .. })
        ));
    }

    #[test]
    fn tuning_table_csv_shape() {
        let data = normal20();
        let f = Family::NormalScale { mean: 0.0 };
        let grid = LambdaGrid::uniform(2).unwrap();
        let t = tune(&f, &data, &[0.0, 0.5], &grid, &StartSpec::standard(&f, &data, 1), &Tolerances::default()).unwrap();
        assert_eq!(t.cells.len(), 6);
        let csv = t.to_csv(1);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("alpha,lambda,theta_1,det_V,valid\n"));
    }

    #[test]
    fn sandwich_json_round_trip() {
        let data = normal20();
        let f = Family::NormalLocationScale;
        let cfg = BridgeConfig::new(0.3, 0.5).unwrap();
        let th = fit(f, &data, cfg, vec![0.0, 1.0]);
        let s = sandwich(&f, &th, &data, &cfg).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        let back: SandwichVariance = serde_json::from_str(&js).unwrap();
        assert_eq!(s, back);
    }

    fn psd_pair() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
        (1usize..4).prop_flat_map(|d| {
            (
                prop::collection::vec(-2.0f64..2.0, d * d),
                prop::collection::vec(-1.0f64..1.0, d * d),
                Just(d),
            )
                .prop_map(|(a, b, d)| {
                    let a = DMatrix::from_vec(d, d, a);
                    let b = DMatrix::from_vec(d, d, b);
                    let base = &a * a.transpose() + DMatrix::identity(d, d) * 1e-3;
                    let bigger = &base + &b * b.transpose();
                    (base, bigger)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn determinant_respects_loewner_order((small, big) in psd_pair()) {
            let ds = closeness_det(&small).unwrap();
            let db = closeness_det(&big).unwrap();
            prop_assert!(db >= ds * (1.0 - 1e-10) - 1e-14);
        }
    }
}
