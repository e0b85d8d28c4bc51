//! Weighted nonlinear least squares for the two storage decay models:
//!
//! * efficiency `y = η₀ e^{−t/τ}`
//! * visibility `V = 1/(a + b e^{2t/τ})` with `τ` fixed (or floated on request)
//!
//! The solver is Levenberg–Marquardt with central-difference Jacobians.
//! Uncertainties are the square roots of the diagonal of `(JᵀJ)⁻¹` for the
//! weighted residuals `(y − model)/σ`, i.e. they are not rescaled by the
//! reduced chi-square.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_ITERATIONS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    #[serde(rename = "t_s")]
    pub t: f64,
    pub y: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// `√Σ ((y − model)/σ)²` at the solution.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Time where the visibility model crosses `1/√2`; `None` when the fit
    /// is not a visibility fit. `+∞` means no crossing.
    pub t_star: Option<f64>,
    /// Weighted residual norm after every accepted step.
    #[serde(skip)]
    pub history: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.uncertainties[i])
    }
}

struct LmOutcome {
    params: Vec<f64>,
    jtj_inv: DMatrix<f64>,
    residual_norm: f64,
    converged: bool,
    iterations: usize,
    history: Vec<f64>,
}

fn residuals(model: &dyn Fn(&[f64], f64) -> f64, p: &[f64], data: &[DataPoint]) -> DVector<f64> {
    DVector::from_iterator(data.len(), data.iter().map(|d| (d.y - model(p, d.t)) / d.sigma))
}

fn jacobian(model: &dyn Fn(&[f64], f64) -> f64, p: &[f64], data: &[DataPoint]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(data.len(), p.len());
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1e-2);
        let mut up = p.to_vec();
        let mut dn = p.to_vec();
        up[k] += h;
        dn[k] -= h;
        for (i, d) in data.iter().enumerate() {
            // derivative of the residual, hence the sign
            j[(i, k)] = -(model(&up, d.t) - model(&dn, d.t)) / (2.0 * h * d.sigma);
        }
    }
    j
}

fn levenberg_marquardt(model: &dyn Fn(&[f64], f64) -> f64, start: Vec<f64>, data: &[DataPoint]) -> LmOutcome {
    let n = start.len();
    let mut p = start;
    let mut r = residuals(model, &p, data);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut history = vec![cost.sqrt()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let j = jacobian(model, &p, data);
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let mut stepped = false;
        let mut step_norm = 0.0;
        for _ in 0..50 {
            let mut damped = jtj.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(delta) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let r_trial = residuals(model, &trial, data);
            let c_trial = r_trial.norm_squared();
            if c_trial.is_finite() && c_trial <= cost {
                step_norm = delta.norm() / (1.0 + DVector::from_column_slice(&p).norm());
                let rel = (cost - c_trial) / cost.max(1e-300);
                p = trial;
                r = r_trial;
                cost = c_trial;
                history.push(cost.sqrt());
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                if rel < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // no downhill step exists at any damping: stationary point
            converged = true;
        }
        if converged || step_norm < 1e-12 || cost == 0.0 {
            converged = true;
            break;
        }
    }

    let j = jacobian(model, &p, data);
    let jtj = j.transpose() * &j;
    let jtj_inv = jtj
        .clone()
        .try_inverse()
        .unwrap_or_else(|| jtj.pseudo_inverse(1e-300).unwrap_or_else(|_| DMatrix::zeros(n, n)));
    LmOutcome { params: p, jtj_inv, residual_norm: cost.sqrt(), converged, iterations, history }
}

fn validate(data: &[DataPoint], min_points: usize) -> Result<Vec<DataPoint>> {
    if data.len() < min_points {
        return Err(Error::InvalidData(format!("need at least {min_points} data points, got {}", data.len())));
    }
    for d in data {
        if !(d.t.is_finite() && d.y.is_finite()) {
            return Err(Error::InvalidData("data must be finite".into()));
        }
        if !(d.sigma > 0.0 && d.sigma.is_finite()) {
            return Err(Error::InvalidData(format!("sigma must be positive, got {}", d.sigma)));
        }
    }
    if data.iter().all(|d| d.t == data[0].t) {
        return Err(Error::InvalidData("all data points share the same t".into()));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.y.total_cmp(&b.y)).then(a.sigma.total_cmp(&b.sigma)));
    Ok(sorted)
}

fn symmetrize(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = m.nrows();
    (0..n).map(|i| (0..n).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect()).collect()
}

/// Fits `y = η₀ e^{−t/τ}`. Parameters are reported as `eta0` and `tau`.
///
/// Internally the fit runs on the decay rate `k = 1/τ` with time rescaled
/// by the data span, so flat data converge to `k ≈ 0` (a huge `|τ|` with a
/// huge uncertainty) instead of wandering off.
pub fn fit_exponential(data: &[DataPoint]) -> Result<FitResult> {
    let data = validate(data, 3)?;
    let t_scale = data.iter().map(|d| d.t.abs()).fold(0.0, f64::max);
    let scaled: Vec<DataPoint> = data.iter().map(|d| DataPoint { t: d.t / t_scale, ..*d }).collect();

    let eta_start = scaled.iter().map(|d| d.y).fold(f64::NEG_INFINITY, f64::max);
    // log-linear regression on the positive points for the rate
    let pos: Vec<(f64, f64)> = scaled.iter().filter(|d| d.y > 0.0).map(|d| (d.t, d.y.ln())).collect();
    let rate_start = if pos.len() >= 2 {
        let n = pos.len() as f64;
        let (mt, my) = (pos.iter().map(|p| p.0).sum::<f64>() / n, pos.iter().map(|p| p.1).sum::<f64>() / n);
        let sxx: f64 = pos.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        let sxy: f64 = pos.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        if sxx > 0.0 {
            -sxy / sxx
        } else {
            1.0
        }
    } else {
        1.0
    };

    let model = |p: &[f64], t: f64| p[0] * (-p[1] * t).exp();
    let out = levenberg_marquardt(&model, vec![eta_start, rate_start], &scaled);

    let (eta0, k_scaled) = (out.params[0], out.params[1]);
    let k = k_scaled / t_scale;
    let tau = 1.0 / k;
    // propagate (η₀, k_scaled) covariance to (η₀, τ): dτ/dk_scaled = −t_scale/k_scaled²
    // (k = 0 exactly makes this infinite; keep zero correlations at zero)
    let d = -t_scale / (k_scaled * k_scaled);
    let c = &out.jtj_inv;
    let scale = |v: f64, f: f64| if v == 0.0 { 0.0 } else { v * f };
    let cov =
        DMatrix::from_row_slice(2, 2, &[c[(0, 0)], scale(c[(0, 1)], d), scale(c[(1, 0)], d), scale(c[(1, 1)], d * d)]);
    let unc = vec![cov[(0, 0)].max(0.0).sqrt(), cov[(1, 1)].max(0.0).sqrt()];
    Ok(FitResult {
        names: vec!["eta0".into(), "tau".into()],
        params: vec![eta0, tau],
        uncertainties: unc,
        covariance: symmetrize(&cov),
        residual_norm: out.residual_norm,
        converged: out.converged,
        iterations: out.iterations,
        t_star: None,
        history: out.history,
    })
}

/// Time at which `1/(a + b e^{2t/τ})` falls to `1/√2`.
pub fn threshold_crossing(a: f64, b: f64, tau: f64) -> f64 {
    let target = 1.0 / FRAC_1_SQRT_2;
    if a >= target {
        return 0.0;
    }
    if b <= 0.0 {
        return f64::INFINITY;
    }
    (0.5 * tau * ((target - a) / b).ln()).max(0.0)
}

/// Fits `V = 1/(a + b e^{2t/τ})`.
///
/// With `float_tau = false`, `τ` is held at the supplied value and only
/// `(a, b)` are fitted; otherwise `τ` is a third parameter starting from the
/// supplied value.
pub fn fit_visibility(data: &[DataPoint], tau: f64, float_tau: bool) -> Result<FitResult> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("lifetime must be positive, got {tau}")));
    }
    let data = validate(data, if float_tau { 3 } else { 2 })?;
    let first = data.first().expect("validated nonempty");
    let last = data.last().expect("validated nonempty");
    let a0 = 1.0 / first.y;
    let b0 = ((1.0 / last.y - a0) / (2.0 * last.t / tau).exp()).max(0.0);

    // time in units of τ keeps both parameters O(1)
    let scaled: Vec<DataPoint> = data.iter().map(|d| DataPoint { t: d.t / tau, ..*d }).collect();
    let (out, names) = if float_tau {
        let model = |p: &[f64], t: f64| 1.0 / (p[0] + p[1] * (2.0 * t / p[2]).exp());
        (levenberg_marquardt(&model, vec![a0, b0, 1.0], &scaled), vec!["a", "b", "tau"])
    } else {
        let model = |p: &[f64], t: f64| 1.0 / (p[0] + p[1] * (2.0 * t).exp());
        (levenberg_marquardt(&model, vec![a0, b0], &scaled), vec!["a", "b"])
    };

    let mut params = out.params.clone();
    let mut cov = out.jtj_inv.clone();
    if float_tau {
        params[2] *= tau;
        for i in 0..3 {
            cov[(i, 2)] *= tau;
            cov[(2, i)] *= tau;
        }
    }
    let fitted_tau = if float_tau { params[2] } else { tau };
    let unc = (0..params.len()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        names: names.into_iter().map(String::from).collect(),
        t_star: Some(threshold_crossing(params[0], params[1], fitted_tau)),
        params,
        uncertainties: unc,
        covariance: symmetrize(&cov),
        residual_norm: out.residual_norm,
        converged: out.converged,
        iterations: out.iterations,
        history: out.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(f: impl Fn(f64) -> f64, n: usize, t_max: f64) -> Vec<DataPoint> {
        (0..n)
            .map(|i| {
                let t = t_max * i as f64 / (n - 1) as f64;
                DataPoint { t, y: f(t), sigma: 0.01 }
            })
            .collect()
    }

    #[test]
    fn noiseless_exponential() {
        let data = curve(|t| 0.15 * (-t / 2.8e-6).exp(), 8, 7e-6);
        let fit = fit_exponential(&data).unwrap();
        assert!(fit.converged);
        assert!((fit.param("tau").unwrap() / 2.8e-6 - 1.0).abs() < 1e-6);
        assert!((fit.param("eta0").unwrap() / 0.15 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_data_gives_huge_lifetime() {
        let data = curve(|_| 0.1, 8, 7e-6);
        let fit = fit_exponential(&data).unwrap();
        assert!(fit.converged);
        let tau = fit.param("tau").unwrap();
        assert!(tau.abs() > 1e3 * 7e-6, "tau = {tau}");
        let u = fit.uncertainty("tau").unwrap();
        assert!(u > 1e3 * 7e-6, "sigma_tau = {u}");
    }

    #[test]
    fn degenerate_inputs() {
        let same_t = vec![DataPoint { t: 1.0, y: 1.0, sigma: 0.1 }; 4];
        assert!(fit_exponential(&same_t).is_err());
        let two = curve(|t| t, 2, 1.0);
        assert!(fit_exponential(&two).is_err());
        let mut bad_sigma = curve(|t| t, 4, 1.0);
        bad_sigma[1].sigma = 0.0;
        assert!(fit_exponential(&bad_sigma).is_err());
        assert!(fit_visibility(&curve(|_| 0.9, 1, 1.0), 1.0, false).is_err());
    }

    #[test]
    fn constant_visibility_has_no_crossing() {
        let data = curve(|_| 0.8, 6, 3e-6);
        let fit = fit_visibility(&data, 2.8e-6, false).unwrap();
        assert!((fit.param("a").unwrap() - 1.25).abs() < 1e-9);
        assert!(fit.param("b").unwrap().abs() < 1e-9);
        assert_eq!(fit.t_star, Some(f64::INFINITY));
    }

    #[test]
    fn floating_lifetime_recovers_tau() {
        let tau = 2.8e-6;
        let data = curve(|t| 1.0 / (1.1 + 0.05 * (2.0 * t / tau).exp()), 12, 4e-6);
        let fit = fit_visibility(&data, 2.0e-6, true).unwrap();
        assert!((fit.param("tau").unwrap() / tau - 1.0).abs() < 1e-5);
    }
}
