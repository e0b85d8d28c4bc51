//! Two-qubit polarization state tomography.
//!
//! Settings are labelled by two letters from `H V D A R L` (`D`/`A` are the
//! `+`/`−` diagonal states), one per photon. Each [`CountRecord`] is one
//! projector `Π_k = P₁ ⊗ P₂`.
//!
//! The maximum-likelihood estimate maximizes the Poisson log-likelihood
//! `Σ_k n_k ln μ_k − μ_k` with `μ_k = N d_k Tr(ρ Π_k)`, where `d_k` is the
//! record duration and the overall rate `N` is profiled out. Physicality is
//! enforced by the Cholesky-style parameterization `ρ = L L† / Tr(L L†)` with
//! lower-triangular `L` (real diagonal, 16 real parameters).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::{poisson_draw, AnalyzerSetting, CountRecord};
use crate::qstate::{self, tensor, CMatrix, DensityMatrix, Ket};
use crate::seeds::child_seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Scheme {
    /// The standard 16-setting informationally complete set.
    Sixteen,
    /// All 36 pairs from `{H, V, D, A, R, L}`.
    #[default]
    ThirtySix,
}

impl TryFrom<u32> for Scheme {
    type Error = String;

    fn try_from(n: u32) -> std::result::Result<Self, String> {
        match n {
            16 => Ok(Scheme::Sixteen),
            36 => Ok(Scheme::ThirtySix),
            other => Err(format!("tomography scheme must be 16 or 36, got {other}")),
        }
    }
}

impl From<Scheme> for u32 {
    fn from(s: Scheme) -> u32 {
        match s {
            Scheme::Sixteen => 16,
            Scheme::ThirtySix => 36,
        }
    }
}

const SIXTEEN: [&str; 16] =
    ["HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH", "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL"];
const LETTERS: [char; 6] = ['H', 'V', 'D', 'A', 'R', 'L'];

fn letter_ket(c: char) -> Option<Ket> {
    Some(match c {
        'H' => Ket::h(),
        'V' => Ket::v(),
        'D' => Ket::plus(),
        'A' => Ket::minus(),
        'R' => Ket::r(),
        'L' => Ket::l(),
        _ => return None,
    })
}

/// Builds the analyzer setting for a two-letter label such as `"DR"`.
pub fn setting_from_label(label: &str) -> Result<AnalyzerSetting> {
    let mut chars = label.chars();
    match (chars.next().and_then(letter_ket), chars.next().and_then(letter_ket), chars.next()) {
        (Some(k1), Some(k2), None) => AnalyzerSetting::new(label, k1, k2),
        _ => Err(Error::InvalidData(format!("unknown analyzer setting label `{label}`"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographySettings {
    pub scheme: Scheme,
    pub settings: Vec<AnalyzerSetting>,
}

impl TomographySettings {
    pub fn labels(&self) -> Vec<&str> {
        self.settings.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }
}

pub fn make_settings(scheme: Scheme) -> TomographySettings {
    let labels: Vec<String> = match scheme {
        Scheme::Sixteen => SIXTEEN.iter().map(|s| s.to_string()).collect(),
        Scheme::ThirtySix => LETTERS.iter().flat_map(|a| LETTERS.iter().map(move |b| format!("{a}{b}"))).collect(),
    };
    let settings = labels.iter().map(|l| setting_from_label(l).expect("built-in labels are valid")).collect();
    TomographySettings { scheme, settings }
}

fn paulis() -> [CMatrix; 4] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let z = c(0.0, 0.0);
    [
        CMatrix::identity(2),
        CMatrix::from_entries(2, vec![z, c(1.0, 0.0), c(1.0, 0.0), z]).unwrap(),
        CMatrix::from_entries(2, vec![z, c(0.0, -1.0), c(0.0, 1.0), z]).unwrap(),
        CMatrix::from_entries(2, vec![c(1.0, 0.0), z, z, c(-1.0, 0.0)]).unwrap(),
    ]
}

/// The 16 two-qubit Pauli products `σ_a ⊗ σ_b`, identity first.
pub fn pauli_basis() -> Vec<CMatrix> {
    let p = paulis();
    p.iter().flat_map(|a| p.iter().map(move |b| tensor(a, b))).collect()
}

/// Design matrix `A_kj = Tr(Π_k σ_j)/4`, so `p_k = Σ_j A_kj r_j` for
/// `ρ = Σ_j r_j σ_j / 4`.
fn design_matrix(ts: &TomographySettings) -> DMatrix<f64> {
    let basis = pauli_basis();
    let projectors: Vec<CMatrix> = ts.settings.iter().map(|s| s.projector()).collect();
    DMatrix::from_fn(projectors.len(), 16, |k, j| projectors[k].trace_product_re(&basis[j]) / 4.0)
}

/// Numerical rank of the projector design over the two-qubit operator space.
pub fn design_rank(ts: &TomographySettings) -> usize {
    let a = design_matrix(ts);
    let sv = a.svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

fn check_alignment(counts: &[CountRecord], ts: &TomographySettings) -> Result<()> {
    if counts.len() != ts.len() {
        return Err(Error::InvalidData(format!("{} count records for {} settings", counts.len(), ts.len())));
    }
    for (c, s) in counts.iter().zip(&ts.settings) {
        if c.setting != s.label {
            return Err(Error::InvalidData(format!(
                "count record `{}` does not match setting `{}`",
                c.setting, s.label
            )));
        }
        if !(c.duration > 0.0 && c.duration.is_finite()) {
            return Err(Error::InvalidData(format!("record `{}` has nonpositive duration", c.setting)));
        }
    }
    if counts.iter().all(|c| c.counts == 0) {
        return Err(Error::InvalidData("total counts must be positive".into()));
    }
    Ok(())
}

/// Reorders `records` to follow the setting order of `ts`, matching labels.
pub fn align_counts(records: &[CountRecord], ts: &TomographySettings) -> Result<Vec<CountRecord>> {
    ts.settings
        .iter()
        .map(|s| {
            let mut hits = records.iter().filter(|r| r.setting == s.label);
            match (hits.next(), hits.next()) {
                (Some(r), None) => Ok(r.clone()),
                (None, _) => Err(Error::InvalidData(format!("no count record for setting `{}`", s.label))),
                (Some(_), Some(_)) => {
                    Err(Error::InvalidData(format!("duplicate count records for setting `{}`", s.label)))
                }
            }
        })
        .collect()
}

fn scheme_name(ts: &TomographySettings) -> &'static str {
    match ts.scheme {
        Scheme::Sixteen => "16-setting",
        Scheme::ThirtySix => "36-setting",
    }
}

/// Least-squares reconstruction from per-setting rates (counts per unit
/// duration, or exact probabilities). The overall rate is fitted together
/// with the state, so the result always has unit trace.
pub fn linear_inversion_from_rates(rates: &[f64], ts: &TomographySettings) -> Result<CMatrix> {
    if rates.len() != ts.len() {
        return Err(Error::InvalidData(format!("{} rates for {} settings", rates.len(), ts.len())));
    }
    if design_rank(ts) < 16 {
        return Err(Error::RankDeficient(format!(
            "{} design does not span the two-qubit operator space",
            scheme_name(ts)
        )));
    }
    let a = design_matrix(ts);
    let b = DVector::from_column_slice(rates);
    let x = a.svd(true, true).solve(&b, 1e-12).map_err(|e| Error::RankDeficient(e.to_string()))?;
    if !(x[0] > 0.0) {
        return Err(Error::InvalidData("fitted total rate is not positive".into()));
    }
    let basis = pauli_basis();
    let mut m = CMatrix::zeros(4);
    for (j, sigma) in basis.iter().enumerate().skip(1) {
        m = &m + &sigma.scale_real(x[j] / x[0] / 4.0);
    }
    m = &m + &CMatrix::identity(4).scale_real(0.25);
    Ok(m.hermitian_part())
}

/// Linear inversion of aligned count records.
pub fn linear_inversion(counts: &[CountRecord], ts: &TomographySettings) -> Result<CMatrix> {
    check_alignment(counts, ts)?;
    let rates: Vec<f64> = counts.iter().map(|c| c.counts as f64 / c.duration).collect();
    linear_inversion_from_rates(&rates, ts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Keep the log-likelihood of every accepted iterate.
    pub record_history: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions { max_iterations: 10_000, record_history: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub rho_hat: DensityMatrix,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub history: Vec<f64>,
}

const N_PARAMS: usize = 16;
const P_FLOOR: f64 = 1e-300;

/// Lower-triangular `L` from the parameter vector: 4 real diagonal entries
/// followed by (re, im) pairs of the 6 strictly lower entries, row-major.
fn unpack(x: &[f64]) -> CMatrix {
    let mut l = CMatrix::zeros(4);
    let mut k = 4;
    for i in 0..4 {
        l.set(i, i, Complex64::new(x[i], 0.0));
        for j in 0..i {
            l.set(i, j, Complex64::new(x[k], x[k + 1]));
            k += 2;
        }
    }
    l
}

fn pack(l: &CMatrix) -> Vec<f64> {
    let mut x = vec![0.0; N_PARAMS];
    let mut k = 4;
    for i in 0..4 {
        x[i] = l.get(i, i).re;
        for j in 0..i {
            let z = l.get(i, j);
            x[k] = z.re;
            x[k + 1] = z.im;
            k += 2;
        }
    }
    x
}

/// Profiled Poisson likelihood over the `L L†` parameterization.
struct Likelihood {
    projectors: Vec<CMatrix>,
    counts: Vec<f64>,
    durations: Vec<f64>,
    total: f64,
}

impl Likelihood {
    fn new(counts: &[CountRecord], ts: &TomographySettings) -> Self {
        Likelihood {
            projectors: ts.settings.iter().map(|s| s.projector()).collect(),
            counts: counts.iter().map(|c| c.counts as f64).collect(),
            durations: counts.iter().map(|c| c.duration).collect(),
            total: counts.iter().map(|c| c.counts as f64).sum(),
        }
    }

    fn state(x: &[f64]) -> (CMatrix, f64) {
        let l = unpack(x);
        let a = &l * &l.adjoint();
        let t = a.trace().re;
        (a.scale_real(1.0 / t), t)
    }

    fn probs(&self, rho: &CMatrix) -> Vec<f64> {
        self.projectors.iter().map(|p| rho.trace_product_re(p).max(P_FLOOR)).collect()
    }

    /// `Σ n_k ln μ_k − μ_k` at the profiled rate `N = Σn / Σ d_k p_k`.
    fn value_at(&self, rho: &CMatrix) -> f64 {
        let p = self.probs(rho);
        let exposure: f64 = p.iter().zip(&self.durations).map(|(p, d)| p * d).sum();
        let rate = self.total / exposure;
        let mut ll = -self.total;
        for k in 0..p.len() {
            if self.counts[k] > 0.0 {
                ll += self.counts[k] * (rate * self.durations[k] * p[k]).ln();
            }
        }
        ll
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (rho, t) = Self::state(x);
        if !(t > 0.0 && t.is_finite()) {
            return f64::NEG_INFINITY;
        }
        self.value_at(&rho)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let l = unpack(x);
        let a = &l * &l.adjoint();
        let t = a.trace().re;
        let rho = a.scale_real(1.0 / t);
        let p = self.probs(&rho);
        let exposure: f64 = p.iter().zip(&self.durations).map(|(p, d)| p * d).sum();
        // dℓ/dρ = Σ_k (n_k/p_k − S d_k / D) Π_k
        let mut g = CMatrix::zeros(4);
        for k in 0..p.len() {
            let w = self.counts[k] / p[k] - self.total * self.durations[k] / exposure;
            g = &g + &self.projectors[k].scale_real(w);
        }
        let shift = g.trace_product_re(&rho);
        let g_prime = (&g - &CMatrix::identity(4).scale_real(shift)).scale_real(1.0 / t);
        let m = &l.adjoint() * &g_prime;
        let mut grad = vec![0.0; N_PARAMS];
        let mut k = 4;
        for i in 0..4 {
            grad[i] = 2.0 * m.get(i, i).re;
            for j in 0..i {
                let z = m.get(j, i);
                grad[k] = 2.0 * z.re;
                grad[k + 1] = -2.0 * z.im;
                k += 2;
            }
        }
        grad
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn initial_parameters(counts: &[CountRecord], ts: &TomographySettings) -> Result<Vec<f64>> {
    let lin = linear_inversion(counts, ts)?;
    let clamped = lin.hermitian_map(|v| v.max(0.0));
    let tr = clamped.trace().re;
    let base = if tr > 0.0 { clamped.scale_real(1.0 / tr) } else { CMatrix::identity(4).scale_real(0.25) };
    // keep the start strictly inside the cone so the Cholesky factor exists
    let eps = 1e-3;
    let start = &base.scale_real(1.0 - eps) + &CMatrix::identity(4).scale_real(eps / 4.0);
    let l = start.cholesky().ok_or_else(|| Error::Domain("initial state is not positive definite".into()))?;
    Ok(pack(&l))
}

/// Physical maximum-likelihood reconstruction.
///
/// The optimizer is BFGS with a backtracking line search that only accepts
/// strict increases of the likelihood. It stops when the improvement stays
/// below `1e-10` for five successive iterations or the gradient norm drops
/// below `1e-8`; hitting the iteration cap returns the last iterate with
/// `converged = false`.
pub fn mle_reconstruct(counts: &[CountRecord], ts: &TomographySettings, opts: &MleOptions) -> Result<TomographyResult> {
    check_alignment(counts, ts)?;
    let lik = Likelihood::new(counts, ts);
    let mut x = initial_parameters(counts, ts)?;
    let mut f = lik.value(&x);
    let mut g = lik.gradient(&x);
    let mut h = DMatrix::<f64>::identity(N_PARAMS, N_PARAMS);
    let mut scaled = false;
    let mut history = if opts.record_history { vec![f] } else { Vec::new() };
    let mut small_steps = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if dot(&g, &g).sqrt() < 1e-8 {
            converged = true;
            break;
        }
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut dir: Vec<f64> = (&h * &gv).iter().copied().collect();
        let mut slope = dot(&dir, &g);
        if !(slope > 0.0) {
            h = DMatrix::identity(N_PARAMS, N_PARAMS);
            scaled = false;
            dir = g.clone();
            slope = dot(&g, &g);
        }
        if !scaled {
            // first step along the gradient: cap its length relative to |x|
            let norm = dot(&dir, &dir).sqrt();
            let xn = dot(&x, &x).sqrt().max(1e-3);
            if norm > 0.1 * xn {
                let s = 0.1 * xn / norm;
                dir.iter_mut().for_each(|d| *d *= s);
                slope *= s;
            }
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            let ft = lik.value(&trial);
            if ft.is_finite() && ft >= f + 1e-4 * alpha * slope && ft > f {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // no ascent along this direction: restart from the gradient
            h = DMatrix::identity(N_PARAMS, N_PARAMS);
            scaled = false;
            small_steps += 1;
            if small_steps >= 5 {
                converged = true;
                break;
            }
            continue;
        };
        let g_new = lik.gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        // BFGS on −ℓ: y = ∇(−ℓ)_new − ∇(−ℓ)_old
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            let sv = DVector::from_column_slice(&s);
            let yv = DVector::from_column_slice(&y);
            if !scaled {
                h = DMatrix::identity(N_PARAMS, N_PARAMS) * (sy / dot(&y, &y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(N_PARAMS, N_PARAMS);
            let left = &i - (&sv * yv.transpose()) * rho;
            let right = &i - (&yv * sv.transpose()) * rho;
            h = &left * &h * &right + (&sv * sv.transpose()) * rho;
        }
        let improvement = f_new - f;
        x = x_new;
        f = f_new;
        g = g_new;
        if opts.record_history {
            history.push(f);
        }
        if improvement < 1e-10 {
            small_steps += 1;
            if small_steps >= 5 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }

    let (rho, _) = Likelihood::state(&x);
    let rho_hat = DensityMatrix::normalize(rho)?;
    Ok(TomographyResult { rho_hat, log_likelihood: f, converged, iterations, history })
}

/// Fidelity distribution of Poisson-resampled reconstructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n_sets: usize,
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
    pub samples: Vec<f64>,
    /// Number of resampled sets whose reconstruction hit the iteration cap.
    pub nonconverged: usize,
}

/// Parametric bootstrap: for set `i`, draws `n'_k ~ Poisson(n_k)` from a
/// ChaCha8 stream seeded with `child_seed(seed, "mc", i)` and reconstructs.
/// Results come back in set order regardless of how work is scheduled.
pub fn monte_carlo_reconstructions(
    counts: &[CountRecord],
    ts: &TomographySettings,
    n_sets: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<Vec<TomographyResult>> {
    if n_sets < 2 {
        return Err(Error::Domain(format!("need at least 2 Monte Carlo sets, got {n_sets}")));
    }
    check_alignment(counts, ts)?;
    (0..n_sets)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, "mc", i as u64));
            let resampled: Vec<CountRecord> = counts
                .iter()
                .map(|c| CountRecord { counts: poisson_draw(&mut rng, c.counts as f64), ..c.clone() })
                .collect();
            mle_reconstruct(&resampled, ts, opts)
        })
        .collect()
}

/// Mean and sample standard deviation of `values`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(results: &[TomographyResult], target: &DensityMatrix) -> McSummary {
    let samples: Vec<f64> = results.iter().map(|r| qstate::fidelity(target, &r.rho_hat)).collect();
    let (mean, std) = mean_std(&samples);
    McSummary {
        n_sets: samples.len(),
        fidelity_mean: mean,
        fidelity_std: std,
        nonconverged: results.iter().filter(|r| !r.converged).count(),
        samples,
    }
}

pub fn monte_carlo_fidelity(
    counts: &[CountRecord],
    ts: &TomographySettings,
    target: &DensityMatrix,
    n_sets: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<McSummary> {
    let results = monte_carlo_reconstructions(counts, ts, n_sets, seed, opts)?;
    Ok(summarize(&results, target))
}

/// Noiseless counts: `round(n · Tr(ρ Π_k))` per setting.
pub fn expected_counts(rho: &DensityMatrix, ts: &TomographySettings, n: f64) -> Vec<CountRecord> {
    ts.settings
        .iter()
        .map(|s| CountRecord {
            setting: s.label.clone(),
            counts: (n * crate::measure::coincidence_prob(rho, s)).round() as u64,
            duration: 1.0,
        })
        .collect()
}
