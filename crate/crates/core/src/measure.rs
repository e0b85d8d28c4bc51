//! Polarization analysis: projective coincidence probabilities, correlation
//! functions, CHSH S, basis visibilities and Poissonian count generation.
//!
//! # Sign convention
//!
//! With the textbook correlation `E = cos 2(φ₁ − φ₂)` for `|φ+⟩`, the CHSH
//! combination `|−E(φ₁,φ₂) + E(φ₁,φ₂′) + E(φ₁′,φ₂) + E(φ₁′,φ₂′)|` at
//! `(φ₁, φ₁′, φ₂, φ₂′) = (0°, 45°, 22.5°, 67.5°)` vanishes. The analyzers of
//! the modelled setup therefore implement a mirrored angle on photon 2
//! (a reflection between the two beam splitters), giving
//! `E = cos 2(φ₁ + φ₂)` and the maximal `2√2`. [`Convention::Mirrored`] is
//! the default; [`Convention::Textbook`] is kept for comparison.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::qstate::{tensor, CMatrix, DensityMatrix, Ket};
use crate::{Error, Result};

/// CHSH analyzer angles `(φ₁, φ₁′, φ₂, φ₂′)` of the reference Bell test, rad.
pub const REFERENCE_CHSH_ANGLES: [f64; 4] =
    [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_8, 3.0 * std::f64::consts::FRAC_PI_8];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Photon 2's analyzer angle is negated.
    #[default]
    Mirrored,
    Textbook,
}

/// A pair of single-photon projections, one per photon.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzerSetting {
    pub ket1: Ket,
    pub ket2: Ket,
    pub label: String,
}

impl AnalyzerSetting {
    pub fn new(label: impl Into<String>, ket1: Ket, ket2: Ket) -> Result<Self> {
        if ket1.dim() != 2 || ket2.dim() != 2 {
            return Err(Error::Domain("analyzer kets must be single-qubit".into()));
        }
        Ok(AnalyzerSetting { ket1, ket2, label: label.into() })
    }

    /// `P₁ ⊗ P₂`
    pub fn projector(&self) -> CMatrix {
        tensor(&self.ket1.projector(), &self.ket2.projector())
    }
}

/// `Tr(ρ (P₁ ⊗ P₂))`
pub fn coincidence_prob(rho: &DensityMatrix, s: &AnalyzerSetting) -> f64 {
    s.ket1.tensor(&s.ket2).expectation(rho.matrix()).clamp(0.0, 1.0)
}

/// `E = P(++) + P(−−) − P(+−) − P(−+)` with linear analyzers.
pub fn correlation(rho: &DensityMatrix, phi1: f64, phi2: f64, convention: Convention) -> f64 {
    let phi2 = match convention {
        Convention::Mirrored => -phi2,
        Convention::Textbook => phi2,
    };
    let mut e = 0.0;
    for (s1, a1) in [(1.0, phi1), (-1.0, phi1 + FRAC_PI_2)] {
        for (s2, a2) in [(1.0, phi2), (-1.0, phi2 + FRAC_PI_2)] {
            let ket = Ket::linear(a1).tensor(&Ket::linear(a2));
            e += s1 * s2 * ket.expectation(rho.matrix());
        }
    }
    e
}

/// `S = |−E(φ₁,φ₂) + E(φ₁,φ₂′) + E(φ₁′,φ₂) + E(φ₁′,φ₂′)|`,
/// angles ordered `(φ₁, φ₁′, φ₂, φ₂′)`.
pub fn chsh_s(rho: &DensityMatrix, angles: [f64; 4], convention: Convention) -> f64 {
    let [a, ap, b, bp] = angles;
    let e = |x, y| correlation(rho, x, y, convention);
    (-e(a, b) + e(a, bp) + e(ap, b) + e(ap, bp)).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// H/V
    HV,
    /// +/−
    PM,
    /// R/L
    RL,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::HV, Basis::PM, Basis::RL];

    pub fn kets(self) -> (Ket, Ket) {
        match self {
            Basis::HV => (Ket::h(), Ket::v()),
            Basis::PM => (Ket::plus(), Ket::minus()),
            Basis::RL => (Ket::r(), Ket::l()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::HV => "HV",
            Basis::PM => "PM",
            Basis::RL => "RL",
        }
    }
}

/// The four joint-outcome probabilities in `basis`, ordered `xx, xy, yx, yy`.
pub fn basis_probabilities(rho: &DensityMatrix, basis: Basis) -> [f64; 4] {
    let (x, y) = basis.kets();
    let p = |a: &Ket, b: &Ket| a.tensor(b).expectation(rho.matrix());
    [p(&x, &x), p(&x, &y), p(&y, &x), p(&y, &y)]
}

/// `(C_max − C_min)/(C_max + C_min)` with `C` the correlated (`xx + yy`) and
/// anticorrelated (`xy + yx`) coincidence totals.
pub fn visibility(rho: &DensityMatrix, basis: Basis) -> f64 {
    let [xx, xy, yx, yy] = basis_probabilities(rho, basis);
    let (same, opp) = (xx + yy, xy + yx);
    let (hi, lo) = if same >= opp { (same, opp) } else { (opp, same) };
    if hi + lo <= 0.0 {
        return 0.0;
    }
    (hi - lo) / (hi + lo)
}

/// Mean of the three basis visibilities.
pub fn average_visibility(rho: &DensityMatrix) -> f64 {
    Basis::ALL.iter().map(|&b| visibility(rho, b)).sum::<f64>() / 3.0
}

/// One row of the count CSV: `setting_label,counts,duration_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    #[serde(rename = "setting_label")]
    pub setting: String,
    pub counts: u64,
    #[serde(rename = "duration_s")]
    pub duration: f64,
}

pub(crate) fn poisson_draw<R: rand::Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as u64
}

/// Draws `counts_k ~ Poisson(n_trials · scale · p_k)` for each setting, in
/// order, from a single ChaCha8 stream seeded with `seed`. Every record has
/// unit duration (equal exposure).
pub fn sample_counts(
    rho: &DensityMatrix,
    settings: &[AnalyzerSetting],
    n_trials: u64,
    coinc_prob_scale: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    if n_trials == 0 {
        return Err(Error::Domain("n_trials must be positive".into()));
    }
    if !(coinc_prob_scale > 0.0 && coinc_prob_scale <= 1.0) {
        return Err(Error::Domain(format!("coincidence scale {coinc_prob_scale} outside (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(settings
        .iter()
        .map(|s| {
            let mean = n_trials as f64 * coinc_prob_scale * coincidence_prob(rho, s);
            CountRecord { setting: s.label.clone(), counts: poisson_draw(&mut rng, mean), duration: 1.0 }
        })
        .collect())
}
