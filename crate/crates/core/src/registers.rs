//! Holographic memory geometry: spin-wave wave vectors, inter-register
//! crosstalk through the atomic structure factor, and capacity estimates.
//!
//! The beam plane is x–z with the control beam along +z. A signal beam at
//! in-plane angle θ has wave vector `k (sin θ, 0, cos θ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::consts::{K_B, RB87_MASS};
use crate::{Error, Result};

/// Upper bound on the number of atoms instantiated by [`crosstalk`].
pub const MAX_SAMPLED_ATOMS: u64 = 100_000;

pub type Vec3 = [f64; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryGeometry {
    /// Signal/control wavelength, m.
    pub wavelength: f64,
    /// Control beam waist diameter, m.
    pub control_waist: f64,
    /// Signal beam waist diameter, m.
    pub signal_waist: f64,
    /// Cloud length along the control beam, m.
    pub cloud_length: f64,
    /// RMS cloud size per axis (x, y, z), m.
    pub cloud_sigma: Vec3,
    pub atom_count: u64,
    /// Cloud temperature, K.
    pub temperature: f64,
    /// Signal beam angles relative to the control beam, rad.
    pub signal_angles: Vec<f64>,
}

impl MemoryGeometry {
    /// Quad-register geometry of the reference experiment.
    pub fn reference_default() -> Self {
        let cloud_length = 2e-3;
        MemoryGeometry {
            wavelength: 795e-9,
            control_waist: 850e-6,
            signal_waist: 450e-6,
            cloud_length,
            cloud_sigma: [0.5e-3, 0.5e-3, cloud_length / 2.0],
            atom_count: 100_000_000,
            temperature: 140e-6,
            signal_angles: [-1.0_f64, -0.6, 0.6, 1.0].iter().map(|d| d.to_radians()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength_m", self.wavelength),
            ("control_waist_m", self.control_waist),
            ("signal_waist_m", self.signal_waist),
            ("cloud_length_m", self.cloud_length),
            ("cloud_sigma_m[0]", self.cloud_sigma[0]),
            ("cloud_sigma_m[1]", self.cloud_sigma[1]),
            ("cloud_sigma_m[2]", self.cloud_sigma[2]),
            ("temperature_k", self.temperature),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("geometry.{name}"), format!("must be > 0, got {v}")));
            }
        }
        if self.atom_count < 1 {
            return Err(Error::config("geometry.atom_count", "must be >= 1"));
        }
        if self.signal_angles.is_empty() {
            return Err(Error::config("geometry.signal_angles_deg", "at least one angle required"));
        }
        for (i, a) in self.signal_angles.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::config(format!("geometry.signal_angles_deg[{i}]"), "not finite"));
            }
            if self.signal_angles[..i].contains(a) {
                return Err(Error::config(
                    format!("geometry.signal_angles_deg[{i}]"),
                    "angles must be pairwise distinct",
                ));
            }
        }
        Ok(())
    }

    /// Optical wavenumber `2π/λ`, rad/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// A collective spin-wave register, identified by its wave vector (rad/m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinWaveMode {
    pub q: Vec3,
}

impl SpinWaveMode {
    pub fn magnitude(&self) -> f64 {
        self.q.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// `q_i = k_s,i − k_c` for each signal angle.
pub fn spin_wave_vectors(g: &MemoryGeometry) -> Vec<SpinWaveMode> {
    let k = g.wavenumber();
    g.signal_angles
        .iter()
        .map(|&theta| {
            // cos θ − 1 written as −2 sin²(θ/2) to avoid cancellation
            let half = (theta / 2.0).sin();
            SpinWaveMode { q: [k * theta.sin(), 0.0, -2.0 * k * half * half] }
        })
        .collect()
}

/// Monte Carlo estimate of the register overlap `⟨1,q₁|1,q₂⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkEstimate {
    pub overlap: Complex64,
    /// Number of atom positions actually sampled.
    pub n_sample: u64,
    /// Standard error of the complex estimator, `1/√N`.
    pub std_error: f64,
}

/// `(1/N) Σ_j exp(i (q₂ − q₁)·x_j)` over atoms drawn from the anisotropic
/// Gaussian cloud; at most [`MAX_SAMPLED_ATOMS`] atoms are drawn.
pub fn crosstalk(m1: &SpinWaveMode, m2: &SpinWaveMode, g: &MemoryGeometry, seed: u64) -> CrosstalkEstimate {
    let n = g.atom_count.clamp(1, MAX_SAMPLED_ATOMS);
    let dq = [m2.q[0] - m1.q[0], m2.q[1] - m1.q[1], m2.q[2] - m1.q[2]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes: Vec<Normal<f64>> = g.cloud_sigma.iter().map(|&s| Normal::new(0.0, s).expect("sigma validated")).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..n {
        let phase: f64 = (0..3).map(|a| dq[a] * axes[a].sample(&mut rng)).sum();
        acc += Complex64::from_polar(1.0, phase);
    }
    let overlap = if dq == [0.0; 3] { Complex64::new(1.0, 0.0) } else { acc / n as f64 };
    CrosstalkEstimate { overlap, n_sample: n, std_error: 1.0 / (n as f64).sqrt() }
}

/// Expected overlap for the Gaussian cloud, `exp(−Σ Δq_a² σ_a² / 2)`.
pub fn expected_overlap(m1: &SpinWaveMode, m2: &SpinWaveMode, g: &MemoryGeometry) -> f64 {
    let exponent: f64 = (0..3)
        .map(|a| {
            let d = (m2.q[a] - m1.q[a]) * g.cloud_sigma[a];
            d * d
        })
        .sum();
    (-exponent / 2.0).exp()
}

/// Fresnel-number mode capacity `w_c w_s / (λ L)`.
pub fn mode_capacity(g: &MemoryGeometry) -> f64 {
    g.control_waist * g.signal_waist / (g.wavelength * g.cloud_length)
}

/// Thermal-motion dephasing time `1/(|q| v_rms)`, `v_rms = √(k_B T / m_Rb87)`.
/// Returns `+∞` for a copropagating (`|q| = 0`) register.
pub fn motional_dephasing_time(m: &SpinWaveMode, g: &MemoryGeometry) -> f64 {
    let q = m.magnitude();
    if q == 0.0 {
        return f64::INFINITY;
    }
    let v_rms = (K_B * g.temperature / RB87_MASS).sqrt();
    1.0 / (q * v_rms)
}
