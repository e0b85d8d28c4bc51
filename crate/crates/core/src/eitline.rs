//! Λ-system EIT line shape: transmission, medium phase, transparency window
//! and slow-light group delay.
//!
//! With single-photon detuning `δ` on two-photon resonance the normalized
//! coherence response is
//!
//! ```text
//! f(δ) = (Γ/2)(γ − iδ) / ((Γ/2 − iδ)(γ − iδ) + Ω²/4)
//! ```
//!
//! so that `f(0) = 1` for `Ω = 0`. Intensity transmission is
//! `exp(−OD·Re f)` and the field phase is `−(OD/2)·Im f`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::consts::RB_D1_GAMMA;
use crate::{Error, Result};

/// Ground-state decoherence rate (rad/s) that reproduces a 2.2 MHz
/// transparency window at OD 10, Ω = 2π·7 MHz, Γ = 2π·5.75 MHz.
pub const CALIBRATED_GAMMA_GS: f64 = 3.518_145_956_8e6;

/// Target transparency FWHM used for calibration, Hz.
pub const REFERENCE_WINDOW_HZ: f64 = 2.2e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EitParams {
    /// Resonant optical depth.
    pub od: f64,
    /// Control Rabi frequency Ω, rad/s.
    pub rabi: f64,
    /// Excited-state decay rate Γ, rad/s.
    pub gamma_e: f64,
    /// Ground-state decoherence rate γ_gs, rad/s.
    pub gamma_gs: f64,
}

impl EitParams {
    pub fn reference_default() -> Self {
        EitParams { od: 10.0, rabi: 2.0 * PI * 7e6, gamma_e: RB_D1_GAMMA, gamma_gs: CALIBRATED_GAMMA_GS }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.od.is_finite() && self.od > 0.0) {
            return Err(Error::config("eit.od", format!("must be > 0, got {}", self.od)));
        }
        if !(self.rabi.is_finite() && self.rabi >= 0.0) {
            return Err(Error::config("eit.rabi_hz", "must be >= 0"));
        }
        if !(self.gamma_e.is_finite() && self.gamma_e > 0.0) {
            return Err(Error::config("eit.gamma_e_hz", "must be > 0"));
        }
        if !(self.gamma_gs.is_finite() && self.gamma_gs >= 0.0) {
            return Err(Error::config("eit.gamma_gs_hz", "must be >= 0"));
        }
        Ok(())
    }
}

fn response(p: &EitParams, delta: f64) -> Complex64 {
    let i = Complex64::i();
    let ground = p.gamma_gs - i * delta;
    let denom = (p.gamma_e / 2.0 - i * delta) * ground + p.rabi * p.rabi / 4.0;
    ground * (p.gamma_e / 2.0) / denom
}

/// Intensity transmission at detuning `delta` (rad/s).
pub fn transmission(p: &EitParams, delta: f64) -> f64 {
    (-p.od * response(p, delta).re).exp().clamp(0.0, 1.0)
}

/// Field phase acquired through the medium, rad.
pub fn phase(p: &EitParams, delta: f64) -> f64 {
    -0.5 * p.od * response(p, delta).im
}

/// `dφ/dδ` at `δ = 0` by central differences with step `Ω/1000`, seconds.
pub fn group_delay(p: &EitParams) -> Result<f64> {
    if p.rabi <= 0.0 {
        return Err(Error::Domain("group delay requires a nonzero control Rabi frequency".into()));
    }
    let h = p.rabi / 1000.0;
    Ok((phase(p, h) - phase(p, -h)) / (2.0 * h))
}

/// Ideal-limit delay `OD·Γ/Ω²`.
pub fn ideal_group_delay(p: &EitParams) -> f64 {
    p.od * p.gamma_e / (p.rabi * p.rabi)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    for _ in 0..200 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - ratio * (b - a);
        d = a + ratio * (b - a);
        if (b - a).abs() <= 1e-12 * b.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Full width (Hz) of the transparency peak, measured at half height
/// between the transmission at `δ = 0` and the absorption floor (the
/// transmission minimum on either side of the window).
pub fn window_fwhm_hz(p: &EitParams) -> Result<f64> {
    if p.rabi <= 0.0 {
        return Err(Error::Domain("no transparency window without a control field".into()));
    }
    let t = |d: f64| transmission(p, d);
    let span = 2.0 * p.rabi.max(p.gamma_e);
    const GRID: usize = 4000;
    let (mut best_i, mut best_t) = (0, f64::INFINITY);
    for i in 1..=GRID {
        let ti = t(span * i as f64 / GRID as f64);
        if ti < best_t {
            best_t = ti;
            best_i = i;
        }
    }
    let lo = span * (best_i - 1) as f64 / GRID as f64;
    let hi = span * ((best_i + 1).min(GRID)) as f64 / GRID as f64;
    let d_floor = golden_min(t, lo, hi);
    let (t0, t_floor) = (t(0.0), t(d_floor));
    if t0 - t_floor <= 1e-12 {
        return Err(Error::Domain("transmission has no peak at two-photon resonance".into()));
    }
    let half = 0.5 * (t0 + t_floor);
    let (mut a, mut b) = (0.0, d_floor);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if t(m) > half {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(2.0 * 0.5 * (a + b) / (2.0 * PI))
}

/// Finds γ_gs such that the window FWHM equals `target_hz`, holding the other
/// parameters of `p` fixed. The width grows monotonically with γ_gs until
/// the peak washes out, so the upper bracket starts at `Γ` and halves until
/// a window exists, then bisection takes over.
pub fn calibrate_gamma_gs(p: &EitParams, target_hz: f64) -> Result<f64> {
    let width = |g: f64| window_fwhm_hz(&EitParams { gamma_gs: g, ..*p });
    let (mut lo, mut hi) = (0.0, p.gamma_e);
    let w_lo = width(lo)?;
    let mut w_hi = width(hi);
    for _ in 0..60 {
        if w_hi.is_ok() {
            break;
        }
        hi *= 0.5;
        w_hi = width(hi);
    }
    let w_hi = w_hi?;
    if !(w_lo <= target_hz && target_hz <= w_hi) {
        return Err(Error::Domain(format!("target window {target_hz} Hz outside reachable range [{w_lo}, {w_hi}] Hz")));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if width(mid)? < target_hz {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One row of the `eit` CSV output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub delta_hz: f64,
    pub transmission: f64,
    pub phase_rad: f64,
}

/// Samples `n` evenly spaced detunings over `[-span_hz, span_hz]`.
pub fn spectrum(p: &EitParams, span_hz: f64, n: usize) -> Vec<SpectrumPoint> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let delta_hz = -span_hz + 2.0 * span_hz * i as f64 / (n - 1) as f64;
            let d = 2.0 * PI * delta_hz;
            SpectrumPoint { delta_hz, transmission: transmission(p, d), phase_rad: phase(p, d) }
        })
        .collect()
}
