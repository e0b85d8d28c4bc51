//! Entangled-pair source model and the storage/retrieval channel.
//!
//! The four registers act as a lossless polarization interface: photon-1 `H`,
//! photon-2 `H`, photon-2 `V` and photon-1 `V` map onto registers 1–4, so the
//! stored state is `(S₁†S₂† + S₃†S₄†)|vac⟩/√2` and retrieval restores the
//! polarization state. What degrades the retrieved pair is the decay of the
//! per-photon efficiency `η(t) = η₀ e^{−t/τ}` against a constant,
//! polarization-blind background, which mixes in white noise `I/4`.

use serde::{Deserialize, Serialize};

use crate::qstate::{self, bell_phi_plus, bell_psi_plus, maximally_mixed, CMatrix, DensityMatrix};
use crate::{Error, Result};

/// Register index (1-based) holding each polarization component, in the
/// order `H₁, H₂, V₂, V₁`.
pub const REGISTER_MAP: [(&str, usize); 4] = [("H1", 1), ("H2", 2), ("V2", 3), ("V1", 4)];

/// Background coincidence probability per trial for which the t = 1 μs
/// retrieved state has fidelity 0.81 with `|φ+⟩` (with η₀ = 0.15,
/// τ = 2.8 μs and the reference source ratios).
pub const CALIBRATED_BG_COINC: f64 = 2.043_492_687_753_8e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Per-photon storage-and-retrieval efficiency at zero delay.
    pub eta0: f64,
    /// 1/e lifetime of the per-photon efficiency, s.
    pub tau: f64,
    /// Background coincidence probability per trial.
    pub bg_coinc: f64,
    /// Entangled-pair trial rate, Hz.
    pub trials_per_second: f64,
}

impl ChannelParams {
    pub fn reference_default() -> Self {
        ChannelParams { eta0: 0.15, tau: 2.8e-6, bg_coinc: CALIBRATED_BG_COINC, trials_per_second: 33.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta0) {
            return Err(Error::config("channel.eta0", format!("must lie in [0, 1], got {}", self.eta0)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config("channel.tau_s", format!("must be > 0, got {}", self.tau)));
        }
        if !(self.bg_coinc.is_finite() && self.bg_coinc >= 0.0) {
            return Err(Error::config("channel.bg_coinc", "must be >= 0"));
        }
        if !(self.trials_per_second.is_finite() && self.trials_per_second > 0.0) {
            return Err(Error::config("channel.trials_per_second_hz", "must be > 0"));
        }
        Ok(())
    }

    /// Per-photon efficiency `η₀ e^{−t/τ}`.
    pub fn efficiency(&self, t: f64) -> f64 {
        self.eta0 * (-t / self.tau).exp()
    }

    /// Signal coincidence probability per trial, `η(t)²`.
    pub fn signal_coinc(&self, t: f64) -> f64 {
        let eta = self.efficiency(t);
        eta * eta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// `|HH⟩ : |HV⟩` count ratio.
    pub ratio_hv: f64,
    /// `|++⟩ : |+−⟩` count ratio.
    pub ratio_pm: f64,
    /// Pair production rate, Hz.
    pub pair_rate: f64,
}

impl SourceParams {
    pub fn reference_default() -> Self {
        SourceParams { ratio_hv: 14.3, ratio_pm: 23.1, pair_rate: 33.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_hv > 1.0) {
            return Err(Error::config("source.ratio_hv", format!("must be > 1, got {}", self.ratio_hv)));
        }
        if !(self.ratio_pm > 1.0) {
            return Err(Error::config("source.ratio_pm", format!("must be > 1, got {}", self.ratio_pm)));
        }
        if !(self.pair_rate.is_finite() && self.pair_rate > 0.0) {
            return Err(Error::config("source.pair_rate_hz", "must be > 0"));
        }
        Ok(())
    }
}

/// Weights of `|φ+⟩⟨φ+|`, `|ψ+⟩⟨ψ+|` and `I/4` in the source state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceWeights {
    pub phi_plus: f64,
    pub psi_plus: f64,
    pub white: f64,
}

/// Solves for the three source weights from the two count ratios.
///
/// With `P(HH) = a/2 + c/4`, `P(HV) = b/2 + c/4`, `P(++) = (a+b)/2 + c/4`
/// and `P(+−) = c/4`, the constraints give `c = 2/(R± + 1)` and then a
/// 2×2 system for `a` and `b`.
pub fn source_weights(s: &SourceParams) -> Result<SourceWeights> {
    let (r_hv, r_pm) = (s.ratio_hv, s.ratio_pm);
    if !(r_hv > 0.0 && r_pm > 0.0) {
        return Err(Error::Infeasible("count ratios must be positive".into()));
    }
    let c = if r_pm.is_infinite() { 0.0 } else { 2.0 / (r_pm + 1.0) };
    let b = if r_hv.is_infinite() { -c / 2.0 } else { (2.0 * (1.0 - c) - (r_hv - 1.0) * c) / (2.0 + 2.0 * r_hv) };
    let a = 1.0 - b - c;
    if b < 0.0 {
        return Err(Error::Infeasible(format!(
            "HH:HV ratio {r_hv} too high for ++:+- ratio {r_pm}: |psi+> weight would be {b:.4}"
        )));
    }
    if a < 0.0 {
        return Err(Error::Infeasible(format!(
            "HH:HV ratio {r_hv} too low for ++:+- ratio {r_pm}: |phi+> weight would be {a:.4}"
        )));
    }
    Ok(SourceWeights { phi_plus: a, psi_plus: b, white: c })
}

/// `ρ_in = a|φ+⟩⟨φ+| + b|ψ+⟩⟨ψ+| + c I/4` matching both count ratios.
pub fn input_state(s: &SourceParams) -> Result<DensityMatrix> {
    if !(s.ratio_hv > 1.0 && s.ratio_pm > 1.0) {
        return Err(Error::Domain("source ratios must exceed 1".into()));
    }
    let w = source_weights(s)?;
    let m: CMatrix = &(&bell_phi_plus().matrix().scale_real(w.phi_plus)
        + &bell_psi_plus().matrix().scale_real(w.psi_plus))
        + &maximally_mixed().matrix().scale_real(w.white);
    DensityMatrix::new(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub rho_out: DensityMatrix,
    /// Total coincidence probability per trial, signal plus background.
    pub coinc_prob: f64,
    /// Signal share of the coincidences.
    pub signal_fraction: f64,
}

/// Stores `rho` for `t` seconds and retrieves it.
pub fn store_retrieve(rho: &DensityMatrix, t: f64, p: &ChannelParams) -> Result<Retrieved> {
    let cs = p.signal_coinc(t);
    let cb = p.bg_coinc;
    let total = cs + cb;
    if total <= 0.0 {
        return Err(Error::Domain("no signal and no background: retrieved state undefined".into()));
    }
    let frac = cs / total;
    let rho_out = rho.mix(&maximally_mixed(), frac)?;
    Ok(Retrieved { rho_out, coinc_prob: total, signal_fraction: frac })
}

/// Coefficients `(a, b)` with `V(t) = 1/(a + b e^{2t/τ})`.
pub fn visibility_coefficients(p: &ChannelParams, v0: f64) -> (f64, f64) {
    (1.0 / v0, p.bg_coinc / p.signal_coinc(0.0) / v0)
}

/// `V(t) = v0 · C_s(t) / (C_s(t) + C_b)`.
///
/// Because `C_s(t) = C_s(0) e^{−2t/τ}`, this equals `1/(a + b e^{2t/τ})` with
/// `a = 1/v0` and `b = (C_b/C_s(0))/v0`; see [`visibility_coefficients`].
pub fn visibility_decay(p: &ChannelParams, v0: f64, t: f64) -> Result<f64> {
    if !(v0 > 0.0 && v0 <= 1.0) {
        return Err(Error::Domain(format!("initial visibility {v0} outside (0, 1]")));
    }
    let cs = p.signal_coinc(t);
    if cs + p.bg_coinc <= 0.0 {
        return Ok(0.0);
    }
    Ok(v0 * cs / (cs + p.bg_coinc))
}

/// Time at which [`visibility_decay`] falls to `threshold`; `+∞` if it
/// never does and `0` if it starts below.
pub fn visibility_crossing(p: &ChannelParams, v0: f64, threshold: f64) -> f64 {
    let (a, b) = visibility_coefficients(p, v0);
    let target = 1.0 / threshold;
    if a >= target {
        return 0.0;
    }
    if b <= 0.0 {
        return f64::INFINITY;
    }
    0.5 * p.tau * ((target - a) / b).ln().max(0.0)
}

/// Uhlmann fidelity between the input and retrieved states.
pub fn process_fidelity(rho_in: &DensityMatrix, rho_out: &DensityMatrix) -> f64 {
    qstate::fidelity(rho_in, rho_out)
}

/// Background probability that puts the retrieved-state fidelity with
/// `|φ+⟩` at `target` after storing `rho_in` for `t`.
///
/// Mixing with `I/4` moves the fidelity linearly from `F(φ+, ρ_in)` to
/// `1/4`, so the signal fraction follows in closed form.
pub fn calibrate_background(rho_in: &DensityMatrix, t: f64, p: &ChannelParams, target: f64) -> Result<f64> {
    let f_in = qstate::fidelity(&bell_phi_plus(), rho_in);
    if !(0.25 < target && target <= f_in) {
        return Err(Error::Domain(format!("target fidelity {target} outside reachable range (0.25, {f_in}]")));
    }
    let frac = (target - 0.25) / (f_in - 0.25);
    Ok(p.signal_coinc(t) * (1.0 - frac) / frac)
}
