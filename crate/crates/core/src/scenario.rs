//! Scenario configuration and the end-to-end simulation report.
//!
//! A scenario is read from TOML with unit-suffixed keys (`_s`, `_m`, `_hz`,
//! `_k`, `_deg`); frequencies are ordinary frequencies and are converted to
//! angular units internally. [`run`] produces a [`Report`] with two tracks:
//! closed-form model values and a seeded statistical replay (sampled counts,
//! maximum-likelihood reconstruction, Monte Carlo uncertainty, decay fits).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, SourceParams, SourceWeights};
use crate::eitline::{self, EitParams};
use crate::fitkit::{self, DataPoint, FitResult};
use crate::measure::{self, Basis, Convention, CountRecord, REFERENCE_CHSH_ANGLES};
use crate::qstate::{self, bell_phi_plus, DensityMatrix};
use crate::registers::{self, MemoryGeometry};
use crate::seeds::{child_seed, SeedRecord};
use crate::tomo::{self, MleOptions, Scheme, TomographySettings};
use crate::{Error, Result};

/// The bundled reference scenario.
pub const REFERENCE_TOML: &str = include_str!("../data/reference.toml");

/// Visibility threshold for the nonclassicality crossing time.
pub const VISIBILITY_THRESHOLD: f64 = 1.0 / std::f64::consts::SQRT_2;

/// Retrieved-to-input coincidence-rate ratio observed at 1 μs (0.03 Hz
/// retrieved against 1.3 Hz direct).
pub const OBSERVED_RATE_RATIO: f64 = 0.03 / 1.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub wavelength_m: f64,
    pub control_waist_m: f64,
    pub signal_waist_m: f64,
    pub cloud_length_m: f64,
    pub cloud_sigma_m: [f64; 3],
    pub atom_count: u64,
    pub temperature_k: f64,
    pub signal_angles_deg: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EitConfig {
    pub od: f64,
    pub rabi_hz: f64,
    pub gamma_e_hz: f64,
    pub gamma_gs_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub ratio_hv: f64,
    pub ratio_pm: f64,
    pub pair_rate_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub eta0: f64,
    pub tau_s: f64,
    pub bg_coinc: f64,
    pub trials_per_second_hz: f64,
}

/// On-disk scenario. Serializing and re-parsing is a fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub master_seed: u64,
    pub tomo_scheme: Scheme,
    /// Trials per analyzer setting for retrieved states.
    pub n_trials: u64,
    /// Trials per analyzer setting for the directly measured input state.
    pub input_trials: u64,
    pub mc_sets: usize,
    pub storage_times_s: Vec<f64>,
    pub geometry: GeometryConfig,
    pub eit: EitConfig,
    pub source: SourceConfig,
    pub channel: ChannelConfig,
}

/// Validated scenario in SI / angular units.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub master_seed: u64,
    pub scheme: Scheme,
    pub n_trials: u64,
    pub input_trials: u64,
    pub mc_sets: usize,
    pub storage_times: Vec<f64>,
    pub geometry: MemoryGeometry,
    pub eit: EitParams,
    pub source: SourceParams,
    pub channel: ChannelParams,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn reference_default() -> Self {
        Self::from_toml_str(REFERENCE_TOML).expect("bundled scenario parses")
    }

    /// Converts units and checks every field, reporting the first offending
    /// key path.
    pub fn to_scenario(&self) -> Result<Scenario> {
        if self.n_trials == 0 {
            return Err(Error::config("n_trials", "must be >= 1"));
        }
        if self.input_trials == 0 {
            return Err(Error::config("input_trials", "must be >= 1"));
        }
        if self.mc_sets < 2 {
            return Err(Error::config("mc_sets", format!("must be >= 2, got {}", self.mc_sets)));
        }
        if self.storage_times_s.is_empty() {
            return Err(Error::config("storage_times_s", "at least one storage time required"));
        }
        for (i, &t) in self.storage_times_s.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::config(format!("storage_times_s[{i}]"), format!("must be >= 0, got {t}")));
            }
        }
        let g = &self.geometry;
        let geometry = MemoryGeometry {
            wavelength: g.wavelength_m,
            control_waist: g.control_waist_m,
            signal_waist: g.signal_waist_m,
            cloud_length: g.cloud_length_m,
            cloud_sigma: g.cloud_sigma_m,
            atom_count: g.atom_count,
            temperature: g.temperature_k,
            signal_angles: g.signal_angles_deg.iter().map(|d| d.to_radians()).collect(),
        };
        geometry.validate()?;
        for (i, d) in g.signal_angles_deg.iter().enumerate() {
            if d.abs() >= 90.0 {
                return Err(Error::config(format!("geometry.signal_angles_deg[{i}]"), "must lie in (-90, 90)"));
            }
        }
        let eit = EitParams {
            od: self.eit.od,
            rabi: 2.0 * PI * self.eit.rabi_hz,
            gamma_e: 2.0 * PI * self.eit.gamma_e_hz,
            gamma_gs: 2.0 * PI * self.eit.gamma_gs_hz,
        };
        eit.validate()?;
        if eit.rabi <= 0.0 {
            return Err(Error::config("eit.rabi_hz", "must be > 0"));
        }
        let source = SourceParams {
            ratio_hv: self.source.ratio_hv,
            ratio_pm: self.source.ratio_pm,
            pair_rate: self.source.pair_rate_hz,
        };
        source.validate()?;
        let channel = ChannelParams {
            eta0: self.channel.eta0,
            tau: self.channel.tau_s,
            bg_coinc: self.channel.bg_coinc,
            trials_per_second: self.channel.trials_per_second_hz,
        };
        channel.validate()?;
        if channel.eta0 == 0.0 && channel.bg_coinc == 0.0 {
            return Err(Error::config("channel.bg_coinc", "no signal and no background"));
        }
        Ok(Scenario {
            master_seed: self.master_seed,
            scheme: self.tomo_scheme,
            n_trials: self.n_trials,
            input_trials: self.input_trials,
            mc_sets: self.mc_sets,
            storage_times: self.storage_times_s.clone(),
            geometry,
            eit,
            source,
            channel,
        })
    }
}

/// Where a headline number's comparison value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Compared against a value reported by the reference experiment.
    Reported,
    /// Model output without an experimental counterpart.
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub value: f64,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_uncertainty: Option<f64>,
}

impl Headline {
    fn reported(value: f64, reference: f64, uncertainty: Option<f64>) -> Self {
        Headline {
            value,
            provenance: Provenance::Reported,
            reference: Some(reference),
            reference_uncertainty: uncertainty,
        }
    }

    fn derived(value: f64) -> Self {
        Headline { value, provenance: Provenance::Derived, reference: None, reference_uncertainty: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visibilities {
    pub hv: f64,
    pub pm: f64,
    pub rl: f64,
    pub average: f64,
}

impl Visibilities {
    pub fn of(rho: &DensityMatrix) -> Self {
        let v = |b| measure::visibility(rho, b);
        Visibilities { hv: v(Basis::HV), pm: v(Basis::PM), rl: v(Basis::RL), average: measure::average_visibility(rho) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub weights: SourceWeights,
    pub fidelity_phi_plus: Headline,
    pub chsh_s: Headline,
    pub visibilities: Visibilities,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegisterReport {
    pub label: String,
    pub angle_deg: f64,
    pub wave_vector: [f64; 3],
    pub magnitude: f64,
    pub dephasing_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkReport {
    pub first: usize,
    pub second: usize,
    pub overlap_re: f64,
    pub overlap_im: f64,
    pub magnitude: f64,
    pub expected: f64,
    pub std_error: f64,
    pub n_sample: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub capacity: Headline,
    pub registers: Vec<RegisterReport>,
    pub crosstalk: Vec<CrosstalkReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EitReport {
    pub window_fwhm_hz: Headline,
    pub group_delay_s: Headline,
    pub ideal_group_delay_s: Headline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoragePoint {
    pub t_s: f64,
    pub efficiency: f64,
    pub coinc_prob: f64,
    pub signal_fraction: f64,
    /// Signal coincidence probability relative to the source, `η(t)²`.
    pub rate_ratio: f64,
    pub fidelity_phi_plus: f64,
    pub process_fidelity: f64,
    pub chsh_s: f64,
    pub visibilities: Visibilities,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub initial_visibility: f64,
    pub visibility_a: f64,
    pub visibility_b: f64,
    pub nonclassical_time_s: Headline,
    /// Observed retrieved-to-input rate ratio at 1 μs; compare with the
    /// model's `η(1 μs)²`, which ignores detector and setup losses that
    /// differ between the two paths.
    pub observed_rate_ratio: f64,
    pub model_rate_ratio_1us: f64,
    pub storage: Vec<StoragePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analytic {
    pub source: SourceReport,
    pub geometry: GeometryReport,
    pub eit: EitReport,
    pub channel: ChannelReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n_sets: usize,
    pub mean: f64,
    pub std: f64,
    pub nonconverged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub t_s: Option<f64>,
    pub total_counts: u64,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub rho_hat: DensityMatrix,
    pub fidelity_phi_plus: f64,
    pub chsh_s: f64,
    pub visibilities: Visibilities,
    /// Coincidence probability per trial implied by the reconstruction.
    pub coinc_prob_estimate: f64,
    pub mc: McReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub efficiency: Option<FitResult>,
    pub visibility: Option<FitResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statistical {
    pub input: Reconstruction,
    pub storage: Vec<Reconstruction>,
    /// Fidelity between reconstructed input and reconstructed retrieved
    /// states, per storage time.
    pub process_fidelity: Vec<f64>,
    pub fits: Fits,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub config: ScenarioConfig,
    pub analytic: Analytic,
    pub statistical: Statistical,
    pub seeds: Vec<SeedRecord>,
    pub version: String,
}

impl Report {
    /// `true` if every primary reconstruction and fit converged. Monte Carlo
    /// sets are tallied separately in each [`McReport`].
    pub fn converged(&self) -> bool {
        let s = &self.statistical;
        s.input.converged
            && s.storage.iter().all(|r| r.converged)
            && [&s.fits.efficiency, &s.fits.visibility].iter().all(|f| f.as_ref().is_none_or(|f| f.converged))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Simulated measurement records: the input state and one per storage time.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedCounts {
    pub input: Vec<CountRecord>,
    pub storage: Vec<Vec<CountRecord>>,
}

fn analytic(sc: &Scenario, rho_in: &DensityMatrix) -> Result<Analytic> {
    let phi = bell_phi_plus();
    let weights = channel::source_weights(&sc.source)?;
    let source = SourceReport {
        weights,
        fidelity_phi_plus: Headline::reported(qstate::fidelity(&phi, rho_in), 0.879, Some(0.005)),
        chsh_s: Headline::reported(
            measure::chsh_s(rho_in, REFERENCE_CHSH_ANGLES, Convention::Mirrored),
            2.54,
            Some(0.02),
        ),
        visibilities: Visibilities::of(rho_in),
    };

    let g = &sc.geometry;
    let modes = registers::spin_wave_vectors(g);
    let regs = modes
        .iter()
        .zip(&g.signal_angles)
        .zip(channel::REGISTER_MAP.iter().map(|r| r.0).chain(std::iter::repeat("extra")))
        .map(|((m, &a), label)| RegisterReport {
            label: label.to_string(),
            angle_deg: a.to_degrees(),
            wave_vector: m.q,
            magnitude: m.magnitude(),
            dephasing_time_s: registers::motional_dephasing_time(m, g),
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            pairs.push((i, j));
        }
    }
    let crosstalk = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let est = registers::crosstalk(&modes[i], &modes[j], g, child_seed(sc.master_seed, "crosstalk", k as u64));
            CrosstalkReport {
                first: i,
                second: j,
                overlap_re: est.overlap.re,
                overlap_im: est.overlap.im,
                magnitude: est.overlap.norm(),
                expected: registers::expected_overlap(&modes[i], &modes[j], g),
                std_error: est.std_error,
                n_sample: est.n_sample,
            }
        })
        .collect();
    let geometry = GeometryReport {
        capacity: Headline::reported(registers::mode_capacity(g), 240.0, None),
        registers: regs,
        crosstalk,
    };

    let eit = EitReport {
        window_fwhm_hz: Headline::reported(eitline::window_fwhm_hz(&sc.eit)?, 2.2e6, None),
        group_delay_s: Headline::reported(eitline::group_delay(&sc.eit)?, 160e-9, None),
        ideal_group_delay_s: Headline::derived(eitline::ideal_group_delay(&sc.eit)),
    };

    let p = &sc.channel;
    let v0 = measure::average_visibility(rho_in);
    let (va, vb) = channel::visibility_coefficients(p, v0);
    let storage = sc
        .storage_times
        .iter()
        .map(|&t| {
            let r = channel::store_retrieve(rho_in, t, p)?;
            Ok(StoragePoint {
                t_s: t,
                efficiency: p.efficiency(t),
                coinc_prob: r.coinc_prob,
                signal_fraction: r.signal_fraction,
                rate_ratio: p.signal_coinc(t),
                fidelity_phi_plus: qstate::fidelity(&phi, &r.rho_out),
                process_fidelity: channel::process_fidelity(rho_in, &r.rho_out),
                chsh_s: measure::chsh_s(&r.rho_out, REFERENCE_CHSH_ANGLES, Convention::Mirrored),
                visibilities: Visibilities::of(&r.rho_out),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let channel = ChannelReport {
        initial_visibility: v0,
        visibility_a: va,
        visibility_b: vb,
        nonclassical_time_s: Headline::reported(
            channel::visibility_crossing(p, v0, VISIBILITY_THRESHOLD),
            1.6e-6,
            Some(0.2e-6),
        ),
        observed_rate_ratio: OBSERVED_RATE_RATIO,
        model_rate_ratio_1us: p.signal_coinc(1e-6),
        storage,
    };
    Ok(Analytic { source, geometry, eit, channel })
}

fn reconstruct(
    counts: &[CountRecord],
    ts: &TomographySettings,
    t: Option<f64>,
    n_trials: u64,
    mc_sets: usize,
    mc_seed: u64,
) -> Result<Reconstruction> {
    let opts = MleOptions::default();
    let phi = bell_phi_plus();
    let mle = tomo::mle_reconstruct(counts, ts, &opts)?;
    let mc = tomo::monte_carlo_fidelity(counts, ts, &phi, mc_sets, mc_seed, &opts)?;
    let total: u64 = counts.iter().map(|c| c.counts).sum();
    // profiled rate: counts per unit probability per setting
    let weight: f64 =
        counts.iter().zip(&ts.settings).map(|(c, s)| c.duration * measure::coincidence_prob(&mle.rho_hat, s)).sum();
    let coinc = if weight > 0.0 { total as f64 / weight / n_trials as f64 } else { 0.0 };
    Ok(Reconstruction {
        t_s: t,
        total_counts: total,
        converged: mle.converged,
        iterations: mle.iterations,
        log_likelihood: mle.log_likelihood,
        fidelity_phi_plus: qstate::fidelity(&phi, &mle.rho_hat),
        chsh_s: measure::chsh_s(&mle.rho_hat, REFERENCE_CHSH_ANGLES, Convention::Mirrored),
        visibilities: Visibilities::of(&mle.rho_hat),
        coinc_prob_estimate: coinc,
        mc: McReport { n_sets: mc.n_sets, mean: mc.fidelity_mean, std: mc.fidelity_std, nonconverged: mc.nonconverged },
        rho_hat: mle.rho_hat,
    })
}

/// Samples the tomography counts for the input state and every storage time.
pub fn simulate_counts(sc: &Scenario) -> Result<SimulatedCounts> {
    let ts = tomo::make_settings(sc.scheme);
    let rho_in = channel::input_state(&sc.source)?;
    let input = measure::sample_counts(
        &rho_in,
        &ts.settings,
        sc.input_trials,
        1.0,
        child_seed(sc.master_seed, "counts-input", 0),
    )?;
    let storage = sc
        .storage_times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let r = channel::store_retrieve(&rho_in, t, &sc.channel)?;
            let seed = child_seed(sc.master_seed, "counts-storage", i as u64);
            measure::sample_counts(&r.rho_out, &ts.settings, sc.n_trials, r.coinc_prob, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulatedCounts { input, storage })
}

/// Background-subtracted efficiency estimate `√(Ĉ − C_b)` with its Poisson
/// uncertainty; `None` where the estimate is not positive.
fn efficiency_point(r: &Reconstruction, bg: f64) -> Option<DataPoint> {
    let t = r.t_s?;
    let signal = r.coinc_prob_estimate - bg;
    if !(signal > 0.0) || r.total_counts == 0 {
        return None;
    }
    let eta = signal.sqrt();
    // relative Poisson error of the total carries over to Ĉ
    let sigma_c = r.coinc_prob_estimate / (r.total_counts as f64).sqrt();
    Some(DataPoint { t, y: eta, sigma: sigma_c / (2.0 * eta) })
}

fn fits(sc: &Scenario, storage: &[Reconstruction]) -> Fits {
    let eff: Vec<DataPoint> = storage.iter().filter_map(|r| efficiency_point(r, sc.channel.bg_coinc)).collect();
    let efficiency = if eff.len() >= 3 { fitkit::fit_exponential(&eff).ok() } else { None };
    let vis: Vec<DataPoint> = storage
        .iter()
        .filter(|r| r.mc.std > 0.0)
        .map(|r| DataPoint { t: r.t_s.unwrap_or(0.0), y: r.visibilities.average, sigma: r.mc.std })
        .collect();
    let visibility = if vis.len() >= 3 { fitkit::fit_visibility(&vis, sc.channel.tau, false).ok() } else { None };
    Fits { efficiency, visibility }
}

fn seed_records(sc: &Scenario) -> Vec<SeedRecord> {
    let m = sc.master_seed;
    let mut out = vec![SeedRecord::derive(m, "counts-input", 0), SeedRecord::derive(m, "mc-input", 0)];
    for i in 0..sc.storage_times.len() as u64 {
        out.push(SeedRecord::derive(m, "counts-storage", i));
        out.push(SeedRecord::derive(m, "mc-storage", i));
    }
    let n = sc.geometry.signal_angles.len() as u64;
    for k in 0..n * n.saturating_sub(1) / 2 {
        out.push(SeedRecord::derive(m, "crosstalk", k));
    }
    out
}

/// Runs both tracks for `cfg`. Identical configurations give byte-identical
/// reports regardless of thread count.
pub fn run(cfg: &ScenarioConfig) -> Result<(Report, SimulatedCounts)> {
    let sc = cfg.to_scenario()?;
    let rho_in = channel::input_state(&sc.source)?;
    let analytic = analytic(&sc, &rho_in)?;

    let ts = tomo::make_settings(sc.scheme);
    let counts = simulate_counts(&sc)?;
    let m = sc.master_seed;
    let (input, storage) = rayon::join(
        || reconstruct(&counts.input, &ts, None, sc.input_trials, sc.mc_sets, child_seed(m, "mc-input", 0)),
        || {
            counts
                .storage
                .par_iter()
                .enumerate()
                .map(|(i, c)| {
                    let seed = child_seed(m, "mc-storage", i as u64);
                    reconstruct(c, &ts, Some(sc.storage_times[i]), sc.n_trials, sc.mc_sets, seed)
                })
                .collect::<Result<Vec<_>>>()
        },
    );
    let (input, storage) = (input?, storage?);
    let process_fidelity = storage.iter().map(|r| qstate::fidelity(&input.rho_hat, &r.rho_hat)).collect();
    let fits = fits(&sc, &storage);

    let report = Report {
        config: cfg.clone(),
        analytic,
        statistical: Statistical { input, storage, process_fidelity, fits },
        seeds: seed_records(&sc),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok((report, counts))
}
