//! `holomem` command-line interface.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 numerical
//! non-convergence (results are still written).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use holomem::channel;
use holomem::eitline::{self, EitParams};
use holomem::fitkit;
use holomem::io as hio;
use holomem::measure::{self, Convention, REFERENCE_CHSH_ANGLES};
use holomem::qstate::{self, bell_phi_plus, bell_psi_plus};
use holomem::registers;
use holomem::scenario::{self, ScenarioConfig, Visibilities};
use holomem::seeds::child_seed;
use holomem::tomo::{self, MleOptions, Scheme};
use serde_json::json;

#[derive(Parser)]
#[command(name = "holomem", version, about = "Holographic quad-register quantum memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario TOML; the bundled reference scenario is used if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn scenario(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ScenarioConfig::reference_default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        Ok(cfg)
    }

    fn writer(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn emit_json(&self, value: &serde_json::Value) -> anyhow::Result<()> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    PhiPlus,
    PsiPlus,
    /// The modelled source state of the scenario.
    Input,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitKind {
    Exp,
    Vis,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Mirrored,
    Textbook,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full scenario and write the JSON report.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Directory for the simulated count CSVs.
        #[arg(long)]
        counts_out: Option<PathBuf>,
    },
    /// Maximum-likelihood tomography of a count CSV.
    Tomo {
        #[command(flatten)]
        common: Common,
        /// Count CSV with columns setting_label,counts,duration_s.
        #[arg(long)]
        input: PathBuf,
        /// Tomography scheme, 16 or 36 settings.
        #[arg(long, default_value_t = 36)]
        scheme: u32,
        #[arg(long, value_enum, default_value_t = Target::PhiPlus)]
        target: Target,
        /// Monte Carlo sets; defaults to the scenario's `mc_sets`.
        #[arg(long)]
        n_sets: Option<usize>,
        /// Optimizer iteration cap per reconstruction.
        #[arg(long, default_value_t = 10_000)]
        max_iterations: usize,
    },
    /// CHSH S of the modelled source or a retrieved state.
    Chsh {
        #[command(flatten)]
        common: Common,
        /// Storage time of the retrieved state; the input state if omitted.
        #[arg(long)]
        storage_time_s: Option<f64>,
        #[arg(long, value_enum, default_value_t = ConventionArg::Mirrored)]
        convention: ConventionArg,
    },
    /// Mode capacity of the memory geometry.
    Capacity {
        #[command(flatten)]
        common: Common,
    },
    /// EIT transmission and phase spectrum as CSV.
    Eit {
        #[command(flatten)]
        common: Common,
        /// Resonant optical depth; defaults to the scenario's `eit.od`.
        #[arg(long)]
        od: Option<f64>,
        /// Control Rabi frequency Ω/2π in Hz.
        #[arg(long)]
        rabi_hz: Option<f64>,
        /// Ground-state decoherence rate γ/2π in Hz.
        #[arg(long)]
        gamma_gs_hz: Option<f64>,
        /// Half-span of the detuning grid, Hz.
        #[arg(long, default_value_t = 20e6)]
        span_hz: f64,
        /// Number of detuning samples.
        #[arg(long, default_value_t = 801)]
        points: usize,
    },
    /// Fit a decay model to a `t_s,y,sigma` CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Model: exponential efficiency decay or visibility decay.
        #[arg(long, value_enum)]
        kind: FitKind,
        /// Data CSV with columns t_s,y,sigma.
        #[arg(long)]
        input: PathBuf,
        /// Efficiency lifetime for the visibility model; defaults to the scenario's `tau_s`.
        #[arg(long)]
        tau_s: Option<f64>,
        /// Fit the lifetime as a free parameter.
        #[arg(long)]
        float_tau: bool,
    },
    /// Monte Carlo register crosstalk for every pair of registers.
    Crosstalk {
        #[command(flatten)]
        common: Common,
    },
}

enum Outcome {
    Done,
    NotConverged(String),
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn simulate(common: &Common, counts_out: Option<&Path>) -> anyhow::Result<Outcome> {
    let cfg = common.scenario()?;
    let (report, counts) = scenario::run(&cfg)?;
    if let Some(dir) = counts_out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        hio::write_counts(File::create(dir.join("input.csv"))?, &counts.input)?;
        for (i, c) in counts.storage.iter().enumerate() {
            hio::write_counts(File::create(dir.join(format!("storage_{i}.csv")))?, c)?;
        }
    }
    let mut w = common.writer()?;
    w.write_all(report.to_json()?.as_bytes())?;
    writeln!(w)?;
    w.flush()?;
    Ok(if report.converged() {
        Outcome::Done
    } else {
        Outcome::NotConverged("a reconstruction or fit hit its iteration cap".into())
    })
}

fn tomography(
    common: &Common,
    input: &Path,
    scheme: u32,
    target: Target,
    n_sets: Option<usize>,
    max_iterations: usize,
) -> anyhow::Result<Outcome> {
    let cfg = common.scenario()?;
    let sc = cfg.to_scenario()?;
    let scheme = Scheme::try_from(scheme).map_err(anyhow::Error::msg)?;
    let ts = tomo::make_settings(scheme);
    let records = hio::read_counts(open(input)?)?;
    if records.len() != ts.len() {
        bail!("{} count records for a {}-setting scheme", records.len(), ts.len());
    }
    let counts = tomo::align_counts(&records, &ts)?;
    let target_rho = match target {
        Target::PhiPlus => bell_phi_plus(),
        Target::PsiPlus => bell_psi_plus(),
        Target::Input => channel::input_state(&sc.source)?,
    };
    let opts = MleOptions { max_iterations, ..MleOptions::default() };
    let mle = tomo::mle_reconstruct(&counts, &ts, &opts)?;
    let n_sets = n_sets.unwrap_or(sc.mc_sets);
    let mc =
        tomo::monte_carlo_fidelity(&counts, &ts, &target_rho, n_sets, child_seed(sc.master_seed, "mc-cli", 0), &opts)?;
    common.emit_json(&json!({
        "rho_hat": mle.rho_hat,
        "fidelity_vs_target": qstate::fidelity(&target_rho, &mle.rho_hat),
        "chsh_s": measure::chsh_s(&mle.rho_hat, REFERENCE_CHSH_ANGLES, Convention::Mirrored),
        "visibilities": Visibilities::of(&mle.rho_hat),
        "log_likelihood": mle.log_likelihood,
        "converged": mle.converged,
        "iterations": mle.iterations,
        "mc": { "mean": mc.fidelity_mean, "std": mc.fidelity_std, "n_sets": mc.n_sets, "nonconverged": mc.nonconverged },
    }))?;
    Ok(if mle.converged { Outcome::Done } else { Outcome::NotConverged("likelihood maximization".into()) })
}

fn chsh(common: &Common, t: Option<f64>, convention: ConventionArg) -> anyhow::Result<Outcome> {
    let sc = common.scenario()?.to_scenario()?;
    let mut rho = channel::input_state(&sc.source)?;
    if let Some(t) = t {
        if !(t.is_finite() && t >= 0.0) {
            bail!("storage time must be >= 0, got {t}");
        }
        rho = channel::store_retrieve(&rho, t, &sc.channel)?.rho_out;
    }
    let conv = match convention {
        ConventionArg::Mirrored => Convention::Mirrored,
        ConventionArg::Textbook => Convention::Textbook,
    };
    let [a, ap, b, bp] = REFERENCE_CHSH_ANGLES;
    let e = |x, y| measure::correlation(&rho, x, y, conv);
    common.emit_json(&json!({
        "storage_time_s": t,
        "convention": conv,
        "angles_deg": REFERENCE_CHSH_ANGLES.map(f64::to_degrees),
        "correlations": [e(a, b), e(a, bp), e(ap, b), e(ap, bp)],
        "s": measure::chsh_s(&rho, REFERENCE_CHSH_ANGLES, conv),
        "fidelity_phi_plus": qstate::fidelity(&bell_phi_plus(), &rho),
    }))?;
    Ok(Outcome::Done)
}

fn capacity(common: &Common) -> anyhow::Result<Outcome> {
    let sc = common.scenario()?.to_scenario()?;
    let c = registers::mode_capacity(&sc.geometry);
    let mut w = common.writer()?;
    writeln!(w, "{c:.1}")?;
    w.flush()?;
    Ok(Outcome::Done)
}

fn eit(
    common: &Common,
    od: Option<f64>,
    rabi_hz: Option<f64>,
    gamma_gs_hz: Option<f64>,
    span_hz: f64,
    points: usize,
) -> anyhow::Result<Outcome> {
    let sc = common.scenario()?.to_scenario()?;
    let p = EitParams {
        od: od.unwrap_or(sc.eit.od),
        rabi: rabi_hz.map_or(sc.eit.rabi, |r| 2.0 * std::f64::consts::PI * r),
        gamma_gs: gamma_gs_hz.map_or(sc.eit.gamma_gs, |g| 2.0 * std::f64::consts::PI * g),
        ..sc.eit
    };
    p.validate()?;
    if !(span_hz.is_finite() && span_hz > 0.0) {
        bail!("--span-hz must be > 0");
    }
    if points < 2 {
        bail!("--points must be >= 2");
    }
    hio::write_spectrum(common.writer()?, &eitline::spectrum(&p, span_hz, points))?;
    if p.rabi > 0.0 {
        eprintln!(
            "window FWHM {:.4} MHz, group delay {:.1} ns",
            eitline::window_fwhm_hz(&p)? / 1e6,
            eitline::group_delay(&p)? * 1e9
        );
    }
    Ok(Outcome::Done)
}

fn fit(common: &Common, kind: FitKind, input: &Path, tau_s: Option<f64>, float_tau: bool) -> anyhow::Result<Outcome> {
    let data = hio::read_fit_data(open(input)?)?;
    let result = match kind {
        FitKind::Exp => fitkit::fit_exponential(&data)?,
        FitKind::Vis => {
            let tau = match tau_s {
                Some(t) => t,
                None => common.scenario()?.to_scenario()?.channel.tau,
            };
            fitkit::fit_visibility(&data, tau, float_tau)?
        }
    };
    common.emit_json(&serde_json::to_value(&result)?)?;
    Ok(if result.converged { Outcome::Done } else { Outcome::NotConverged("least-squares fit".into()) })
}

fn crosstalk(common: &Common) -> anyhow::Result<Outcome> {
    let sc = common.scenario()?.to_scenario()?;
    let g = &sc.geometry;
    let modes = registers::spin_wave_vectors(g);
    let mut rows = Vec::new();
    let mut k = 0u64;
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            let est = registers::crosstalk(&modes[i], &modes[j], g, child_seed(sc.master_seed, "crosstalk", k));
            rows.push(json!({
                "first": i,
                "second": j,
                "magnitude": est.overlap.norm(),
                "overlap_re": est.overlap.re,
                "overlap_im": est.overlap.im,
                "expected": registers::expected_overlap(&modes[i], &modes[j], g),
                "std_error": est.std_error,
                "n_sample": est.n_sample,
            }));
            k += 1;
        }
    }
    common.emit_json(&serde_json::Value::Array(rows))?;
    Ok(Outcome::Done)
}

fn dispatch(cmd: &Command) -> anyhow::Result<Outcome> {
    match cmd {
        Command::Simulate { common, counts_out } => simulate(common, counts_out.as_deref()),
        Command::Tomo { common, input, scheme, target, n_sets, max_iterations } => {
            tomography(common, input, *scheme, *target, *n_sets, *max_iterations)
        }
        Command::Chsh { common, storage_time_s, convention } => chsh(common, *storage_time_s, *convention),
        Command::Capacity { common } => capacity(common),
        Command::Eit { common, od, rabi_hz, gamma_gs_hz, span_hz, points } => {
            eit(common, *od, *rabi_hz, *gamma_gs_hz, *span_hz, *points)
        }
        Command::Fit { common, kind, input, tau_s, float_tau } => fit(common, *kind, input, *tau_s, *float_tau),
        Command::Crosstalk { common } => crosstalk(common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged(what)) => {
            eprintln!("holomem: did not converge: {what}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("holomem: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
