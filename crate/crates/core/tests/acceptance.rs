//! Acceptance criteria 1 to 9. Each test prints one `PASS`/`FAIL` line;
//! run with `-- --nocapture` (or `--show-output`) to see them.
// Rounded reference values such as 0.7071 are compared on purpose.
#![allow(clippy::approx_constant)]

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use holomem::channel::{self, SourceParams};
use holomem::eitline;
use holomem::fitkit::{self, DataPoint};
use holomem::measure::{self, Basis, Convention, REFERENCE_CHSH_ANGLES};
use holomem::qstate::{self, bell_phi_plus, random_state, werner};
use holomem::registers;
use holomem::scenario::{self, ScenarioConfig, VISIBILITY_THRESHOLD};
use holomem::seeds::child_seed;
use holomem::tomo::{self, MleOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const EXACT_TOL: f64 = 1e-9;
const CAPACITY: (f64, f64) = (240.6, 0.5);
const EIT_WINDOW_HZ: f64 = 2.2e6;
const EIT_DELAY_S: f64 = 160e-9;
const EIT_REL_TOL: f64 = 0.25;
const SOURCE_S: (f64, f64) = (2.54, 0.10);
const SOURCE_F: (f64, f64) = (0.879, 0.05);
const STORED_F_RANGE: (f64, f64) = (0.79, 0.83);
const PROCESS_F_RANGE: (f64, f64) = (0.96, 1.0);
const STORED_S: (f64, f64) = (2.25, 0.15);
const CROSSING_RANGE_S: (f64, f64) = (1.4e-6, 1.8e-6);
const MLE_MIN_FIDELITY: f64 = 0.999;
const INPUT_STD_RANGE: (f64, f64) = (0.0025, 0.01);
const OUTPUT_STD_RANGE: (f64, f64) = (0.01, 0.04);
const FIT_TAU_REL_TOL: f64 = 0.05;
const FIT_MIN_HITS: usize = 45;
const FIT_ROUND_TRIP_TOL: f64 = 1e-6;
const CROSSTALK_SIGMAS: f64 = 3.0;

fn verdict(n: u32, title: &str, checks: &[(bool, String)]) {
    let ok = checks.iter().all(|c| c.0);
    let detail: Vec<&str> = checks.iter().map(|c| c.1.as_str()).collect();
    println!("criterion {n} {}: {title}: {}", if ok { "PASS" } else { "FAIL" }, detail.join("; "));
    for (pass, what) in checks {
        assert!(pass, "criterion {n}: {what}");
    }
}

fn within(x: f64, (centre, tol): (f64, f64)) -> bool {
    (x - centre).abs() <= tol
}

fn inside(x: f64, (lo, hi): (f64, f64)) -> bool {
    lo <= x && x <= hi
}

#[test]
fn criterion_1_ideal_chsh() {
    let rho = bell_phi_plus();
    let mirrored = measure::chsh_s(&rho, REFERENCE_CHSH_ANGLES, Convention::Mirrored);
    let textbook = measure::chsh_s(&rho, REFERENCE_CHSH_ANGLES, Convention::Textbook);
    let d = common::dm(&rho);
    let oracle = common::chsh(|a, b| common::mirrored_correlation(&d, a, b), REFERENCE_CHSH_ANGLES);
    verdict(
        1,
        "ideal CHSH",
        &[
            ((mirrored - 2.0 * SQRT_2).abs() < EXACT_TOL, format!("mirrored S = {mirrored:.12}")),
            (textbook.abs() < EXACT_TOL, format!("textbook S = {textbook:.1e}")),
            ((oracle - mirrored).abs() < EXACT_TOL, format!("projector oracle S = {oracle:.12}")),
        ],
    );
}

#[test]
fn criterion_2_werner_thresholds() {
    let w = werner(FRAC_1_SQRT_2).unwrap();
    let f = qstate::fidelity(&bell_phi_plus(), &w);
    let f_oracle = (1.0 + 3.0 * FRAC_1_SQRT_2) / 4.0;
    let v = measure::visibility(&w, Basis::HV);
    verdict(
        2,
        "Werner thresholds",
        &[
            ((f - f_oracle).abs() < EXACT_TOL && (f - 0.7803).abs() < 5e-5, format!("F = {f:.6}")),
            ((v - FRAC_1_SQRT_2).abs() < EXACT_TOL && (v - 0.7071).abs() < 5e-5, format!("V = {v:.6}")),
        ],
    );
}

#[test]
fn criterion_3_mode_capacity() {
    let sc = ScenarioConfig::reference_default().to_scenario().unwrap();
    let n = registers::mode_capacity(&sc.geometry);
    verdict(3, "mode capacity", &[(within(n, CAPACITY), format!("N = {n:.3}"))]);
}

#[test]
fn criterion_4_eit_calibration() {
    let sc = ScenarioConfig::reference_default().to_scenario().unwrap();
    let w = eitline::window_fwhm_hz(&sc.eit).unwrap();
    let d = eitline::group_delay(&sc.eit).unwrap();
    verdict(
        4,
        "EIT window and delay",
        &[
            ((w / EIT_WINDOW_HZ - 1.0).abs() <= EIT_REL_TOL, format!("FWHM = {:.4} MHz", w / 1e6)),
            ((d / EIT_DELAY_S - 1.0).abs() <= EIT_REL_TOL, format!("delay = {:.1} ns", d * 1e9)),
        ],
    );
}

#[test]
fn criterion_5_source_model() {
    let src = SourceParams::reference_default();
    let rho = channel::input_state(&src).unwrap();
    let hv = measure::basis_probabilities(&rho, Basis::HV);
    let pm = measure::basis_probabilities(&rho, Basis::PM);
    let (r_hv, r_pm) = (hv[0] / hv[1], pm[0] / pm[1]);
    let s = measure::chsh_s(&rho, REFERENCE_CHSH_ANGLES, Convention::Mirrored);
    let f = qstate::fidelity(&bell_phi_plus(), &rho);
    verdict(
        5,
        "source model",
        &[
            ((r_hv / src.ratio_hv - 1.0).abs() < EXACT_TOL, format!("HH:HV = {r_hv:.9}")),
            ((r_pm / src.ratio_pm - 1.0).abs() < EXACT_TOL, format!("++:+- = {r_pm:.9}")),
            (within(s, SOURCE_S), format!("S_in = {s:.4}")),
            (within(f, SOURCE_F), format!("F_in = {f:.4}")),
        ],
    );
}

#[test]
fn criterion_6_storage_time_behaviour() {
    let sc = ScenarioConfig::reference_default().to_scenario().unwrap();
    let rho_in = channel::input_state(&sc.source).unwrap();
    let out = channel::store_retrieve(&rho_in, 1e-6, &sc.channel).unwrap().rho_out;
    let f = qstate::fidelity(&bell_phi_plus(), &out);
    let fp = channel::process_fidelity(&rho_in, &out);
    let s = measure::chsh_s(&out, REFERENCE_CHSH_ANGLES, Convention::Mirrored);
    let v0 = measure::average_visibility(&rho_in);
    let t_star = channel::visibility_crossing(&sc.channel, v0, VISIBILITY_THRESHOLD);
    verdict(
        6,
        "storage-time behaviour",
        &[
            (inside(f, STORED_F_RANGE), format!("F(1 us) = {f:.4}")),
            (inside(fp, PROCESS_F_RANGE), format!("process F = {fp:.4}")),
            (within(s, STORED_S), format!("S(1 us) = {s:.4}")),
            (inside(t_star, CROSSING_RANGE_S), format!("t* = {:.3} us", t_star * 1e6)),
        ],
    );
}

#[test]
fn criterion_7_tomography_consistency() {
    let cfg = ScenarioConfig::reference_default();
    let sc = cfg.to_scenario().unwrap();
    let ts = tomo::make_settings(sc.scheme);
    let opts = MleOptions::default();

    let mut worst: f64 = 1.0;
    for seed in 0..50u64 {
        let truth =
            random_state(&mut ChaCha8Rng::seed_from_u64(child_seed(7, "acceptance", seed)), 1 + seed as usize % 4);
        let r = tomo::mle_reconstruct(&tomo::expected_counts(&truth, &ts, 1e6), &ts, &opts).unwrap();
        common::assert_physical(&r.rho_hat, 1e-9);
        worst = worst.min(qstate::fidelity(&truth, &r.rho_hat));
    }

    // the scenario's own statistics: direct input and 1 us retrieval
    let mut one_us = cfg.clone();
    one_us.storage_times_s = vec![1e-6];
    one_us.mc_sets = 100;
    let (report, _) = scenario::run(&one_us).unwrap();
    let input = &report.statistical.input;
    let output = &report.statistical.storage[0];
    verdict(
        7,
        "tomography consistency",
        &[
            (worst > MLE_MIN_FIDELITY, format!("worst noiseless F = {worst:.6} over 50 states")),
            (
                inside(input.mc.std, INPUT_STD_RANGE) && input.mc.n_sets == 100,
                format!("input MC std = {:.4} ({} counts)", input.mc.std, input.total_counts),
            ),
            (
                inside(output.mc.std, OUTPUT_STD_RANGE),
                format!("1 us MC std = {:.4} ({} counts)", output.mc.std, output.total_counts),
            ),
        ],
    );
}

#[test]
fn criterion_8_fit_recovery() {
    let tau = 2.8e-6;
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut hits = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(8, "acceptance", seed));
        let data: Vec<DataPoint> = (0..8)
            .map(|i| {
                let t = i as f64 * 1e-6;
                let y = 0.15 * (-t / tau).exp();
                DataPoint { t, y: y * (1.0 + 0.05 * unit.sample(&mut rng)), sigma: 0.05 * y }
            })
            .collect();
        let fit = fitkit::fit_exponential(&data).unwrap();
        if (fit.param("tau").unwrap() / tau - 1.0).abs() <= FIT_TAU_REL_TOL {
            hits += 1;
        }
    }

    let sc = ScenarioConfig::reference_default().to_scenario().unwrap();
    let v0 = measure::average_visibility(&channel::input_state(&sc.source).unwrap());
    let (a, b) = channel::visibility_coefficients(&sc.channel, v0);
    let data: Vec<DataPoint> = (0..10)
        .map(|i| {
            let t = i as f64 * 0.4e-6;
            DataPoint { t, y: channel::visibility_decay(&sc.channel, v0, t).unwrap(), sigma: 0.01 }
        })
        .collect();
    let fit = fitkit::fit_visibility(&data, sc.channel.tau, false).unwrap();
    let (da, db) = ((fit.param("a").unwrap() - a).abs(), (fit.param("b").unwrap() - b).abs());
    verdict(
        8,
        "fit recovery",
        &[
            (hits >= FIT_MIN_HITS, format!("tau within 5% in {hits}/50 seeds")),
            (da < FIT_ROUND_TRIP_TOL && db < FIT_ROUND_TRIP_TOL, format!("|da| = {da:.1e}, |db| = {db:.1e}")),
        ],
    );
}

#[test]
fn criterion_9_property_suites() {
    // Tsirelson bound
    let mut max_s: f64 = 0.0;
    for seed in 0..1000u64 {
        let rho = random_state(&mut ChaCha8Rng::seed_from_u64(seed), 1 + seed as usize % 4);
        max_s = max_s.max(measure::chsh_s(&rho, REFERENCE_CHSH_ANGLES, Convention::Mirrored));
    }

    // crosstalk against the Gaussian characteristic function
    let mut g = registers::MemoryGeometry::reference_default();
    g.cloud_sigma = [4e-6, 4e-6, 8e-6];
    let modes = registers::spin_wave_vectors(&g);
    let mut xt_ok = true;
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            let est = registers::crosstalk(&modes[i], &modes[j], &g, child_seed(9, "acceptance", (i * 4 + j) as u64));
            let want = registers::expected_overlap(&modes[i], &modes[j], &g);
            let lim = CROSSTALK_SIGMAS * est.std_error;
            xt_ok &= (est.overlap.re - want).abs() <= lim && est.overlap.im.abs() <= lim;
        }
    }

    // channel outputs
    let sc = ScenarioConfig::reference_default().to_scenario().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut outputs = 0;
    for k in 0..200 {
        let rho = random_state(&mut rng, 1 + k % 4);
        let out = channel::store_retrieve(&rho, k as f64 * 5e-8, &sc.channel).unwrap();
        common::assert_physical(&out.rho_out, 1e-9);
        outputs += 1;
    }

    // byte-identical reports under a fixed seed
    let mut cfg = ScenarioConfig::reference_default();
    cfg.mc_sets = 10;
    cfg.storage_times_s = vec![0.0, 1e-6];
    let json = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| scenario::run(&cfg))
            .unwrap()
            .0
            .to_json()
            .unwrap()
    };
    let identical = json(1) == json(4);

    verdict(
        9,
        "property suites",
        &[
            (max_s <= 2.0 * SQRT_2 + EXACT_TOL, format!("max S over 1000 states = {max_s:.6}")),
            (xt_ok, format!("crosstalk within {CROSSTALK_SIGMAS} sigma for all pairs")),
            (outputs == 200, format!("{outputs} channel outputs physical")),
            (identical, "reports identical on 1 and 4 workers".to_string()),
        ],
    );
}
