use holomem::scenario::{self, Provenance, ScenarioConfig};
use holomem::tomo::Scheme;
use holomem::Error;

fn quick() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::reference_default();
    cfg.mc_sets = 8;
    cfg.storage_times_s = vec![0.0, 1e-6, 2e-6];
    cfg
}

fn report_in_pool(cfg: &ScenarioConfig, threads: usize) -> String {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| scenario::run(cfg))
        .unwrap()
        .0
        .to_json()
        .unwrap()
}

#[test]
fn reports_are_byte_identical_across_worker_counts() {
    let cfg = quick();
    let one = report_in_pool(&cfg, 1);
    assert_eq!(one, report_in_pool(&cfg, 4));
    assert_eq!(one, report_in_pool(&cfg, 2));
    let mut other = cfg.clone();
    other.master_seed += 1;
    assert_ne!(one, report_in_pool(&other, 2));
}

#[test]
fn report_has_expected_shape() {
    let (report, counts) = scenario::run(&quick()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["config", "analytic", "statistical", "seeds", "version"] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(report.statistical.storage.len(), 3);
    assert_eq!(counts.storage.len(), 3);
    assert_eq!(counts.input.len(), 36);
    assert_eq!(report.analytic.geometry.capacity.provenance, Provenance::Reported);
    assert_eq!(report.analytic.eit.ideal_group_delay_s.provenance, Provenance::Derived);
    // every recorded seed is reproducible from the master seed
    for s in &report.seeds {
        assert_eq!(s.seed, holomem::seeds::child_seed(report.config.master_seed, &s.label, s.index));
    }
    // the embedded config regenerates the same report
    let again = scenario::run(&report.config).unwrap().0;
    assert_eq!(again.to_json().unwrap(), report.to_json().unwrap());
}

#[test]
fn sixteen_setting_scheme_runs() {
    let mut cfg = quick();
    cfg.tomo_scheme = Scheme::Sixteen;
    let (report, counts) = scenario::run(&cfg).unwrap();
    assert_eq!(counts.input.len(), 16);
    assert!(report.converged());
}

#[test]
fn config_errors_carry_field_paths() {
    let cases: Vec<(fn(&mut ScenarioConfig), &str)> = vec![
        (|c| c.eit.od = 0.0, "eit.od"),
        (|c| c.channel.tau_s = -1.0, "channel.tau_s"),
        (|c| c.channel.eta0 = 1.5, "channel.eta0"),
        (|c| c.geometry.cloud_sigma_m[1] = 0.0, "geometry.cloud_sigma_m[1]"),
        (|c| c.geometry.signal_angles_deg = vec![1.0, 1.0], "geometry.signal_angles_deg[1]"),
        (|c| c.mc_sets = 1, "mc_sets"),
        (|c| c.n_trials = 0, "n_trials"),
        (|c| c.storage_times_s = vec![], "storage_times_s"),
    ];
    for (mutate, want) in cases {
        let mut cfg = ScenarioConfig::reference_default();
        mutate(&mut cfg);
        match scenario::run(&cfg) {
            Err(Error::Config { path, .. }) => assert_eq!(path, want),
            Err(e) => panic!("{want}: unexpected error {e}"),
            Ok(_) => panic!("{want}: accepted"),
        }
    }
}

#[test]
fn infeasible_source_is_reported_not_simulated() {
    let mut cfg = quick();
    cfg.source.ratio_hv = 50.0;
    cfg.source.ratio_pm = 10.0;
    assert!(matches!(scenario::run(&cfg), Err(Error::Infeasible(_))));
}

#[test]
fn toml_text_round_trips() {
    let cfg = quick();
    let text = cfg.to_toml_string().unwrap();
    let back = ScenarioConfig::from_toml_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_toml_string().unwrap(), text);
    assert!(ScenarioConfig::from_toml_str("tomo_scheme = 12").is_err());
}
