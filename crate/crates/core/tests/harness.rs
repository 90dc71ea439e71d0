use dsi_core::{run_experiment, ExperimentConfig};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

#[test]
fn sets_nest_in_every_replication() {
    let cfg = config("family=pa\nn=60\nattach=2\nsteps=10\nm=80\nreplications=8\nalphas=0.05,0.1,0.3,0.5,0.9\nseed=5\npooling=both\n");
    let report = run_experiment(&cfg).unwrap();
    for rep in &report.replications {
        // Alphas ascend, so confidence descends and sets shrink.
        assert!(rep.sizes.windows(2).all(|w| w[0] >= w[1]), "{:?}", rep.sizes);
        assert!(rep.covered.windows(2).all(|w| w[0] >= w[1]));
    }
    assert!(report.levels.windows(2).all(|w| w[0].mean_size >= w[1].mean_size));
}

#[test]
fn reports_repeat_byte_for_byte() {
    let text = "family=sw\nn=50\nring_degree=4\nrewire_prob=0.2\nsteps=8\nm=60\nreplications=6\nseed=11\npooling=iso\n";
    let mut a = config(text);
    let mut b = config(text);
    a.workers = 1;
    b.workers = 3;
    assert_eq!(run_experiment(&a).unwrap().to_json(), run_experiment(&b).unwrap().to_json());
}

#[test]
fn phase_timings_cover_wall_clock() {
    let mut cfg = config("family=tree\nbranching=3\ndepth=4\nsteps=20\nm=400\nreplications=6\nseed=2\npooling=both\n");
    cfg.workers = 1;
    let t = run_experiment(&cfg).unwrap().timing;
    let phases = t.setup_s + t.pool_detection_s + t.sampling_s + t.scoring_s;
    assert!(
        (phases - t.total_wall_s).abs() <= 0.05 * t.total_wall_s,
        "phases {phases:.4}s vs wall {:.4}s",
        t.total_wall_s
    );
}

#[test]
fn infeasible_steps_are_rejected() {
    let cfg = config("family=tree\nbranching=2\ndepth=2\nsteps=30\nreplications=1\n");
    assert!(run_experiment(&cfg).is_err());
}
