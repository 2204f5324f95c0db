//! Generator calibration at realistic sizes.

use netquality_core::matching::{run_experiment, ExperimentKind, ExperimentSpec};
use netquality_core::metrics::{degree_beauty_correlation, overall_profiles, Direction};
use netquality_core::stats::mean;
use netquality_core::synth::{generate, SynthConfig};
use netquality_core::TemporalGraph;

fn graph(cfg: &SynthConfig) -> TemporalGraph {
    let (g, warnings) = generate(cfg).unwrap().build_graph().unwrap();
    assert!(warnings.is_empty());
    g
}

#[test]
fn indegree_correlation_and_beauty_mean_hit_their_targets() {
    for seed in 0..3 {
        let cfg = SynthConfig {
            n_users: 10_000,
            seed,
            ..SynthConfig::default()
        };
        let g = graph(&cfg);
        let p = overall_profiles(&g);
        let rho = degree_beauty_correlation(&g.final_snapshot(), &p, Direction::In).unwrap();
        assert!((rho - cfg.degree_beauty_rho).abs() <= 0.05, "seed {seed}: ρ = {rho}");
        let beauty: Vec<f64> = p.profiled().map(|(_, b)| b).collect();
        let m = mean(&beauty).unwrap();
        assert!((m - cfg.beauty_mean).abs() <= 0.02, "seed {seed}: mean {m}");
    }
}

/// Twelve-week inactivity ratio pooled over a fixed seed set.
fn pooled_ratio(strength: f64) -> f64 {
    let (mut kt, mut nt, mut kc, mut nc) = (0.0, 0.0, 0.0, 0.0);
    for seed in 0..3 {
        let g = graph(&SynthConfig {
            n_users: 20_000,
            min_out_degree: 10,
            base_churn: 0.02,
            degree_beauty_rho: 0.0,
            assortativity: 1.0,
            taste_sd: 0.3,
            churn_imbalance_strength: strength,
            seed,
            ..SynthConfig::default()
        });
        let mut spec = ExperimentSpec::new(ExperimentKind::Q5 {
            control_max: 0.1,
            treated_min: 0.3,
        });
        spec.seed = seed;
        spec.horizons = vec![12];
        let r = run_experiment(&g, &spec).unwrap();
        assert!(r.failure.is_none(), "{:?}", r.failure);
        let h = &r.inactivity[0];
        kt += h.p_treated.unwrap() * h.n_treated as f64;
        nt += h.n_treated as f64;
        kc += h.p_control.unwrap() * h.n_control as f64;
        nc += h.n_control as f64;
    }
    (kt / nt) / (kc / nc)
}

#[test]
fn inactivity_ratio_increases_with_churn_strength() {
    let ratios: Vec<f64> = [0.0, 0.5, 1.0].into_iter().map(pooled_ratio).collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
}
