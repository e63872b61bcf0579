//! End-to-end runs of the experiment pipelines at smoke-test scale.

use noisefree_bo::bo_loops::Algorithm;
use noisefree_bo::experiments::{
    bench, filldist, infer, ExperimentConfig, ExperimentKind, Overrides, RawConfig,
};

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::resolve(RawConfig::from_json(json).unwrap(), &Overrides::default()).unwrap()
}

#[test]
fn rossler_smoke_pipeline() {
    let cfg = config(r#"{"experiment":"infer-rossler","eval_budget":6,"grid_size":101,"replications":1,"rejection_samples":200}"#);
    let report = infer::run_infer(&cfg).unwrap();
    let p = &report.problem;
    let w = p.comparison_weights.as_ref().unwrap();
    let mass: f64 = p.true_density.iter().zip(w).map(|(d, w)| d * w).sum();
    assert!((mass - 1.0).abs() < 1e-3);
    assert_eq!(report.results.len(), 4);
    for r in &report.results {
        assert_eq!(r.evaluations_used, 6);
        let mass: f64 = r.density.iter().zip(w).map(|(d, w)| d * w).sum();
        assert!((0.999..=1.001).contains(&mass), "{}: mass {mass}", r.algorithm);
        assert_eq!(r.samples.len(), 200);
        assert!(r.hellinger.unwrap() <= 1.0 && r.l2 >= 0.0);
    }
    let out = report.outputs(&cfg);
    assert!(out.csv.iter().any(|c| c.name == "infer_rossler_true_density.csv" && c.rows.len() == 101));
    assert!(out.json.iter().any(|j| j.name == "infer_rossler_metrics.json"));
}

#[test]
fn lorenz_smoke_pipeline() {
    let cfg = config(
        r#"{"experiment":"infer-lorenz","eval_budget":24,"initial_design":20,"replications":1,
            "comparison_nodes":50,"normalizer_grid":8,"mcmc_iterations":400,"mcmc_burn_in":100,
            "algorithms":["exploit+","uniform"]}"#,
    );
    let report = infer::run_infer(&cfg).unwrap();
    assert_eq!(report.results.len(), 2);
    for r in &report.results {
        assert_eq!(r.evaluations_used, 24);
        assert_eq!(r.samples.len(), 300);
        assert!(r.hellinger.is_none());
        assert!(r.samples.iter().all(|s| report.problem.domain().contains(s)));
    }
}

#[test]
fn bench_and_filldist_are_reproducible() {
    let cfg = config(
        r#"{"experiment":"bench","eval_budget":6,"replications":2,"dimension":2,"algorithms":["gp-ucb+","exploit","ei"]}"#,
    );
    let a = bench::run_bench(&cfg).unwrap();
    let b = bench::run_bench(&cfg).unwrap();
    let bodies = |r: &bench::BenchReport| r.outputs(&cfg).csv.iter().map(|c| c.render(&cfg)).collect::<Vec<_>>();
    assert_eq!(bodies(&a), bodies(&b));
    for c in &a.curves {
        assert_eq!(c.evaluations_used, cfg.initial_design + 6);
        assert_eq!(*c.observations.last().unwrap(), 6);
    }
    assert_eq!(a.summary.len(), 9);
    assert!(a.summary.iter().any(|s| s.normalized_mean == 1.0));

    let cfg = config(r#"{"experiment":"filldist","eval_budget":8,"replications":2,"dimension":3,"reference_points":20}"#);
    let a = filldist::run_filldist(&cfg).unwrap();
    let b = filldist::run_filldist(&cfg).unwrap();
    assert_eq!(a.finals(Algorithm::Uniform), b.finals(Algorithm::Uniform));
    assert!(a.curves.iter().all(|c| c.fill.len() == 8 && c.fill.windows(2).all(|w| w[1] <= w[0])));
}

#[test]
fn config_errors_name_the_line() {
    let err = RawConfig::from_json("{\n  \"experiment\": \"bench\",\n  \"replications\": \"ten\"\n}").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = RawConfig::from_json("{\n\"experimnt\": 1}").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    let bad = ExperimentConfig::resolve(
        RawConfig::from_json(r#"{"experiment":"infer-rossler","algorithms":["ei"]}"#).unwrap(),
        &Overrides::default(),
    );
    assert!(bad.is_err());
    let ov = Overrides {
        experiment: Some(ExperimentKind::Bench),
        replications: Some(0),
        ..Overrides::default()
    };
    assert!(ExperimentConfig::resolve(RawConfig::default(), &ov).is_err());
}
