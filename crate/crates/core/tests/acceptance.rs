//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance -- 3 8` runs a subset. The
//! process exits 0 after reporting unless `NOISEFREE_BO_ACCEPTANCE_STRICT`
//! is set, in which case any FAIL gives exit code 1.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use noisefree_bo::acquisition::BetaSchedule;
use noisefree_bo::bo_loops::{run, streams, Algorithm, BoConfig};
use noisefree_bo::design::{latin_hypercube, mix_seed, stream};
use noisefree_bo::dynamics::dopri::solve;
use noisefree_bo::dynamics::{
    averaging_operator, forward_map, ForwardMapSpec, IntegratorConfig, OdeSystem, Trajectory,
};
use noisefree_bo::experiments::infer::InferenceProblem;
use noisefree_bo::experiments::{bench, filldist, infer, median, ExperimentConfig, Overrides, RawConfig};
use noisefree_bo::gp::{GpModel, TrainingSet};
use noisefree_bo::inference::{hellinger, rejection_sample, rwmh_sample, FnLogDensity, QuadratureGrid, QuadratureRule};
use noisefree_bo::kernels::KernelSpec;
use noisefree_bo::metrics::{fit_rate, simple_regret};
use noisefree_bo::objectives::{FnOracle, ObjectiveId, SearchDomain};
use noisefree_bo::Result;
use rand::Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Result<Verdict>,
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::resolve(RawConfig::from_json(json).expect("valid config"), &Overrides::default())
        .expect("valid config")
}

fn fit(kernel: KernelSpec, pts: &[Vec<f64>], f: &[f64], lambda: f64) -> Result<GpModel> {
    GpModel::fit(kernel, TrainingSet::from_points(pts, f, 1e-12)?, lambda)
}

fn gaussian_noise(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

// 1

fn gp_suite() -> Result<Verdict> {
    let dom = SearchDomain::cube(0.0, 1.0, 3)?;
    let kernels = [
        KernelSpec::matern(0.5, 0.5)?,
        KernelSpec::matern(1.5, 0.4)?,
        KernelSpec::matern(2.5, 0.3)?,
        KernelSpec::matern(1.2, 0.4)?,
        KernelSpec::squared_exponential(0.3)?,
    ];
    let mut problems = Vec::new();

    // Interpolation at the data and agreement with a dense solve.
    let (mut worst_interp, mut worst_sd, mut worst_dense) = (0.0f64, 0.0f64, 0.0f64);
    for (seed, kernel) in kernels.iter().enumerate() {
        for n in [5usize, 15, 30] {
            let pts = latin_hypercube(&dom, n, &mut stream(seed as u64, n as u64));
            let f: Vec<f64> = pts.iter().map(|x| 4.0 * (5.0 * x[0]).sin() + x[1] * x[2] - 2.0).collect();
            let scale = 1.0 + f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let model = fit(*kernel, &pts, &f, 0.0)?;
            for (x, y) in pts.iter().zip(&f) {
                let (m, v) = model.predict(x)?;
                worst_interp = worst_interp.max((m - y).abs() / scale);
                worst_sd = worst_sd.max(v.sqrt());
            }
            let k = DMatrix::from_fn(n, n, |i, j| {
                kernel.eval(&pts[i], &pts[j]).unwrap() + if i == j { model.jitter_used() } else { 0.0 }
            });
            let chol = k.cholesky().expect("positive definite");
            let alpha = chol.solve(&DVector::from_column_slice(&f));
            for q in latin_hypercube(&dom, 40, &mut stream(seed as u64, 100 + n as u64)) {
                let kx = DVector::from_iterator(n, pts.iter().map(|p| kernel.eval(p, &q).unwrap()));
                let (m, v) = model.predict(&q)?;
                let var = (1.0 - kx.dot(&chol.solve(&kx))).max(0.0);
                worst_dense = worst_dense.max((m - kx.dot(&alpha)).abs()).max((v - var).abs());
            }
        }
    }
    if worst_interp > 1e-6 || worst_sd > 1e-4 {
        problems.push("interpolation");
    }
    if worst_dense > 1e-8 {
        problems.push("dense oracle");
    }

    // More data never raises the variance; regularization never lowers it.
    let probes = latin_hypercube(&dom, 200, &mut stream(99, 0));
    let kernel = KernelSpec::matern(2.5, 0.3)?;
    let pts = latin_hypercube(&dom, 21, &mut stream(98, 0));
    let f: Vec<f64> = pts.iter().map(|x| x[0] - x[1] * x[1]).collect();
    let mut monotone = true;
    let mut model = fit(kernel, &pts[..1], &f[..1], 0.0)?;
    for i in 1..pts.len() {
        let next = model.update(&pts[i], f[i])?;
        for q in &probes {
            monotone &= next.posterior_var(q)? <= model.posterior_var(q)? + 1e-12;
        }
        model = next;
    }
    if !monotone {
        problems.push("variance monotonicity");
    }
    let mut ordered = true;
    for lambda in [1e-3, 1e-2, 0.1, 1.0] {
        let reg = fit(kernel, &pts, &f, lambda)?;
        for q in &probes {
            ordered &= model.posterior_sd(q)? <= reg.posterior_sd(q)? + 1e-12;
        }
    }
    if !ordered {
        problems.push("sigma_0 <= sigma_lambda");
    }

    // |f - mu| <= ||f||_H sigma for functions in the RKHS.
    let dom2 = SearchDomain::cube(0.0, 1.0, 2)?;
    let kernel = KernelSpec::matern(2.5, 0.3)?;
    let sites = latin_hypercube(&dom2, 200, &mut stream(7, 0));
    let mut worst_slack = f64::INFINITY;
    for j in 0..20u64 {
        let mut rng = stream(1000 + j, 0);
        let centers = latin_hypercube(&dom2, 10, &mut rng);
        let a: Vec<f64> = (0..centers.len()).map(|_| gaussian_noise(&mut rng)).collect();
        let f = |x: &[f64]| -> f64 { centers.iter().zip(&a).map(|(c, w)| w * kernel.eval(c, x).unwrap()).sum() };
        let mut norm2 = 0.0;
        for (ci, ai) in centers.iter().zip(&a) {
            for (cj, aj) in centers.iter().zip(&a) {
                norm2 += ai * aj * kernel.eval(ci, cj)?;
            }
        }
        let pts = latin_hypercube(&dom2, 15, &mut rng);
        let vals: Vec<f64> = pts.iter().map(|x| f(x)).collect();
        let model = fit(kernel, &pts, &vals, 0.0)?;
        for x in &sites {
            let (m, v) = model.predict(x)?;
            worst_slack = worst_slack.min(norm2.sqrt() * v.sqrt() + 1e-8 - (f(x) - m).abs());
        }
    }
    if worst_slack < 0.0 {
        problems.push("RKHS bound");
    }
    verdict(
        problems.is_empty(),
        format!(
            "interp {worst_interp:.1e}, sd at data {worst_sd:.1e}, dense {worst_dense:.1e}, \
             monotone {monotone}, regularized {ordered}, RKHS slack {worst_slack:.1e}{}",
            if problems.is_empty() { String::new() } else { format!("; failed: {}", problems.join(", ")) }
        ),
    )
}

// 2

fn ucb_zero_beta_is_exploit() -> Result<Verdict> {
    let dom = SearchDomain::new(vec![-5.0, 0.0], vec![10.0, 15.0])?;
    let branin = |x: &[f64]| {
        let (a, b, c) = (1.0, 5.1 / (4.0 * std::f64::consts::PI.powi(2)), 5.0 / std::f64::consts::PI);
        let t = 1.0 / (8.0 * std::f64::consts::PI);
        -(a * (x[1] - b * x[0] * x[0] + c * x[0] - 6.0).powi(2) + 10.0 * (1.0 - t) * x[0].cos() + 10.0)
    };
    let mut same = 0;
    for seed in 0..10u64 {
        let init = latin_hypercube(&dom, 4, &mut stream(seed, streams::INITIAL_DESIGN));
        let mut runs = Vec::new();
        for alg in [Algorithm::GpUcb, Algorithm::Exploit] {
            let mut cfg = BoConfig::new(alg, dom.clone(), init.clone()).with_evaluations(16);
            cfg.beta = BetaSchedule::Constant(0.0);
            cfg.seed = seed;
            runs.push(run(&cfg, FnOracle(branin))?);
        }
        if runs[0].iterates == runs[1].iterates && runs[0].iterates.len() == 16 {
            same += 1;
        }
    }
    verdict(same == 10, format!("{same}/10 seeds give identical iterates"))
}

// 3

fn fill_distance_study() -> Result<Verdict> {
    let cfg = config(r#"{"experiment":"filldist","eval_budget":100,"replications":20,"dimension":10}"#);
    let report = filldist::run_filldist(&cfg)?;
    let mean = |a: Algorithm| report.summary.iter().find(|s| s.algorithm == a).unwrap().mean_final_fill_distance;
    let gp = mean(Algorithm::GpUcb);
    let reference = report.finals(Algorithm::GpUcb);
    let mut pass = true;
    let mut parts = vec![format!("GP-UCB {gp:.3}")];
    for a in [Algorithm::Uniform, Algorithm::GpUcbPlus, Algorithm::ExploitPlus] {
        let below = report
            .finals(a)
            .iter()
            .zip(&reference)
            .filter(|(x, r)| x < r)
            .count() as f64
            / reference.len() as f64;
        pass &= mean(a) < gp && below >= 0.8;
        parts.push(format!("{} {:.3} ({:.0}% below)", a.name(), mean(a), 100.0 * below));
    }
    verdict(pass, format!("mean h: {}", parts.join(", ")))
}

// 4

fn benchmark_ordering() -> Result<Verdict> {
    let cfg = config(
        r#"{"experiment":"bench","eval_budget":200,"replications":10,"dimension":10,
            "algorithms":["gp-ucb+","exploit+","exploit","gp-ucb"],"beta":{"sqrt":2.0}}"#,
    );
    let report = bench::run_bench(&cfg)?;
    let mut pass = true;
    let mut below_ucb = [0usize; 2];
    let mut parts = Vec::new();
    for id in [ObjectiveId::Ackley, ObjectiveId::Rastrigin, ObjectiveId::Levy] {
        let m = |a| report.summary_for(id, a).unwrap().mean_final_simple_regret;
        let (plus, xplus, exploit, ucb) = (
            m(Algorithm::GpUcbPlus),
            m(Algorithm::ExploitPlus),
            m(Algorithm::Exploit),
            m(Algorithm::GpUcb),
        );
        pass &= plus < exploit && xplus < exploit;
        below_ucb[0] += usize::from(plus < ucb);
        below_ucb[1] += usize::from(xplus < ucb);
        parts.push(format!(
            "{}: GP-UCB+ {plus:.3}, EXPLOIT+ {xplus:.3}, EXPLOIT {exploit:.3}, GP-UCB {ucb:.3}",
            id.name()
        ));
    }
    pass &= below_ucb.iter().all(|&n| n >= 2);
    verdict(pass, parts.join("; "))
}

// 5

fn rate_sanity() -> Result<Verdict> {
    let dom = SearchDomain::cube(0.0, 1.0, 1)?;
    let kernel = KernelSpec::matern(2.5, 0.15)?;
    let mut rng = stream(4242, 0);
    let centers: Vec<f64> = (0..8).map(|i| (i as f64 + rng.random::<f64>()) / 8.0).collect();
    let weights: Vec<f64> = centers.iter().map(|_| gaussian_noise(&mut rng)).collect();
    let f = |x: &[f64]| -> f64 {
        centers
            .iter()
            .zip(&weights)
            .map(|(c, w)| w * kernel.correlation((x[0] - c).abs()))
            .sum()
    };
    // Dense grid, then golden-section refinement around the best node.
    let n = 100_000;
    let best = (0..=n).map(|i| i as f64 / n as f64).fold(0.0, |b, x| if f(&[x]) > f(&[b]) { x } else { b });
    let (mut a, mut b) = ((best - 1.0 / n as f64).max(0.0), (best + 1.0 / n as f64).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(&[c]) > f(&[d]) {
            b = d;
        } else {
            a = c;
        }
    }
    let f_star = f(&[0.5 * (a + b)]).max(f(&[0.0])).max(f(&[1.0]));

    let budgets = [25usize, 50, 100, 200];
    let mut medians = Vec::new();
    for &budget in &budgets {
        let regrets: Vec<f64> = (0..20u64)
            .map(|seed| {
                let init = latin_hypercube(&dom, 2, &mut stream(seed, streams::INITIAL_DESIGN));
                let mut cfg = BoConfig::new(Algorithm::ExploitPlus, dom.clone(), init).with_evaluations(budget);
                cfg.kernel = kernel;
                cfg.refit_every = 0;
                cfg.seed = seed;
                let r = run(&cfg, FnOracle(f))?;
                Ok(simple_regret(f_star, &r.iterate_values).last().copied().unwrap_or(f64::NAN).max(1e-16))
            })
            .collect::<Result<_>>()?;
        medians.push(median(&regrets));
    }
    let slope = fit_rate(&budgets, &medians)?;
    verdict(
        slope <= -1.0,
        format!(
            "slope {slope:.2}; median regret {}",
            medians.iter().map(|m| format!("{m:.1e}")).collect::<Vec<_>>().join(" / ")
        ),
    )
}

// 6

fn ode_suite() -> Result<Verdict> {
    let mut problems = Vec::new();
    let mut end = f64::NAN;
    let tol = IntegratorConfig::default().tolerances();
    solve(|z, dz| dz[0] = -z[0], &[1.0], 0.0, 1.0, &[1.0], &tol, |_, z| end = z[0])?;
    let decay = (end - (-1.0f64).exp()).abs();
    if decay > 1e-6 {
        problems.push("decay".to_string());
    }

    let z = [1.0, 0.0, 1.0];
    let r = OdeSystem::Rossler { x: 5.7 }.rhs(&z)?;
    let l = OdeSystem::Lorenz63 { x: [10.0, 28.0, 8.0 / 3.0] }.rhs(&z)?;
    if r != [-1.0, 1.0, -4.5] || l != [-10.0, 27.0, -8.0 / 3.0] {
        problems.push(format!("rhs {r:?} {l:?}"));
    }

    // z = (sin t, cos t, e^-t): every integrand has |f''| <= 4, so the
    // trapezoid average is off by at most 4 h^2 / 12.
    let h = 0.01;
    let times: Vec<f64> = (0..=1000).map(|k| 2.0 + k as f64 * h).collect();
    let states: Vec<[f64; 3]> = times.iter().map(|t| [t.sin(), t.cos(), (-t).exp()]).collect();
    let avg = averaging_operator(&Trajectory::new(times, states)?, (2.0, 12.0))?;
    let prim: [fn(f64) -> f64; 9] = [
        |t| -t.cos(),
        |t| t.sin(),
        |t| -(-t).exp(),
        |t| t / 2.0 - (2.0 * t).sin() / 4.0,
        |t| t / 2.0 + (2.0 * t).sin() / 4.0,
        |t| -(-2.0 * t).exp() / 2.0,
        |t| t.sin().powi(2) / 2.0,
        |t| -(-t).exp() * (t.sin() + t.cos()) / 2.0,
        |t| (-t).exp() * (t.sin() - t.cos()) / 2.0,
    ];
    let avg_err = prim
        .iter()
        .zip(avg.0)
        .map(|(p, a)| ((p(12.0) - p(2.0)) / 10.0 - a).abs())
        .fold(0.0, f64::max);
    if avg_err > 4.0 * h * h / 12.0 {
        problems.push("averaging".to_string());
    }

    let mut drift = Vec::new();
    for (name, spec, x) in [
        ("Rossler", ForwardMapSpec::rossler(), vec![5.7]),
        ("Lorenz", ForwardMapSpec::lorenz(), vec![10.0, 28.0, 8.0 / 3.0]),
    ] {
        let base = forward_map(&x, &spec)?;
        let tight = forward_map(&x, &ForwardMapSpec { integrator: spec.integrator.tightened(10.0), ..spec })?;
        let rel = base.0.iter().zip(tight.0).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
        if rel > 1e-4 {
            problems.push(format!("{name} forward map"));
        }
        drift.push(format!("{name} {rel:.1e}"));
    }
    verdict(
        problems.is_empty(),
        format!(
            "decay error {decay:.1e}, averaging error {avg_err:.1e}, forward-map drift under 10x tolerance: {}{}",
            drift.join(", "),
            if problems.is_empty() { String::new() } else { format!("; failed: {}", problems.join(", ")) }
        ),
    )
}

// 7

/// Effective sample size by Geyer's initial positive sequence.
fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let rho = |k: usize| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * var);
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = rho(k) + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    n as f64 / tau.max(1.0)
}

fn sampler_suite() -> Result<Verdict> {
    let dom = SearchDomain::cube(-1.0, 1.0, 1)?;
    let (mu, s) = (0.2, 0.2);
    let target = FnLogDensity {
        dim: 1,
        f: move |x: &[f64]| -(x[0] - mu).powi(2) / (2.0 * s * s),
    };
    // Moments of the target truncated to the domain, by quadrature.
    let grid = QuadratureGrid::new(&dom, QuadratureRule::Trapezoid { n: 200_001 })?;
    let dens: Vec<f64> = grid.nodes.iter().map(|x| (-(x[0] - mu).powi(2) / (2.0 * s * s)).exp()).collect();
    let z: f64 = dens.iter().zip(&grid.weights).map(|(d, w)| d * w).sum();
    let mean = grid.nodes.iter().zip(&dens).zip(&grid.weights).map(|((x, d), w)| x[0] * d * w).sum::<f64>() / z;
    let var = grid
        .nodes
        .iter()
        .zip(&dens)
        .zip(&grid.weights)
        .map(|((x, d), w)| (x[0] - mean).powi(2) * d * w)
        .sum::<f64>()
        / z;

    let check = |xs: &[f64], ess: f64| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let ok = (m - mean).abs() <= 3.0 * (var / ess).sqrt() && (v / var - 1.0).abs() <= 0.05 && ess >= 1e4;
        (ok, format!("mean {m:.4}, var ratio {:.3}, ESS {ess:.0}", v / var))
    };
    let rej = rejection_sample(&target, &dom, 1.05f64.ln(), 10_000, &mut stream(71, 0))?;
    let xs: Vec<f64> = rej.samples.iter().map(|x| x[0]).collect();
    let (rej_ok, rej_msg) = check(&xs, xs.len() as f64);
    let chain = rwmh_sample(&target, &dom, 210_000, 10_000, &[(2.4 * s).powi(2)], &[0.0], &mut stream(72, 0))?;
    let xs: Vec<f64> = chain.samples.iter().map(|x| x[0]).collect();
    let (mh_ok, mh_msg) = check(&xs, effective_sample_size(&xs));

    // Flat targets: rejection accepts at 1/1.05 and is uniform; tiny MH
    // steps are almost always accepted.
    let flat = FnLogDensity { dim: 2, f: |_: &[f64]| -0.7 };
    let box2 = SearchDomain::cube(0.0, 1.0, 2)?;
    let r = rejection_sample(&flat, &box2, -0.7 + 1.05f64.ln(), 20_000, &mut stream(73, 0))?;
    let mut counts = [0usize; 10];
    for x in &r.samples {
        counts[((x[0] * 10.0) as usize).min(9)] += 1;
    }
    let expected = r.samples.len() as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 9 degrees of freedom.
    let flat_rej_ok = (r.acceptance_rate - 1.0 / 1.05).abs() < 0.01 && chi2 < 21.666;
    let c = rwmh_sample(&flat, &box2, 20_000, 0, &[1e-6, 1e-6], &[0.5, 0.5], &mut stream(74, 0))?;
    let flat_mh_ok = c.acceptance_rate >= 0.95;

    let hgrid = QuadratureGrid::new(&SearchDomain::cube(-15.0, 15.0, 1)?, QuadratureRule::Trapezoid { n: 30001 })?;
    let pdf = |x: f64, m: f64, s: f64| (-(x - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let mut h_err = 0.0f64;
    for (m1, s1, m2, s2) in [(0.0, 1.0, 0.5, 1.0), (0.0, 1.0, 0.0, 2.0), (-1.0, 0.7, 2.0, 1.3)] {
        let p: Vec<f64> = hgrid.nodes.iter().map(|x| pdf(x[0], m1, s1)).collect();
        let q: Vec<f64> = hgrid.nodes.iter().map(|x| pdf(x[0], m2, s2)).collect();
        let bc = (2.0 * s1 * s2 / (s1 * s1 + s2 * s2)).sqrt() * (-(m1 - m2).powi(2) / (4.0 * (s1 * s1 + s2 * s2))).exp();
        h_err = h_err.max((hellinger(&p, &q, &hgrid.weights)? - (1.0 - bc).sqrt()).abs());
    }
    verdict(
        rej_ok && mh_ok && flat_rej_ok && flat_mh_ok && h_err < 1e-4,
        format!(
            "rejection: {rej_msg}; MH: {mh_msg}; flat acceptance {:.4} (chi2 {chi2:.1}) and {:.3}; Hellinger error {h_err:.1e}",
            r.acceptance_rate, c.acceptance_rate
        ),
    )
}

// 8, 9

fn pipeline_ordering(json: &str) -> Result<Verdict> {
    let cfg = config(json);
    let report = infer::run_infer(&cfg)?;
    let m = |a| report.summary_for(a).unwrap().l2_mean;
    let (ucb, uni, plus, xplus) = (
        m(Algorithm::GpUcb),
        m(Algorithm::Uniform),
        m(Algorithm::GpUcbPlus),
        m(Algorithm::ExploitPlus),
    );
    let worst_baseline = ucb.min(uni);
    verdict(
        plus < worst_baseline && xplus < worst_baseline,
        format!("mean l2: GP-UCB+ {plus:.4}, EXPLOIT+ {xplus:.4}, GP-UCB {ucb:.4}, Uniform {uni:.4}"),
    )
}

fn rossler_ordering() -> Result<Verdict> {
    pipeline_ordering(r#"{"experiment":"infer-rossler","eval_budget":20,"replications":20}"#)
}

fn lorenz_ordering() -> Result<Verdict> {
    pipeline_ordering(r#"{"experiment":"infer-lorenz","eval_budget":200,"comparison_nodes":5000,"replications":5}"#)
}

// 10

fn hellinger_trend() -> Result<Verdict> {
    let cfg = config(r#"{"experiment":"infer-rossler","algorithms":["uniform"],"replications":10}"#);
    let problem = InferenceProblem::from_config(&cfg)?;
    let weights = problem.comparison_weights.as_ref().expect("Rossler uses quadrature weights");
    let mut medians = Vec::new();
    for budget in [20, 80, 320] {
        let d: Vec<f64> = (0..cfg.replications as u64)
            .map(|rep| {
                let (post, _) = problem.surrogate(&cfg, Algorithm::Uniform, budget, mix_seed(cfg.seed, rep))?;
                hellinger(&problem.true_density, &problem.surrogate_density(&post), weights)
            })
            .collect::<Result<_>>()?;
        medians.push(median(&d));
    }
    verdict(
        medians.windows(2).all(|w| w[1] <= w[0]),
        format!("median Hellinger at 20/80/320: {:.4} / {:.4} / {:.4}", medians[0], medians[1], medians[2]),
    )
}

// 11

fn determinism() -> Result<Verdict> {
    let mut differing = Vec::new();
    let bench_cfg = config(r#"{"experiment":"bench","eval_budget":8,"replications":2,"dimension":3}"#);
    let fill_cfg = config(r#"{"experiment":"filldist","eval_budget":10,"replications":2,"dimension":3,"reference_points":30}"#);
    let infer_cfg = config(r#"{"experiment":"infer-rossler","eval_budget":8,"replications":2,"grid_size":201,"rejection_samples":300}"#);
    let render = |cfg: &ExperimentConfig| -> Result<Vec<String>> {
        let out = match cfg.experiment.name() {
            "bench" => bench::run_bench(cfg)?.outputs(cfg),
            "filldist" => filldist::run_filldist(cfg)?.outputs(cfg),
            _ => infer::run_infer(cfg)?.outputs(cfg),
        };
        Ok(out
            .csv
            .iter()
            .map(|c| c.render(cfg))
            .chain(out.json.iter().map(|j| j.render(cfg)))
            .collect())
    };
    let mut files = 0;
    for cfg in [&bench_cfg, &fill_cfg, &infer_cfg] {
        let (a, b) = (render(cfg)?, render(cfg)?);
        files += a.len();
        if a != b {
            differing.push(cfg.experiment.name());
        }
    }
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{files} rendered outputs identical across reruns")
        } else {
            format!("outputs differ for {}", differing.join(", "))
        },
    )
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "GP correctness", limit: secs(30), check: gp_suite },
        Criterion { id: 2, name: "GP-UCB with zero beta equals EXPLOIT", limit: secs(60), check: ucb_zero_beta_is_exploit },
        Criterion { id: 3, name: "fill distance ordering", limit: secs(600), check: fill_distance_study },
        Criterion { id: 4, name: "benchmark ordering", limit: secs(1800), check: benchmark_ordering },
        Criterion { id: 5, name: "EXPLOIT+ regret rate", limit: secs(600), check: rate_sanity },
        Criterion { id: 6, name: "ODE suite", limit: secs(120), check: ode_suite },
        Criterion { id: 7, name: "sampler suite", limit: secs(120), check: sampler_suite },
        Criterion { id: 8, name: "Rossler pipeline ordering", limit: secs(900), check: rossler_ordering },
        Criterion { id: 9, name: "Lorenz pipeline ordering", limit: secs(3600), check: lorenz_ordering },
        Criterion { id: 10, name: "Hellinger trend with budget", limit: secs(1200), check: hellinger_trend },
        Criterion { id: 11, name: "determinism", limit: None, check: determinism },
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(limit) = c.limit.filter(|l| elapsed > *l) {
            pass = false;
            detail.push_str(&format!("; over the {} s limit", limit.as_secs()));
        }
        ran += 1;
        failed += usize::from(!pass);
        println!(
            "[{}] {} {}: {} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var_os("NOISEFREE_BO_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
