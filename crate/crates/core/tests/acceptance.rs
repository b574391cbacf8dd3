//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{binomial_slack, random_adaptive_spec};
use ensemble_lab::brownian::{
    bm_sup_tail_bound, brownian_on_grid, corollary1_m, embed_transform, ensemble_transform, exceedance_constants, ou_transform,
    solve_log_ineq, step_constraint_slack, uniform_grid, STANDARD_STEP,
};
use ensemble_lab::diagnostics::exceedance;
use ensemble_lab::ensemble::{
    beta_formula, beta_upper, exceedance_regret_bound, EnsembleConfig, EnsembleState,
};
use ensemble_lab::environment::{run_episode, sample_sphere, ActionSet, BanditInstance, NoiseSpec, TraceMeta};
use ensemble_lab::harness::{execute, ExperimentConfig, RunReport};
use ensemble_lab::linalg::{normalization_gap, DesignState};
use ensemble_lab::rng::{stream, StreamTag};
use nalgebra::DVector;
use rand::Rng as _;

/// `Φ(x)` from its Taylor series; independent of the crate's erfc path.
fn phi_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term.abs() > 1e-18 {
        k += 1.0;
        term *= -x * x / (2.0 * k);
        sum += term / (2.0 * k + 1.0);
    }
    0.5 + sum / (2.0 * std::f64::consts::PI).sqrt()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run_config(text: &str) -> RunReport {
    let cfg = ExperimentConfig::parse(text).expect("acceptance config parses");
    execute(&cfg).expect("acceptance run succeeds")
}

fn stat(report: &RunReport, name: &str) -> Vec<f64> {
    report
        .outcomes
        .iter()
        .map(|o| o.stats.iter().find(|(k, _)| k == name).expect("statistic present").1)
        .collect()
}

fn embedding_exactness() -> Outcome {
    let mut r = stream(101, 0, StreamTag::MonteCarlo);
    let mut worst = 0.0f64;
    let mut check = |spec: &ensemble_lab::brownian::TransformSpec, xi: &nalgebra::DMatrix<f64>, r: &mut _| {
        let emb = embed_transform(spec, xi, 4, r).expect("embedding");
        let direct = spec.martingale(xi).expect("martingale");
        for (j, path) in emb.paths.iter().enumerate() {
            for mark in &path.clock_marks {
                let want = direct[(mark.t, j)];
                worst = worst.max((path.readout(mark) - want).abs() / (1.0 + want.abs()));
            }
        }
    };
    for _ in 0..50 {
        let n = r.random_range(1..=200);
        let m = r.random_range(1..=16);
        let (spec, xi) = random_adaptive_spec(n, m, &mut r);
        check(&spec, &xi, &mut r);
    }
    for seed in 0..50u64 {
        let d = r.random_range(1..=5);
        let m = r.random_range(1..=16);
        let n = r.random_range(1..=199);
        let lambda = 10f64.powf(r.random_range(-1.0..2.0));
        let cfg = EnsembleConfig { m, lambda, log_draws: true, ..Default::default() };
        let mut lr = stream(seed, 0, StreamTag::Learner);
        let mut er = stream(seed, 0, StreamTag::Environment);
        let theta = sample_sphere(d, &mut stream(seed, 0, StreamTag::Instance));
        let inst = BanditInstance::new(ActionSet::unit_ball(d).unwrap(), theta, NoiseSpec::default()).unwrap();
        let mut es = EnsembleState::new(cfg, d, &mut lr).unwrap();
        let tr = run_episode(&inst, &mut es, n, &mut lr, &mut er, TraceMeta::default(), |_, _, _| {}).unwrap();
        let actions: Vec<DVector<f64>> = tr.rows.iter().map(|row| row.action.clone()).collect();
        let u = sample_sphere(d, &mut r);
        let (spec, xi) = ensemble_transform(es.draw_log().unwrap(), &actions, &u, lambda).unwrap();
        check(&spec, &xi, &mut r);
    }
    outcome(worst <= 1e-9, format!("100 transforms, worst relative readout error {worst:.3e} (tol 1e-9)"))
}

fn brownian_exceedance() -> Outcome {
    let k = exceedance_constants(0.05, 0.1, 1.0, 100.0, 0.1, Some(STANDARD_STEP)).unwrap();
    let report = run_config(
        "experiment = exceedance_bm\nrun.reps = 200\nrun.master_seed = 2\n\
         brownian.c = 0.05\nbrownian.p = 0.1\nbrownian.tau = 1\nbrownian.tau_prime = 100\n\
         brownian.delta = 0.1\nbrownian.h = 0.004\nbrownian.m = auto\n",
    );
    let m = stat(&report, "m")[0];
    let frac = report.pooled("mean_below_p").unwrap();
    let limit = 0.1 + binomial_slack(0.1, 200);
    outcome(
        k.m_min == 375 && m == 375.0 && frac <= limit,
        format!("m = {m}, fraction with inf-fraction < p = {frac:.4} (limit {limit:.4})"),
    )
}

fn constants() -> Outcome {
    let k = exceedance_constants(0.05, 0.1, 1.0, 100.0, 0.1, None).unwrap();
    let (drift, fluct) = step_constraint_slack(k.c, k.eps, 1.0 / 250.0);
    let oracle = 0.25 * (1.0 - phi_series(0.05));
    let p0_err = (k.p0 - oracle).abs();
    outcome(
        k.h_star >= 1.0 / 250.0 && drift >= 0.0 && fluct >= 0.0 && p0_err <= 1e-9,
        format!(
            "h* = {:.6} (>= 0.004), slacks at 1/250 = ({drift:.3e}, {fluct:.3e}), |p0 - oracle| = {p0_err:.1e}",
            k.h_star
        ),
    )
}

fn coverage() -> Outcome {
    let report = run_config(
        "experiment = coverage\nenv.d = 2\nenv.noise = gaussian\nalgorithm.m = 32\nalgorithm.delta = 0.1\n\
         run.n = 2000\nrun.reps = 500\nrun.master_seed = 4\nrun.write_traces = false\ndiag.every = 0\n",
    );
    let frac = report.pooled("mean_violated").unwrap();
    let limit = 0.1 + binomial_slack(0.1, 500);
    outcome(frac <= limit, format!("violation fraction {frac:.4} (limit {limit:.4})"))
}

fn lower_bound() -> Outcome {
    let base = "experiment = lowerbound\nenv.d = 10\nalgorithm.m = 5\nrun.n = 2000\nrun.reps = 200\n\
                run.master_seed = 5\nrun.write_traces = false\n";
    let report = run_config(&format!("{base}algorithm.precision = extended\n"));
    let resid = stat(&report, "span_residual").into_iter().fold(0.0, f64::max);
    let slack = stat(&report, "bound_slack").into_iter().fold(f64::INFINITY, f64::min);
    let half = report.pooled("mean_proj_sq_le_half").unwrap();
    let quarter = report.pooled("mean_regret_ge_quarter").unwrap();
    let floor = 0.5 - binomial_slack(0.5, 200);

    let double = run_config(base);
    let leaks = stat(&double, "span_residual").into_iter().filter(|r| *r > 1e-8).count();
    println!("  [INFO] same runs in plain double precision: {leaks}/200 reps leak past 1e-8");

    outcome(
        resid <= 1e-8 && slack >= -1e-6 && half >= floor && quarter >= floor,
        format!(
            "(a) max residual {resid:.2e}; (b) min slack {slack:.3}; (c) {half:.3}; (d) {quarter:.3} (floor {floor:.4})"
        ),
    )
}

fn desk_scale_regime() -> Outcome {
    let (d, n, lambda, delta, gamma_bar) = (2, 500, 80.0, 0.1, 40.0);
    let m = corollary1_m(d, n, delta) as usize;
    let report = run_config(&format!(
        "experiment = regret\nenv.d = {d}\nalgorithm.m = {m}\nalgorithm.lambda = {lambda}\nalgorithm.delta = {delta}\n\
         algorithm.gamma_bar = {gamma_bar}\nrun.n = {n}\nrun.reps = 20\nrun.master_seed = 6\n\
         run.write_traces = false\ndiag.every = 0\n"
    ));
    let bound: Vec<f64> = (1..=n).map(|t| exceedance_regret_bound(t, d, m, lambda, delta, gamma_bar, 0.1)).collect();
    let within = report
        .outcomes
        .iter()
        .filter(|o| o.regret.iter().zip(&bound).all(|(r, b)| r <= b))
        .count();
    let frac = within as f64 / 20.0;
    outcome(m == 34069 && frac >= 0.6, format!("m = {m}, reps under the bound at every t: {within}/20"))
}

fn sublinear_regret() -> Outcome {
    let run = |name: &str| {
        run_config(&format!(
            "experiment = regret\nenv.d = 5\nalgorithm.name = {name}\nalgorithm.m = 32\nalgorithm.gamma_bar = 1\n\
             algorithm.lambda = 1\nrun.n = 20000\nrun.reps = 20\nrun.master_seed = 7\nrun.write_traces = false\n\
             diag.every = 0\n"
        ))
    };
    let es = run("es");
    let ts = run("ts");
    let slope = es.pooled("loglog_slope").unwrap();
    let es_final = es.pooled("mean_final_regret").unwrap();
    let ts_final = ts.pooled("mean_final_regret").unwrap();
    let ratio = es_final / ts_final;
    outcome(
        slope <= 0.75 && (1.0 / 3.0..=3.0).contains(&ratio),
        format!("slope {slope:.3} (<= 0.75), final regret ES {es_final:.1} vs TS {ts_final:.1} (ratio {ratio:.2})"),
    )
}

fn probe_calibration() -> Outcome {
    let cfg = EnsembleConfig { m: 100_000, ..Default::default() };
    let es = EnsembleState::new(cfg, 3, &mut stream(8, 0, StreamTag::Learner)).unwrap();
    let u = sample_sphere(3, &mut stream(8, 0, StreamTag::Diagnostics));
    let mut worst = 0.0f64;
    for c in [0.05, 0.5, 1.0] {
        let got = exceedance(&es, &u, c).unwrap();
        worst = worst.max((got - (1.0 - phi_series(c))).abs());
    }
    outcome(worst <= 0.005, format!("max |E - (1 - Phi(c))| = {worst:.4} over c in {{0.05, 0.5, 1}}"))
}

fn property_suites() -> Vec<(&'static str, Outcome)> {
    let mut out = Vec::new();
    let mut r = stream(9, 0, StreamTag::Diagnostics);

    let mut worst_inv = 0.0f64;
    let mut worst_logdet = 0.0f64;
    for (d, lambda) in [(2, 1.0), (5, 0.5), (8, 80.0)] {
        let mut s = DesignState::new(d, lambda).unwrap();
        for _ in 0..10_000 {
            let x = sample_sphere(d, &mut r) * r.random_range(0.0..=1.0);
            s.rank_one_update(&x).unwrap();
        }
        let chol = s.v().clone().cholesky().unwrap().l();
        let direct = 2.0 * chol.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        worst_inv = worst_inv.max(s.inverse_residual());
        worst_logdet = worst_logdet.max((s.log_det() - direct).abs());
    }
    out.push((
        "linalg drift",
        outcome(
            worst_inv <= 1e-8 && worst_logdet <= 1e-8,
            format!("after 1e4 updates: inverse residual {worst_inv:.1e}, log-det error {worst_logdet:.1e}"),
        ),
    ));

    let mut violations = 0;
    for i in 0..100_000 {
        let d = 1 + i % 6;
        let a = sample_sphere(d, &mut r) * 10f64.powf(r.random_range(-3.0..3.0));
        let b = sample_sphere(d, &mut r) * 10f64.powf(r.random_range(-3.0..3.0));
        let (lhs, rhs) = normalization_gap(&a, &b);
        if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
            violations += 1;
        }
    }
    out.push(("normalization Lipschitz", outcome(violations == 0, format!("{violations} violations in 1e5 pairs"))));

    let mut violations = 0;
    for _ in 0..100_000 {
        let a = r.random_range(0.1..100.0);
        let b = r.random_range(0.0..1e6);
        let m = solve_log_ineq(a, b);
        if m < a * m.ln() + b {
            violations += 1;
        }
    }
    out.push(("log inequality", outcome(violations == 0, format!("{violations} violations in 1e5 samples"))));

    let e = std::f64::consts::E;
    let grid = [0.0, 1.0, e, e * e];
    let mut mc = stream(9, 1, StreamTag::MonteCarlo);
    let n = 100_000;
    let (mut v0, mut v1, mut v2, mut cov) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let u = ou_transform(&brownian_on_grid(&grid, &mut mc).unwrap(), 1.0).unwrap();
        v0 += u[0].1 * u[0].1;
        v1 += u[1].1 * u[1].1;
        v2 += u[2].1 * u[2].1;
        cov += u[0].1 * u[1].1;
    }
    let nf = n as f64;
    let var_err = [v0, v1, v2].iter().map(|v| (v / nf - 1.0).abs()).fold(0.0, f64::max);
    let cov_err = (cov / nf - (-0.5f64).exp()).abs();
    out.push((
        "OU variance/covariance",
        outcome(var_err <= 0.02 && cov_err <= 0.02, format!("variance error {var_err:.4}, covariance error {cov_err:.4}")),
    ));

    let steps = 1000;
    let path_grid = uniform_grid(2.0, 2 * steps);
    let paths = 100_000;
    let horizons = [0.5, 1.0, 2.0];
    let levels = [1.0, 2.0, 3.0];
    let mut counts = [[0usize; 3]; 3];
    for _ in 0..paths {
        let p = brownian_on_grid(&path_grid, &mut mc).unwrap();
        let mut sup = 0.0f64;
        for (i, v) in p.values.iter().enumerate() {
            sup = sup.max(v.abs());
            for (h, row) in horizons.iter().zip(counts.iter_mut()) {
                if i == (h * steps as f64) as usize {
                    for (a, c) in levels.iter().zip(row.iter_mut()) {
                        if sup >= *a {
                            *c += 1;
                        }
                    }
                }
            }
        }
    }
    let mut worst_margin = f64::INFINITY;
    for (h, row) in horizons.iter().zip(&counts) {
        for (a, c) in levels.iter().zip(row) {
            worst_margin = worst_margin.min(bm_sup_tail_bound(*a, *h) - *c as f64 / paths as f64);
        }
    }
    out.push((
        "Brownian sup-tail",
        outcome(worst_margin >= 0.0, format!("smallest bound minus frequency {worst_margin:.4} on the 3x3 grid")),
    ));

    let mut runs = 0;
    let mut beta_ok = true;
    for seed in 0..30u64 {
        let d = 1 + seed as usize % 5;
        let lambda = 10f64.powf(r.random_range(-1.0..2.0));
        let delta = r.random_range(0.01..0.9);
        let cfg = EnsembleConfig { m: 8, lambda, delta, ..Default::default() };
        let theta = sample_sphere(d, &mut stream(seed, 0, StreamTag::Instance));
        let inst = BanditInstance::new(ActionSet::unit_ball(d).unwrap(), theta, NoiseSpec::default()).unwrap();
        let mut lr = stream(seed, 0, StreamTag::Learner);
        let mut er = stream(seed, 0, StreamTag::Environment);
        let mut es = EnsembleState::new(cfg, d, &mut lr).unwrap();
        run_episode(&inst, &mut es, 300, &mut lr, &mut er, TraceMeta::default(), |t, s: &EnsembleState, _| {
            beta_ok &= beta_formula(s.design(), delta) <= beta_upper(t - 1, d, lambda, delta) + 1e-9;
        })
        .unwrap();
        runs += 1;
    }
    out.push(("beta below its upper bound", outcome(beta_ok, format!("{runs} runs x 300 rounds"))));

    let mut exact = true;
    for seed in 0..200u64 {
        let mut lr = stream(seed, 1, StreamTag::Learner);
        let es = EnsembleState::new(EnsembleConfig { m: 50, ..Default::default() }, 4, &mut lr).unwrap();
        let u = sample_sphere(4, &mut lr);
        let scale = 10f64.powf(lr.random_range(-6.0..6.0));
        let c = lr.random_range(-2.0..2.0);
        exact &= exceedance(&es, &u, c).unwrap() == exceedance(&es, &(&u * scale), c).unwrap();
    }
    out.push(("exceedance scale invariance", outcome(exact, "200 random rescalings compared exactly".into())));
    out
}

fn main() -> ExitCode {
    type Check = (&'static str, Duration, fn() -> Outcome);
    let checks: [Check; 8] = [
        ("1 embedding exactness", Duration::from_secs(60), embedding_exactness),
        ("2 Brownian time-uniform exceedance", Duration::from_secs(600), brownian_exceedance),
        ("3 exceedance constants", Duration::from_secs(1), constants),
        ("4 confidence coverage", Duration::from_secs(300), coverage),
        ("5 lower bound", Duration::from_secs(300), lower_bound),
        ("6 desk-scale regret bound", Duration::from_secs(900), desk_scale_regime),
        ("7 sublinear regret", Duration::from_secs(300), sublinear_regret),
        ("8 exceedance probe calibration", Duration::from_secs(60), probe_calibration),
    ];
    let mut failed = 0;
    for (name, budget, check) in checks {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let pass = o.pass && took <= budget;
        failed += usize::from(!pass);
        println!(
            "[{}] {name}: {} [{:.1}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    for (name, o) in property_suites() {
        failed += usize::from(!o.pass);
        println!("[{}] 9 property suite, {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}
