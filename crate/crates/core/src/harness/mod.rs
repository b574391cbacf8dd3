//! Seeded replication runner and experiment drivers.
//!
//! Replication `r` of a run with master seed `s` draws everything from
//! `stream(s, r, tag)`, so outputs depend only on the config and seed,
//! never on the number of worker threads.

mod config;
mod output;
mod summarize;

use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::baselines::{BaselineState, BaselineVariant};
use crate::brownian::{bm_exceedance_mc, embed_transform, ensemble_transform, exceedance_constants, step_constraint_slack};
use crate::diagnostics::{min_exceedance_over_net, span_projection, span_residual, DirectionNet};
use crate::ensemble::{beta_formula, gamma_formula, EnsembleState};
use crate::environment::{run_episode, sample_sphere, ActionSet, BanditInstance, Learner, RunTrace, TraceMeta};
use crate::error::{domain, Error, Result};
use crate::linalg::{DesignState, NormKind};
use crate::rng::{stream, Rng, StreamTag};

pub use config::{
    fmt_f64, ActionSetKind, AlgorithmConfig, AlgorithmKind, BrownianConfig, DiagConfig, EnvConfig, ExperimentConfig,
    ExperimentKind, OUTPUT_DIR_ENV,
};
pub use output::{
    read_summary, read_traces, trace_records, write_band, write_manifest, write_summary, write_traces, SummaryRow,
    TraceRecord, BAND_HEADER, SUMMARY_HEADER, TRACE_HEADER,
};
pub use summarize::{loglog_slope, quantile_sorted, summarize, summarize_curves, BandRow, Summary};

/// Embedding readouts must match the direct martingale to this relative error.
pub const EMBED_TOL: f64 = 1e-9;

/// Brownian Monte-Carlo grids are this many times finer than the step `h`.
pub const BM_GRID_REFINEMENT: f64 = 4.0;

/// Process exit code for an error: 2 for configuration problems, 3 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        _ => 3,
    }
}

/// Either learner behind one interface.
#[derive(Debug, Clone)]
pub enum AnyLearner {
    Ensemble(EnsembleState),
    Baseline(BaselineState),
}

impl AnyLearner {
    pub fn design(&self) -> &DesignState {
        match self {
            Self::Ensemble(s) => s.design(),
            Self::Baseline(s) => s.design(),
        }
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        match self {
            Self::Ensemble(s) => s.theta_hat(),
            Self::Baseline(s) => s.theta_hat(),
        }
    }

    pub fn ensemble(&self) -> Option<&EnsembleState> {
        match self {
            Self::Ensemble(s) => Some(s),
            Self::Baseline(_) => None,
        }
    }
}

impl Learner for AnyLearner {
    fn select(&mut self, actions: &ActionSet, rng: &mut Rng) -> DVector<f64> {
        match self {
            Self::Ensemble(s) => s.select(actions, rng),
            Self::Baseline(s) => s.select(actions, rng),
        }
    }

    fn observe(&mut self, x: &DVector<f64>, y: f64, rng: &mut Rng) -> Result<()> {
        match self {
            Self::Ensemble(s) => s.observe(x, y, rng),
            Self::Baseline(s) => s.observe(x, y, rng),
        }
    }

    fn beta(&self) -> f64 {
        match self {
            Self::Ensemble(s) => s.beta(),
            Self::Baseline(s) => s.beta(),
        }
    }
}

/// Bandit instance of replication `rep`: the hidden parameter and any
/// finite arms come from the instance stream.
pub fn build_instance(cfg: &ExperimentConfig, rep: u64) -> Result<BanditInstance> {
    let mut rng = stream(cfg.master_seed, rep, StreamTag::Instance);
    let d = cfg.env.d;
    let theta = cfg.env.theta.draw(d, &mut rng)?;
    let actions = match cfg.env.action_set {
        ActionSetKind::Ball => ActionSet::unit_ball(d)?,
        ActionSetKind::Finite => ActionSet::finite((0..cfg.env.k).map(|_| sample_sphere(d, &mut rng)).collect())?,
    };
    BanditInstance::new(actions, theta, cfg.env.noise)
}

pub fn build_learner(cfg: &ExperimentConfig, rng: &mut Rng) -> Result<AnyLearner> {
    let a = &cfg.algorithm;
    let d = cfg.env.d;
    let baseline = |v| BaselineState::new(v, d, a.lambda, a.delta).map(AnyLearner::Baseline);
    match a.kind {
        AlgorithmKind::Es => Ok(AnyLearner::Ensemble(EnsembleState::new(cfg.ensemble_config(), d, rng)?)),
        AlgorithmKind::Ts => baseline(BaselineVariant::ThompsonInflated),
        AlgorithmKind::LinUcb => baseline(BaselineVariant::LinUcb),
        AlgorithmKind::Greedy => baseline(BaselineVariant::Greedy),
    }
}

/// `‖θ̂ − θ⋆‖_V > β` with the adaptive radius.
fn outside_ellipsoid(learner: &AnyLearner, theta_star: &DVector<f64>, delta: f64) -> bool {
    let design = learner.design();
    let err = learner.theta_hat() - theta_star;
    let dist = design.weighted_norm(&err, NormKind::Design).unwrap_or(f64::INFINITY);
    dist > beta_formula(design, delta)
}

/// Result of one replication.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub rep: u64,
    /// Full trace, kept only when traces are written.
    pub trace: Option<RunTrace>,
    /// Cumulative regret after each round.
    pub regret: Vec<f64>,
    pub stats: Vec<(String, f64)>,
}

/// Everything a run produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub outcomes: Vec<RepOutcome>,
    /// Statistics pooled over replications.
    pub pooled: Vec<(String, f64)>,
    pub summary: Option<Summary>,
}

impl RunReport {
    pub fn pooled(&self, name: &str) -> Option<f64> {
        self.pooled.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let exp = self.experiment.name();
        let row = |rep, (k, v): &(String, f64)| SummaryRow {
            experiment: exp.to_string(),
            rep,
            statistic: k.clone(),
            value: *v,
        };
        let mut rows: Vec<SummaryRow> = self
            .outcomes
            .iter()
            .flat_map(|o| o.stats.iter().map(move |s| row(Some(o.rep), s)))
            .collect();
        rows.extend(self.pooled.iter().map(|s| row(None, s)));
        rows
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn episode_rep(cfg: &ExperimentConfig, rep: u64, config_hash: &str) -> Result<RepOutcome> {
    let instance = build_instance(cfg, rep)?;
    let mut learner_rng = stream(cfg.master_seed, rep, StreamTag::Learner);
    let mut env_rng = stream(cfg.master_seed, rep, StreamTag::Environment);
    let mut diag_rng = stream(cfg.master_seed, rep, StreamTag::Diagnostics);
    let mut learner = build_learner(cfg, &mut learner_rng)?;

    let probing = cfg.diag.every > 0
        && learner.ensemble().is_some()
        && matches!(cfg.experiment, ExperimentKind::Regret | ExperimentKind::ExceedanceEs);
    let net = if probing {
        Some(if cfg.env.d == 2 {
            DirectionNet::angular_grid(cfg.diag.net_eps)?
        } else {
            DirectionNet::random_sphere(cfg.env.d, cfg.diag.net_size, cfg.diag.net_eps, &mut diag_rng)?
        })
    } else {
        None
    };
    let c = cfg.diag_c();
    let coverage = cfg.experiment == ExperimentKind::Coverage;
    let delta = cfg.algorithm.delta;
    let mut violated = false;
    let mut probe_err = None;

    let meta = TraceMeta {
        seed: cfg.master_seed,
        rep,
        algorithm: cfg.algorithm.kind.name().to_string(),
        config_hash: config_hash.to_string(),
    };
    let mut trace = run_episode(
        &instance,
        &mut learner,
        cfg.n,
        &mut learner_rng,
        &mut env_rng,
        meta,
        |t, l: &AnyLearner, diag| {
            if coverage && !violated {
                violated = outside_ellipsoid(l, instance.theta_star(), delta);
            }
            if let (Some(net), Some(es)) = (&net, l.ensemble()) {
                if (t - 1) % cfg.diag.every == 0 {
                    match min_exceedance_over_net(es, net, c) {
                        Ok(v) => *diag = Some(v),
                        Err(e) => {
                            probe_err.get_or_insert(e);
                        }
                    }
                }
            }
        },
    )?;
    if let Some(e) = probe_err {
        return Err(e);
    }
    if coverage && !violated {
        violated = outside_ellipsoid(&learner, instance.theta_star(), delta);
    }
    if let Some(es) = learner.ensemble() {
        let a = &cfg.algorithm;
        for row in &mut trace.rows {
            row.gamma = gamma_formula(row.t - 1, cfg.env.d, a.m, a.lambda, a.delta);
        }
        debug_assert_eq!(es.round(), cfg.n);
    }

    let n = cfg.n as f64;
    let final_regret = trace.final_regret();
    let mut stats = vec![("final_regret".to_string(), final_regret)];
    let mut stat = |k: &str, v: f64| stats.push((k.to_string(), v));
    let probes: Vec<f64> = trace.rows.iter().filter_map(|r| r.min_exceedance).collect();
    if !probes.is_empty() {
        let min = probes.iter().copied().fold(f64::INFINITY, f64::min);
        stat("min_exceedance", min);
        if cfg.experiment == ExperimentKind::ExceedanceEs {
            stat("below_p", flag(min < cfg.brownian.p));
        }
    }
    match cfg.experiment {
        ExperimentKind::Coverage => stat("violated", flag(violated)),
        ExperimentKind::EmbedCheck => {
            let es = learner.ensemble().expect("validated");
            let log = es.draw_log().expect("draws logged");
            let actions: Vec<DVector<f64>> = trace.rows.iter().map(|r| r.action.clone()).collect();
            let u = sample_sphere(cfg.env.d, &mut diag_rng);
            let (spec, xi) = ensemble_transform(log, &actions, &u, cfg.algorithm.lambda)?;
            let mut mc = stream(cfg.master_seed, rep, StreamTag::MonteCarlo);
            let emb = embed_transform(&spec, &xi, cfg.brownian.segments, &mut mc)?;
            stat("max_readout_error", emb.max_readout_error);
            stat("within_tolerance", flag(emb.max_readout_error <= EMBED_TOL));
        }
        ExperimentKind::LowerBound => {
            let es = learner.ensemble().expect("validated");
            let prior = &es.draw_log().expect("draws logged").prior;
            let proj_sq = span_projection(prior, instance.theta_star());
            stat("proj_sq", proj_sq);
            stat("span_residual", span_residual(&trace, prior));
            stat("bound_slack", final_regret - n * (1.0 - proj_sq.sqrt()));
            stat("proj_sq_le_half", flag(proj_sq <= 0.5));
            stat("regret_ge_quarter", flag(final_regret >= n / 4.0));
        }
        _ => {}
    }

    Ok(RepOutcome {
        rep,
        regret: trace.rows.iter().map(|r| r.regret).collect(),
        trace: cfg.write_traces.then_some(trace),
        stats,
    })
}

fn constants_stats(cfg: &ExperimentConfig) -> Result<Vec<(String, f64)>> {
    let b = &cfg.brownian;
    let k = exceedance_constants(b.c, b.p, b.tau, b.tau_prime, b.delta, b.h)?;
    let (drift, fluct) = step_constraint_slack(k.c, k.eps, k.h);
    Ok(vec![
        ("p0".into(), k.p0),
        ("eps".into(), k.eps),
        ("h_star".into(), k.h_star),
        ("h".into(), k.h),
        ("k".into(), k.k as f64),
        ("m_min".into(), k.m_min as f64),
        ("drift_slack".into(), drift),
        ("fluctuation_slack".into(), fluct),
    ])
}

fn bm_outcomes(cfg: &ExperimentConfig) -> Result<Vec<RepOutcome>> {
    let b = &cfg.brownian;
    let h = cfg.brownian_h();
    let m = match b.m {
        Some(m) => m,
        None => exceedance_constants(b.c, b.p, b.tau, b.tau_prime, b.delta, Some(h))?.m_min as usize,
    };
    let density = (BM_GRID_REFINEMENT / h).ceil() as usize;
    let fractions = bm_exceedance_mc(m, b.c, b.tau, b.tau_prime, density, cfg.reps, cfg.master_seed)?;
    Ok(fractions
        .into_iter()
        .map(|(rep, f)| RepOutcome {
            rep: rep as u64,
            trace: None,
            regret: Vec::new(),
            stats: vec![
                ("m".into(), m as f64),
                ("inf_fraction".into(), f),
                ("below_p".into(), flag(f < b.p)),
            ],
        })
        .collect())
}

/// Mean of every per-replication statistic, named `mean_<stat>`. For 0/1
/// indicators this is the fraction of replications.
fn pool(outcomes: &[RepOutcome]) -> Vec<(String, f64)> {
    let Some(first) = outcomes.first() else {
        return Vec::new();
    };
    first
        .stats
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let total: f64 = outcomes.iter().map(|o| o.stats[i].1).sum();
            (format!("mean_{name}"), total / outcomes.len() as f64)
        })
        .collect()
}

/// Runs every replication and pools the results without touching disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let config_hash = cfg.hash();
    let pool_threads = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| domain(format!("cannot start worker pool: {e}")))?;

    let (outcomes, mut pooled) = pool_threads.install(|| -> Result<_> {
        Ok(match cfg.experiment {
            ExperimentKind::Constants => (Vec::new(), constants_stats(cfg)?),
            ExperimentKind::ExceedanceBm => {
                let o = bm_outcomes(cfg)?;
                let p = pool(&o);
                (o, p)
            }
            _ => {
                let o = (0..cfg.reps as u64)
                    .into_par_iter()
                    .map(|rep| episode_rep(cfg, rep, &config_hash))
                    .collect::<Result<Vec<_>>>()?;
                let p = pool(&o);
                (o, p)
            }
        })
    })?;

    let summary = if outcomes.iter().any(|o| !o.regret.is_empty()) {
        let curves: Vec<Vec<f64>> = outcomes.iter().map(|o| o.regret.clone()).collect();
        let s = summarize_curves(&curves)?;
        if let Some(slope) = s.slope {
            pooled.push(("loglog_slope".into(), slope));
        }
        Some(s)
    } else {
        None
    };

    Ok(RunReport {
        experiment: cfg.experiment,
        config_hash,
        outcomes,
        pooled,
        summary,
    })
}

/// Runs the experiment and writes `summary.csv`, `band.csv` and
/// `trace.csv` (when produced) plus `manifest.txt` into the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let report = execute(cfg)?;
    write_report(&cfg.output_dir, cfg, &report)?;
    Ok(report)
}

pub fn write_report(dir: &Path, cfg: &ExperimentConfig, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = vec!["summary.csv"];
    write_summary(&dir.join("summary.csv"), &report.summary_rows())?;
    if let Some(s) = &report.summary {
        write_band(&dir.join("band.csv"), &s.band)?;
        files.push("band.csv");
    }
    let traces: Vec<RunTrace> = report.outcomes.iter().filter_map(|o| o.trace.clone()).collect();
    if !traces.is_empty() {
        write_traces(&dir.join("trace.csv"), &traces)?;
        files.push("trace.csv");
    }
    write_manifest(dir, &report.config_hash, &cfg.canonical(), &files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn exit_codes() {
        let e = ExperimentConfig::parse("experiment = nope\n").unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&Error::ZeroDirection), 3);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let text = "experiment = regret\nenv.d = 3\nalgorithm.m = 8\nrun.n = 150\nrun.reps = 6\ndiag.every = 50\ndiag.net_size = 64\n";
        let one = execute(&cfg(&format!("{text}run.workers = 1\n"))).unwrap();
        let many = execute(&cfg(&format!("{text}run.workers = 4\n"))).unwrap();
        assert_eq!(one.summary_rows(), many.summary_rows());
        for (a, b) in one.outcomes.iter().zip(&many.outcomes) {
            assert_eq!(trace_records(a.trace.as_ref().unwrap()), trace_records(b.trace.as_ref().unwrap()));
        }
    }

    #[test]
    fn es_trace_fields() {
        let r = execute(&cfg("experiment = regret\nalgorithm.m = 4\nrun.n = 201\ndiag.every = 100\n")).unwrap();
        let tr = r.outcomes[0].trace.as_ref().unwrap();
        let probed: Vec<usize> = tr.rows.iter().filter(|r| r.min_exceedance.is_some()).map(|r| r.t).collect();
        assert_eq!(probed, vec![1, 101, 201]);
        assert!(tr.rows.iter().all(|r| r.beta.is_finite() && r.gamma.is_finite()));
        assert!(tr.rows.windows(2).all(|w| w[1].regret >= w[0].regret - 1e-12));
    }

    #[test]
    fn baseline_gamma_is_blank() {
        let r = execute(&cfg("experiment = regret\nalgorithm.name = linucb\nrun.n = 20\n")).unwrap();
        let tr = r.outcomes[0].trace.as_ref().unwrap();
        assert!(tr.rows.iter().all(|r| r.gamma.is_nan() && r.min_exceedance.is_none()));
    }

    #[test]
    fn constants_experiment_values() {
        let r = execute(&cfg("experiment = constants\nbrownian.c = 0.05\nbrownian.p = 0.1\n")).unwrap();
        assert!((r.pooled("p0").unwrap() - 0.120015).abs() < 1e-6);
        assert!((r.pooled("eps").unwrap() - 0.067782).abs() < 1e-6);
        assert!((r.pooled("h_star").unwrap() - 0.004409).abs() < 1e-6);
        assert!(r.outcomes.is_empty() && r.summary.is_none());
    }

    #[test]
    fn lowerbound_stats_are_consistent() {
        let r = execute(&cfg(
            "experiment = lowerbound\nenv.d = 6\nalgorithm.m = 2\nalgorithm.precision = extended\nrun.n = 100\nrun.reps = 4\nrun.write_traces = false\n",
        ))
        .unwrap();
        for o in &r.outcomes {
            let get = |k: &str| o.stats.iter().find(|(n, _)| n == k).unwrap().1;
            assert!(get("span_residual") <= 1e-8);
            assert!(get("bound_slack") >= -1e-6);
            assert!(o.trace.is_none());
        }
        assert!(r.pooled("mean_regret_ge_quarter").is_some());
    }

    #[test]
    fn embed_check_is_exact() {
        let r = execute(&cfg("experiment = embed_check\nalgorithm.m = 3\nrun.n = 40\nrun.reps = 2\n")).unwrap();
        assert_eq!(r.pooled("mean_within_tolerance"), Some(1.0));
    }
}
