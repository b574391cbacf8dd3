//! Flat `section.key = value` experiment configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Every key must be
//! known; repeated keys are rejected. Values are typed per key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::brownian::STANDARD_STEP;
use crate::ensemble::{BetaMode, EnsembleConfig, Perturbation, Precision};
use crate::environment::{NoiseSpec, ThetaMode};
use crate::error::{Error, Result};

/// Environment variable that overrides `run.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "ENSLAB_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Regret,
    ExceedanceEs,
    ExceedanceBm,
    EmbedCheck,
    LowerBound,
    Coverage,
    Constants,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Regret => "regret",
            Self::ExceedanceEs => "exceedance_es",
            Self::ExceedanceBm => "exceedance_bm",
            Self::EmbedCheck => "embed_check",
            Self::LowerBound => "lowerbound",
            Self::Coverage => "coverage",
            Self::Constants => "constants",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "regret" => Self::Regret,
            "exceedance_es" => Self::ExceedanceEs,
            "exceedance_bm" => Self::ExceedanceBm,
            "embed_check" => Self::EmbedCheck,
            "lowerbound" => Self::LowerBound,
            "coverage" => Self::Coverage,
            "constants" => Self::Constants,
            _ => return None,
        })
    }

    /// Experiments that only make sense for the ensemble learner.
    fn needs_ensemble(self) -> bool {
        matches!(self, Self::ExceedanceEs | Self::EmbedCheck | Self::LowerBound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSetKind {
    Ball,
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Es,
    Ts,
    LinUcb,
    Greedy,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Es => "es",
            Self::Ts => "ts",
            Self::LinUcb => "linucb",
            Self::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub d: usize,
    pub action_set: ActionSetKind,
    /// Number of arms for a finite action set; arms are drawn uniformly on the sphere.
    pub k: usize,
    pub theta: ThetaMode,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub m: usize,
    pub gamma_bar: f64,
    pub lambda: f64,
    pub delta: f64,
    /// Use the horizon-`n` upper bound for the radius instead of the adaptive one.
    pub fixed_beta: bool,
    pub prior: Perturbation,
    pub perturbation: Perturbation,
    pub precision: Precision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagConfig {
    /// Rounds between exceedance probes; 0 disables them.
    pub every: usize,
    /// Threshold; defaults to `1/γ̄`.
    pub c: Option<f64>,
    pub net_eps: f64,
    pub net_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianConfig {
    pub c: f64,
    pub p: f64,
    pub tau: f64,
    pub tau_prime: f64,
    pub delta: f64,
    pub h: Option<f64>,
    /// Number of Brownian motions; defaults to `m_min`.
    pub m: Option<usize>,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub env: EnvConfig,
    pub algorithm: AlgorithmConfig,
    pub n: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub write_traces: bool,
    pub diag: DiagConfig,
    pub brownian: BrownianConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let es = EnsembleConfig::default();
        Self {
            experiment: ExperimentKind::Regret,
            env: EnvConfig {
                d: 2,
                action_set: ActionSetKind::Ball,
                k: 10,
                theta: ThetaMode::SphereUniform,
                noise: NoiseSpec::default(),
            },
            algorithm: AlgorithmConfig {
                kind: AlgorithmKind::Es,
                m: es.m,
                gamma_bar: es.gamma_bar,
                lambda: es.lambda,
                delta: es.delta,
                fixed_beta: false,
                prior: es.prior,
                perturbation: es.perturbation,
                precision: es.precision,
            },
            n: 1000,
            reps: 1,
            master_seed: 0,
            workers: 1,
            output_dir: PathBuf::from("out"),
            write_traces: true,
            diag: DiagConfig {
                every: 100,
                c: None,
                net_eps: 0.1,
                net_size: crate::diagnostics::DEFAULT_RANDOM_NET,
            },
            brownian: BrownianConfig {
                c: 0.05,
                p: 0.1,
                tau: 1.0,
                tau_prime: 100.0,
                delta: 0.1,
                h: None,
                m: None,
                segments: 8,
            },
        }
    }
}

const KEYS: &[&str] = &[
    "experiment",
    "env.d",
    "env.action_set",
    "env.k",
    "env.theta",
    "env.noise",
    "env.sigma",
    "algorithm.name",
    "algorithm.m",
    "algorithm.gamma_bar",
    "algorithm.lambda",
    "algorithm.delta",
    "algorithm.beta_mode",
    "algorithm.prior",
    "algorithm.perturbation",
    "algorithm.precision",
    "run.n",
    "run.reps",
    "run.master_seed",
    "run.workers",
    "run.output_dir",
    "run.write_traces",
    "diag.every",
    "diag.c",
    "diag.net_eps",
    "diag.net_size",
    "brownian.c",
    "brownian.p",
    "brownian.tau",
    "brownian.tau_prime",
    "brownian.delta",
    "brownian.h",
    "brownian.m",
    "brownian.segments",
];

fn err(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Fields {
    map: BTreeMap<String, Entry>,
}

impl Fields {
    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.line)
    }

    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .ok_or_else(|| err(e.line, key, format!("expected {expected}, got `{}`", e.value))),
        }
    }

    fn set<T>(&self, key: &str, slot: &mut T, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Result<()> {
        if let Some(v) = self.get(key, parse, expected)? {
            *slot = v;
        }
        Ok(())
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Option<T> {
    s.parse().ok()
}

fn finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn boolean(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn perturbation(s: &str) -> Option<Perturbation> {
    match s {
        "normal" => Some(Perturbation::StandardNormal),
        "rademacher" => Some(Perturbation::Rademacher),
        "zero" => Some(Perturbation::Zero),
        _ => None,
    }
}

fn perturbation_name(p: Perturbation) -> &'static str {
    match p {
        Perturbation::StandardNormal => "normal",
        Perturbation::Rademacher => "rademacher",
        Perturbation::Zero => "zero",
    }
}

fn theta(s: &str) -> Option<ThetaMode> {
    if s == "sphere" {
        return Some(ThetaMode::SphereUniform);
    }
    s.split(',')
        .map(|x| finite(x.trim()))
        .collect::<Option<Vec<_>>>()
        .map(ThetaMode::Fixed)
}

/// Shortest decimal that parses back to the same float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

impl ExperimentConfig {
    /// Parses a config file and applies the output-directory override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(err(line, body, "expected `key = value`"));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(err(line, key, "unknown key"));
            }
            if let Some(prev) = map.get(key) {
                let prev: &Entry = prev;
                return Err(err(line, key, format!("duplicate key, first set on line {}", prev.line)));
            }
            map.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }
        let f = Fields { map };
        let mut cfg = Self::default();

        cfg.experiment = f
            .get("experiment", ExperimentKind::parse, "an experiment name")?
            .ok_or_else(|| err(0, "experiment", "missing required key"))?;

        f.set("env.d", &mut cfg.env.d, num, "a positive integer")?;
        f.set(
            "env.action_set",
            &mut cfg.env.action_set,
            |s| match s {
                "ball" => Some(ActionSetKind::Ball),
                "finite" => Some(ActionSetKind::Finite),
                _ => None,
            },
            "`ball` or `finite`",
        )?;
        f.set("env.k", &mut cfg.env.k, num, "a positive integer")?;
        f.set("env.theta", &mut cfg.env.theta, theta, "`sphere` or a comma-separated vector")?;
        let sigma = f.get("env.sigma", finite, "a number")?;
        let noise = f.get("env.noise", |s| Some(s.to_string()), "")?;
        cfg.env.noise = match noise.as_deref().unwrap_or("gaussian") {
            "gaussian" => NoiseSpec::Gaussian { sigma: sigma.unwrap_or(1.0) },
            other => {
                if sigma.is_some() {
                    return Err(err(f.line("env.sigma"), "env.sigma", "only used with gaussian noise"));
                }
                match other {
                    "rademacher" => NoiseSpec::Rademacher,
                    "uniform" => NoiseSpec::Uniform,
                    "zero" => NoiseSpec::Zero,
                    _ => {
                        return Err(err(
                            f.line("env.noise"),
                            "env.noise",
                            format!("expected gaussian, rademacher, uniform or zero, got `{other}`"),
                        ))
                    }
                }
            }
        };

        let a = &mut cfg.algorithm;
        f.set(
            "algorithm.name",
            &mut a.kind,
            |s| match s {
                "es" => Some(AlgorithmKind::Es),
                "ts" => Some(AlgorithmKind::Ts),
                "linucb" => Some(AlgorithmKind::LinUcb),
                "greedy" => Some(AlgorithmKind::Greedy),
                _ => None,
            },
            "es, ts, linucb or greedy",
        )?;
        f.set("algorithm.m", &mut a.m, num, "a positive integer")?;
        f.set("algorithm.gamma_bar", &mut a.gamma_bar, finite, "a number")?;
        f.set("algorithm.lambda", &mut a.lambda, finite, "a number")?;
        f.set("algorithm.delta", &mut a.delta, finite, "a number")?;
        f.set(
            "algorithm.beta_mode",
            &mut a.fixed_beta,
            |s| match s {
                "adaptive" => Some(false),
                "upper" => Some(true),
                _ => None,
            },
            "`adaptive` or `upper`",
        )?;
        f.set("algorithm.prior", &mut a.prior, perturbation, "normal, rademacher or zero")?;
        f.set("algorithm.perturbation", &mut a.perturbation, perturbation, "normal, rademacher or zero")?;
        f.set(
            "algorithm.precision",
            &mut a.precision,
            |s| match s {
                "double" => Some(Precision::Double),
                "extended" => Some(Precision::Extended),
                _ => None,
            },
            "`double` or `extended`",
        )?;

        f.set("run.n", &mut cfg.n, num, "a positive integer")?;
        f.set("run.reps", &mut cfg.reps, num, "a positive integer")?;
        f.set("run.master_seed", &mut cfg.master_seed, num, "an unsigned integer")?;
        f.set("run.workers", &mut cfg.workers, num, "a positive integer")?;
        f.set("run.output_dir", &mut cfg.output_dir, |s| Some(PathBuf::from(s)), "a path")?;
        f.set("run.write_traces", &mut cfg.write_traces, boolean, "`true` or `false`")?;

        f.set("diag.every", &mut cfg.diag.every, num, "an unsigned integer")?;
        if let Some(c) = f.get("diag.c", finite, "a number")? {
            cfg.diag.c = Some(c);
        }
        f.set("diag.net_eps", &mut cfg.diag.net_eps, finite, "a number")?;
        f.set("diag.net_size", &mut cfg.diag.net_size, num, "a positive integer")?;

        let b = &mut cfg.brownian;
        f.set("brownian.c", &mut b.c, finite, "a number")?;
        f.set("brownian.p", &mut b.p, finite, "a number")?;
        f.set("brownian.tau", &mut b.tau, finite, "a number")?;
        f.set("brownian.tau_prime", &mut b.tau_prime, finite, "a number")?;
        f.set("brownian.delta", &mut b.delta, finite, "a number")?;
        if let Some(h) = f.get("brownian.h", finite, "a number")? {
            b.h = Some(h);
        }
        if let Some(m) = f.get(
            "brownian.m",
            |s| if s == "auto" { Some(None) } else { num(s).map(Some) },
            "a positive integer or `auto`",
        )? {
            b.m = m;
        }
        f.set("brownian.segments", &mut b.segments, num, "a positive integer")?;

        cfg.validate_with(&f)?;
        Ok(cfg)
    }

    /// Checks every parameter against its domain.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(&Fields { map: BTreeMap::new() })
    }

    fn validate_with(&self, f: &Fields) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(err(f.line(key), key, msg)) };
        check(self.env.d >= 1, "env.d", "dimension must be at least 1")?;
        check(
            self.env.action_set == ActionSetKind::Ball || self.env.k >= 1,
            "env.k",
            "finite action set needs at least one arm",
        )?;
        if let ThetaMode::Fixed(v) = &self.env.theta {
            check(v.len() == self.env.d, "env.theta", "length must equal env.d")?;
        }
        if let Err(e) = self.env.noise.validate() {
            return Err(err(f.line("env.sigma"), "env.sigma", e.to_string()));
        }
        if let Err(e) = self.ensemble_config().validate() {
            let key = if self.algorithm.m == 0 {
                "algorithm.m"
            } else if !(self.algorithm.gamma_bar > 0.0) {
                "algorithm.gamma_bar"
            } else if !(self.algorithm.lambda > 0.0) {
                "algorithm.lambda"
            } else {
                "algorithm.delta"
            };
            return Err(err(f.line(key), key, e.to_string()));
        }
        check(self.n >= 1, "run.n", "horizon must be at least 1")?;
        check(self.reps >= 1, "run.reps", "need at least one replication")?;
        check(self.workers >= 1, "run.workers", "need at least one worker")?;
        check(
            self.diag.net_eps > 0.0,
            "diag.net_eps",
            "net radius must be positive",
        )?;
        check(self.diag.net_size >= 1, "diag.net_size", "net needs at least one direction")?;
        check(
            self.brownian.p > 0.0 && self.brownian.p < 1.0,
            "brownian.p",
            "p must lie in (0, 1)",
        )?;
        check(
            self.brownian.tau > 0.0 && self.brownian.tau_prime > self.brownian.tau,
            "brownian.tau_prime",
            "need 0 < tau < tau_prime",
        )?;
        check(
            self.brownian.delta > 0.0 && self.brownian.delta < 1.0,
            "brownian.delta",
            "delta must lie in (0, 1)",
        )?;
        check(self.brownian.h.is_none_or(|h| h > 0.0), "brownian.h", "step must be positive")?;
        check(self.brownian.m.is_none_or(|m| m >= 1), "brownian.m", "need at least one motion")?;
        check(self.brownian.segments >= 2, "brownian.segments", "need at least two segments")?;
        if self.experiment.needs_ensemble() {
            check(
                self.algorithm.kind == AlgorithmKind::Es,
                "algorithm.name",
                "this experiment requires algorithm.name = es",
            )?;
        }
        if self.experiment == ExperimentKind::LowerBound {
            check(
                self.env.action_set == ActionSetKind::Ball,
                "env.action_set",
                "lowerbound requires the unit ball",
            )?;
        }
        Ok(())
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        let a = &self.algorithm;
        EnsembleConfig {
            m: a.m,
            gamma_bar: a.gamma_bar,
            lambda: a.lambda,
            delta: a.delta,
            prior: a.prior,
            perturbation: a.perturbation,
            beta_mode: if a.fixed_beta {
                BetaMode::FixedUpperBound { horizon: self.n }
            } else {
                BetaMode::Adaptive
            },
            log_draws: matches!(self.experiment, ExperimentKind::EmbedCheck | ExperimentKind::LowerBound),
            precision: a.precision,
        }
    }

    /// Threshold for exceedance probes.
    pub fn diag_c(&self) -> f64 {
        self.diag.c.unwrap_or(1.0 / self.algorithm.gamma_bar)
    }

    /// Log-time step for the Brownian experiments.
    pub fn brownian_h(&self) -> f64 {
        self.brownian.h.unwrap_or(STANDARD_STEP)
    }

    /// Every setting that influences results, one `key = value` per line in
    /// a fixed order. The output directory, worker count and trace switch
    /// are left out because they do not change any number.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("experiment", self.experiment.name().into());
        put("env.d", self.env.d.to_string());
        put(
            "env.action_set",
            match self.env.action_set {
                ActionSetKind::Ball => "ball",
                ActionSetKind::Finite => "finite",
            }
            .into(),
        );
        put("env.k", self.env.k.to_string());
        put(
            "env.theta",
            match &self.env.theta {
                ThetaMode::SphereUniform => "sphere".into(),
                ThetaMode::Fixed(v) => v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","),
            },
        );
        let (noise, sigma) = match self.env.noise {
            NoiseSpec::Gaussian { sigma } => ("gaussian", Some(sigma)),
            NoiseSpec::Rademacher => ("rademacher", None),
            NoiseSpec::Uniform => ("uniform", None),
            NoiseSpec::Zero => ("zero", None),
        };
        put("env.noise", noise.into());
        if let Some(sigma) = sigma {
            put("env.sigma", fmt_f64(sigma));
        }
        let a = &self.algorithm;
        put("algorithm.name", a.kind.name().into());
        put("algorithm.m", a.m.to_string());
        put("algorithm.gamma_bar", fmt_f64(a.gamma_bar));
        put("algorithm.lambda", fmt_f64(a.lambda));
        put("algorithm.delta", fmt_f64(a.delta));
        put("algorithm.beta_mode", if a.fixed_beta { "upper" } else { "adaptive" }.into());
        put("algorithm.prior", perturbation_name(a.prior).into());
        put("algorithm.perturbation", perturbation_name(a.perturbation).into());
        put(
            "algorithm.precision",
            match a.precision {
                Precision::Double => "double",
                Precision::Extended => "extended",
            }
            .into(),
        );
        put("run.n", self.n.to_string());
        put("run.reps", self.reps.to_string());
        put("run.master_seed", self.master_seed.to_string());
        put("diag.every", self.diag.every.to_string());
        put("diag.c", fmt_f64(self.diag_c()));
        put("diag.net_eps", fmt_f64(self.diag.net_eps));
        put("diag.net_size", self.diag.net_size.to_string());
        let b = &self.brownian;
        put("brownian.c", fmt_f64(b.c));
        put("brownian.p", fmt_f64(b.p));
        put("brownian.tau", fmt_f64(b.tau));
        put("brownian.tau_prime", fmt_f64(b.tau_prime));
        put("brownian.delta", fmt_f64(b.delta));
        put("brownian.h", fmt_f64(self.brownian_h()));
        put("brownian.m", b.m.map_or("auto".into(), |m| m.to_string()));
        put("brownian.segments", b.segments.to_string());
        s
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
