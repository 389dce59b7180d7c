//! Flat key-value run configuration.
//!
//! The format is one dotted key per line, `key = value`, with `#` comments
//! and blank lines ignored. Unknown and duplicate keys are rejected, and
//! every referenced invariant is re-validated at load time.

use anyhow::{bail, Context, Result};
use qbv_core::filter::LemmaSuiteConfig;
use qbv_core::problem::single_mode_problem;
use qbv_core::{
    DiffusionProfile, EigenBasis, FilterParams, ManufacturedProblem, SolverConfig, SourceKind,
    SweepPlan, TimeGrid, TruncationSchedule,
};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

/// Error marker for configuration problems (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! config_err {
    ($($arg:tt)*) => {
        return Err(ConfigError(format!($($arg)*)).into())
    };
}

const KNOWN_KEYS: &[&str] = &[
    "problem.name",
    "problem.nagumo_c",
    "problem.amplitude",
    "profile.kind",
    "profile.p",
    "profile.q",
    "profile.horizon",
    "basis.modes",
    "basis.collocation",
    "grid.nodes",
    "filter.k",
    "truncation.rho",
    "solver.tol",
    "solver.max_iterations",
    "sweep.deltas",
    "sweep.times",
    "sweep.replicates",
    "stability.delta",
    "stability.epsilons",
    "stability.times",
    "stability.seeds",
    "solve.delta",
    "illposed.delta",
    "lemmas.deltas",
    "lemmas.m_values",
    "lemmas.k_values",
    "lemmas.samples",
    "lemmas.bound_scale",
    "output.dir",
];

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem_name: String,
    pub nagumo_c: Option<f64>,
    pub amplitude: f64,
    pub profile_kind: String,
    pub profile_p: f64,
    pub profile_q: f64,
    pub horizon: f64,
    pub modes: usize,
    pub collocation: usize,
    pub grid_nodes: usize,
    pub filter_k: f64,
    pub truncation_rho: f64,
    pub solver_tol: f64,
    pub solver_max_iterations: usize,
    pub sweep_deltas: Vec<f64>,
    pub sweep_times: Vec<f64>,
    pub sweep_replicates: usize,
    pub stability_delta: f64,
    pub stability_epsilons: Vec<f64>,
    pub stability_times: Vec<f64>,
    pub stability_seeds: usize,
    pub solve_delta: f64,
    pub illposed_delta: f64,
    pub lemma_deltas: Vec<f64>,
    pub lemma_m_values: Vec<f64>,
    pub lemma_k_values: Vec<f64>,
    pub lemma_samples: usize,
    pub lemma_bound_scale: f64,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let horizon = 1.0;
        RunConfig {
            problem_name: "fisher".into(),
            nagumo_c: None,
            amplitude: 1.0,
            profile_kind: "constant".into(),
            profile_p: 1.0,
            profile_q: 1.0,
            horizon,
            modes: 64,
            collocation: 256,
            grid_nodes: 200,
            filter_k: 1.0,
            truncation_rho: 2.0,
            solver_tol: 1e-10,
            solver_max_iterations: 200,
            sweep_deltas: (1..=6).map(|e| 10f64.powi(-e)).collect(),
            sweep_times: vec![0.0, horizon / 4.0, horizon / 2.0, 3.0 * horizon / 4.0],
            sweep_replicates: 5,
            stability_delta: 1e-3,
            stability_epsilons: vec![1e-3, 1e-4, 1e-5],
            stability_times: vec![0.0, horizon / 2.0],
            stability_seeds: 10,
            solve_delta: 1e-3,
            illposed_delta: 1e-6,
            lemma_deltas: (1..=8).map(|e| 10f64.powi(-e)).collect(),
            lemma_m_values: vec![0.5, 1.0, 2.0, 5.0],
            lemma_k_values: vec![1.0, 1.5, 2.0, 3.0],
            lemma_samples: 10_000,
            lemma_bound_scale: 1.0,
            output_dir: "out".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut horizon_given = false;
        let mut sweep_times_given = false;
        let mut stability_times_given = false;
        let mut profile_q_given = false;

        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| ConfigError(format!("cannot read config file {}", path.display())))?;
            let mut seen: HashMap<String, ()> = HashMap::new();
            for (line_no, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    config_err!("line {}: expected 'key = value', got '{line}'", line_no + 1);
                };
                let key = key.trim();
                let value = value.trim();
                if !KNOWN_KEYS.contains(&key) {
                    config_err!("line {}: unknown key '{key}'", line_no + 1);
                }
                if seen.insert(key.to_string(), ()).is_some() {
                    config_err!("line {}: duplicate key '{key}'", line_no + 1);
                }
                match key {
                    "problem.name" => config.problem_name = value.to_string(),
                    "problem.nagumo_c" => config.nagumo_c = Some(parse_f64(key, value)?),
                    "problem.amplitude" => config.amplitude = parse_f64(key, value)?,
                    "profile.kind" => config.profile_kind = value.to_string(),
                    "profile.p" => config.profile_p = parse_f64(key, value)?,
                    "profile.q" => {
                        config.profile_q = parse_f64(key, value)?;
                        profile_q_given = true;
                    }
                    "profile.horizon" => {
                        config.horizon = parse_f64(key, value)?;
                        horizon_given = true;
                    }
                    "basis.modes" => config.modes = parse_usize(key, value)?,
                    "basis.collocation" => config.collocation = parse_usize(key, value)?,
                    "grid.nodes" => config.grid_nodes = parse_usize(key, value)?,
                    "filter.k" => config.filter_k = parse_f64(key, value)?,
                    "truncation.rho" => config.truncation_rho = parse_f64(key, value)?,
                    "solver.tol" => config.solver_tol = parse_f64(key, value)?,
                    "solver.max_iterations" => config.solver_max_iterations = parse_usize(key, value)?,
                    "sweep.deltas" => config.sweep_deltas = parse_list(key, value)?,
                    "sweep.times" => {
                        config.sweep_times = parse_list(key, value)?;
                        sweep_times_given = true;
                    }
                    "sweep.replicates" => config.sweep_replicates = parse_usize(key, value)?,
                    "stability.delta" => config.stability_delta = parse_f64(key, value)?,
                    "stability.epsilons" => config.stability_epsilons = parse_list(key, value)?,
                    "stability.times" => {
                        config.stability_times = parse_list(key, value)?;
                        stability_times_given = true;
                    }
                    "stability.seeds" => config.stability_seeds = parse_usize(key, value)?,
                    "solve.delta" => config.solve_delta = parse_f64(key, value)?,
                    "illposed.delta" => config.illposed_delta = parse_f64(key, value)?,
                    "lemmas.deltas" => config.lemma_deltas = parse_list(key, value)?,
                    "lemmas.m_values" => config.lemma_m_values = parse_list(key, value)?,
                    "lemmas.k_values" => config.lemma_k_values = parse_list(key, value)?,
                    "lemmas.samples" => config.lemma_samples = parse_usize(key, value)?,
                    "lemmas.bound_scale" => config.lemma_bound_scale = parse_f64(key, value)?,
                    "output.dir" => config.output_dir = value.to_string(),
                    _ => unreachable!("key table mismatch"),
                }
            }
        }

        // Defaults that follow other keys.
        if config.profile_kind == "constant" && !profile_q_given {
            config.profile_q = config.profile_p;
        }
        if config.profile_kind == "affine" && !profile_q_given {
            config.profile_q = 1.5 * config.profile_p;
        }
        if horizon_given && !sweep_times_given {
            let t = config.horizon;
            config.sweep_times = vec![0.0, t / 4.0, t / 2.0, 3.0 * t / 4.0];
        }
        if horizon_given && !stability_times_given {
            config.stability_times = vec![0.0, config.horizon / 2.0];
        }

        config.validate()?;
        Ok(config)
    }

    /// Re-validate every referenced module invariant.
    fn validate(&self) -> Result<()> {
        let profile = self.profile()?;
        let basis = self.basis()?;
        self.grid()?;
        self.schedule()?;
        self.source_kind()?;
        if !self.amplitude.is_finite() || self.amplitude <= 0.0 {
            config_err!("problem.amplitude must be positive, got {}", self.amplitude);
        }
        let fixed = [self.stability_delta, self.solve_delta, self.illposed_delta];
        for &delta in self.sweep_deltas.iter().chain(&fixed) {
            FilterParams::new(delta, self.filter_k, &profile)
                .map_err(|e| ConfigError(e.to_string()))?;
        }
        for pair in self.sweep_deltas.windows(2) {
            if pair[1] >= pair[0] {
                config_err!(
                    "sweep.deltas must be strictly decreasing (duplicate or increasing entry {} after {})",
                    pair[1],
                    pair[0]
                );
            }
        }
        if self.lemma_deltas.is_empty() || self.lemma_m_values.is_empty() || self.lemma_k_values.is_empty() {
            config_err!("lemma sampling ranges must be nonempty");
        }
        if self.lemma_samples == 0 {
            config_err!("lemmas.samples must be positive");
        }
        for &t in self.sweep_times.iter().chain(&self.stability_times) {
            if !(0.0 <= t && t < self.horizon) {
                config_err!("evaluation time {t} outside [0,T)");
            }
        }
        if basis.modes() < 1 {
            config_err!("basis.modes must be positive");
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<DiffusionProfile> {
        let profile = match self.profile_kind.as_str() {
            "constant" => {
                if (self.profile_p - self.profile_q).abs() > 0.0 {
                    config_err!(
                        "constant profile requires p = q, got p = {}, q = {}",
                        self.profile_p,
                        self.profile_q
                    );
                }
                DiffusionProfile::constant(self.profile_p, self.horizon)
            }
            "affine" => DiffusionProfile::affine(self.profile_p, self.profile_q, self.horizon),
            other => config_err!("profile.kind must be 'constant' or 'affine', got '{other}'"),
        };
        profile.map_err(|e| ConfigError(e.to_string()).into())
    }

    pub fn basis(&self) -> Result<EigenBasis> {
        EigenBasis::new(self.modes, self.collocation).map_err(|e| ConfigError(e.to_string()).into())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.grid_nodes).map_err(|e| ConfigError(e.to_string()).into())
    }

    /// Check that every time in the list coincides with a grid node; the
    /// alignment depends on which command consumes the list, so it is
    /// enforced at use rather than at load.
    pub fn check_times_on_grid(&self, grid: &TimeGrid, times: &[f64], key: &str) -> Result<()> {
        for &t in times {
            grid.node_index(t).map_err(|e| ConfigError(format!("{key}: {e}")))?;
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<TruncationSchedule> {
        TruncationSchedule::new(self.truncation_rho).map_err(|e| ConfigError(e.to_string()).into())
    }

    pub fn source_kind(&self) -> Result<SourceKind> {
        SourceKind::parse(&self.problem_name, self.nagumo_c)
            .map_err(|e| ConfigError(e.to_string()).into())
    }

    pub fn problem(&self, basis: &EigenBasis) -> Result<ManufacturedProblem> {
        let profile = self.profile()?;
        single_mode_problem(&profile, self.source_kind()?, self.amplitude, basis)
            .map_err(|e| anyhow::anyhow!("building manufactured problem: {e}"))
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { picard_tol: self.solver_tol, max_iterations: self.solver_max_iterations }
    }

    pub fn sweep_plan(&self, seed_offset: u64) -> SweepPlan {
        SweepPlan {
            deltas: self.sweep_deltas.clone(),
            k: self.filter_k,
            evaluation_times: self.sweep_times.clone(),
            replicates: self.sweep_replicates,
            seed_offset,
        }
    }

    pub fn lemma_config(&self) -> LemmaSuiteConfig {
        LemmaSuiteConfig {
            deltas: self.lemma_deltas.clone(),
            m_values: self.lemma_m_values.clone(),
            k_values: self.lemma_k_values.clone(),
            samples_per_cell: self.lemma_samples,
            lemma3_tuples: self.lemma_samples,
            bound_scale: self.lemma_bound_scale,
            seed: 0,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => bail!(ConfigError(format!("key '{key}': expected a finite number, got '{value}'"))),
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| ConfigError(format!("key '{key}': expected a nonnegative integer, got '{value}'")).into())
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        bail!(ConfigError(format!("key '{key}': list must be nonempty")));
    }
    value.split(',').map(|item| parse_f64(key, item.trim())).collect()
}
