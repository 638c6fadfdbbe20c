//! Experiment configuration: schema, strict parsing, and pre-run validation.
//!
//! A config file (TOML, or JSON when the path ends in `.json`) fully
//! determines a run together with the master seed: every emitted number is a
//! function of `(config, seed)`. Unknown keys anywhere in the file are
//! rejected before any computation starts.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ltlab_core::process::ProcessClass;
use ltlab_core::{ProcessSpec, TimeGrid};

use crate::CliError;

/// The experiment families the runner knows, in stable id order. The id
/// seeds an independent random-stream family per experiment, so changing
/// the replica count of one experiment never shifts the draws of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Localtime,
    Moments,
    Scaling,
    Chung,
    Tails,
    Lnd,
    Charfn,
    Analytics,
    Berman,
    SdeConvergence,
}

impl Experiment {
    pub fn id(self) -> u32 {
        match self {
            Experiment::Simulate => 0,
            Experiment::Localtime => 1,
            Experiment::Moments => 2,
            Experiment::Scaling => 3,
            Experiment::Chung => 4,
            Experiment::Tails => 5,
            Experiment::Lnd => 6,
            Experiment::Charfn => 7,
            Experiment::Analytics => 8,
            Experiment::Berman => 9,
            Experiment::SdeConvergence => 10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Localtime => "localtime",
            Experiment::Moments => "moments",
            Experiment::Scaling => "scaling",
            Experiment::Chung => "chung",
            Experiment::Tails => "tails",
            Experiment::Lnd => "lnd",
            Experiment::Charfn => "charfn",
            Experiment::Analytics => "analytics",
            Experiment::Berman => "berman",
            Experiment::SdeConvergence => "sde-convergence",
        }
    }

    /// Experiments that estimate local times need the joint-density decay
    /// regime `alpha * d < 1`.
    pub fn needs_local_time_regime(self) -> bool {
        matches!(
            self,
            Experiment::Localtime
                | Experiment::Moments
                | Experiment::Scaling
                | Experiment::Chung
                | Experiment::Tails
        )
    }

    pub fn needs_process(self) -> bool {
        !matches!(self, Experiment::Analytics)
    }

    pub fn needs_grid(self) -> bool {
        !matches!(
            self,
            Experiment::Analytics | Experiment::Lnd | Experiment::SdeConvergence
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Uniform time grid settings; `t_start` defaults to 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.t_start, self.t_end, self.n_steps)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

/// Local-time estimator resolution knobs. Everything has a data-driven
/// default: bin width `2 step^alpha`, frequency cutoff just under
/// `step^{-alpha}` (capped at 512), frequency step from the spatial spread
/// of the path.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// cells per axis for a box centered at the evaluation point; omitted:
    /// the box covers the sampled path
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// spatial cell width
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    /// frequency truncation radius
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    /// frequency quadrature step (must be <= cutoff / 16)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_step: Option<f64>,
}

/// Experiment-specific knobs. Each experiment reads the subset it
/// understands; every field has a documented default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// spatial evaluation point (localtime, moments, tails)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    /// time window [a, b] (localtime, tails)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    /// moment orders (moments)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<u32>>,
    /// window lengths for the moment/lag fit (moments)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<f64>>,
    /// evaluate at x + X_a instead of x (moments, tails); default true
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifted: Option<bool>,
    /// window start for the moment scan (moments)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<f64>,
    /// window center (scaling)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    /// window centers (chung)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<f64>>,
    /// dyadic level range (n0, n1): radii 2^-n (scaling, chung)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<(u32, u32)>,
    /// cell width per level as a fraction of the window spread (scaling)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_bin_width: Option<f64>,
    /// threshold ladder in the scaled variable u (tails)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<Vec<f64>>,
    /// largest partition size probed (lnd)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    /// random probe count (lnd)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// time horizon (lnd, berman, sde-convergence); default: grid t_end
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// scalar frequencies, applied to every increment (charfn)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    /// increment partition times (charfn)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<f64>>,
    /// combinatorial table depth (analytics)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// sharpness probe location as a fraction of k (analytics)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// random (theta1, theta2, t) draws for the product identity (analytics)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_draws: Option<usize>,
    /// largest ordered-integral dimension checked (analytics)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplex_n: Option<usize>,
    /// Monte Carlo samples per ordered-integral check (analytics)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    /// largest n in the factorial-ratio sweep (analytics)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_n_max: Option<usize>,
    /// exponents for the factorial-ratio sweep (analytics)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_betas: Option<Vec<f64>>,
    /// innermost frequency-shell radius (berman)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_cutoff: Option<f64>,
    /// number of doubling frequency shells (berman)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_shells: Option<usize>,
    /// step counts of the refinement ladder (sde-convergence)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sde_levels: Option<Vec<usize>>,
    /// how many replicas are dumped to the path CSV (simulate)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emit_paths: Option<usize>,
}

/// One experiment run, fully specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    /// output directory; overridden by --out
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    /// Parses a config file, dispatching on the extension (`.json` is JSON,
    /// anything else TOML), and rejects keys outside the schema.
    pub fn load(path: &Path, raw: &str) -> Result<Self, CliError> {
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let (config, input_tree): (Self, serde_json::Value) = if is_json {
            let cfg = serde_json::from_str(raw)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let tree = serde_json::from_str(raw)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            (cfg, tree)
        } else {
            let cfg = toml::from_str(raw)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let tree: toml::Value = toml::from_str(raw)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let tree = serde_json::to_value(tree)
                .map_err(|e| CliError::Internal(format!("config reencode: {e}")))?;
            (cfg, tree)
        };
        // Sections with flattened enums (the process payload) cannot deny
        // unknown fields through serde alone; compare the input keys against
        // a round trip of the typed config instead.
        let round = serde_json::to_value(&config)
            .map_err(|e| CliError::Internal(format!("config reencode: {e}")))?;
        let mut unknown = Vec::new();
        collect_unknown_keys(&input_tree, &round, String::new(), &mut unknown);
        if !unknown.is_empty() {
            return Err(CliError::Config(format!(
                "unknown key(s) in {}: {}",
                path.display(),
                unknown.join(", ")
            )));
        }
        Ok(config)
    }

    /// Structural checks that need no sampling: required sections, parameter
    /// ranges, and the local-time regime for estimator experiments.
    pub fn validate(&self) -> Result<(), CliError> {
        let exp = self.experiment;
        if exp.needs_process() && self.process.is_none() {
            return Err(CliError::Config(format!(
                "experiment '{exp}' needs a [process] section"
            )));
        }
        if exp.needs_grid() && self.grid.is_none() {
            return Err(CliError::Config(format!(
                "experiment '{exp}' needs a [grid] section"
            )));
        }
        if let Some(spec) = &self.process {
            spec.validate()
                .map_err(|e| CliError::Config(format!("process: {e}")))?;
            if exp.needs_local_time_regime() {
                spec.check_local_time_regime()
                    .map_err(|e| CliError::Config(format!("process: {e}")))?;
            }
            match exp {
                Experiment::Lnd => {
                    if !matches!(
                        spec.class,
                        ProcessClass::Fbm { .. } | ProcessClass::GaussianQuasiHelix { .. }
                    ) {
                        return Err(CliError::Config(
                            "lnd probes exact Gaussian covariances; use an fbm or \
                             gaussian-quasi-helix process"
                                .into(),
                        ));
                    }
                }
                Experiment::Charfn | Experiment::Berman => {
                    if matches!(spec.class, ProcessClass::FbmSde { .. }) {
                        return Err(CliError::Config(format!(
                            "'{exp}' needs a closed-form characteristic function; \
                             driven equations have none"
                        )));
                    }
                }
                Experiment::SdeConvergence => {
                    if !matches!(spec.class, ProcessClass::FbmSde { .. }) {
                        return Err(CliError::Config(
                            "sde-convergence needs an fbm-sde process".into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        if let Some(g) = &self.grid {
            g.build()?;
        }
        if let Some(est) = &self.estimator {
            for (name, v) in [
                ("bin_width", est.bin_width),
                ("cutoff", est.cutoff),
                ("freq_step", est.freq_step),
            ] {
                if let Some(v) = v {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(CliError::Config(format!(
                            "estimator.{name} must be positive and finite, got {v}"
                        )));
                    }
                }
            }
            if est.bins == Some(0) {
                return Err(CliError::Config("estimator.bins must be positive".into()));
            }
        }
        if self.replicas == Some(0) {
            return Err(CliError::Config("replicas must be positive".into()));
        }
        if let Some((a, b)) = self.params.window {
            if !(b > a) {
                return Err(CliError::Config(format!(
                    "params.window [{a}, {b}] must have positive length"
                )));
            }
        }
        if let Some(u) = &self.params.u_grid {
            if u.windows(2).any(|w| w[1] <= w[0]) || u.first().is_some_and(|&u0| u0 < 0.0) {
                return Err(CliError::Config(
                    "params.u_grid must be nonnegative and strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// The canonical form hashed into every report: the effective seed and
    /// all numeric settings, with the output location (which cannot affect
    /// any number) removed.
    pub fn canonical_json(&self) -> Result<String, CliError> {
        let mut stripped = self.clone();
        stripped.output = None;
        serde_json::to_string(&stripped)
            .map_err(|e| CliError::Internal(format!("config hash: {e}")))
    }
}

/// Records every key path present in `input` but absent from the round trip
/// of the parsed config (maps only; arrays are schema leaves here).
fn collect_unknown_keys(
    input: &serde_json::Value,
    round: &serde_json::Value,
    path: String,
    out: &mut Vec<String>,
) {
    let (serde_json::Value::Object(inp), serde_json::Value::Object(rnd)) = (input, round) else {
        return;
    };
    for (key, sub) in inp {
        let sub_path = if path.is_empty() {
            key.clone()
        } else {
            format!("{path}.{key}")
        };
        match rnd.get(key) {
            None => out.push(sub_path),
            Some(r) => collect_unknown_keys(sub, r, sub_path, out),
        }
    }
}
