//! Experiment configuration (TOML).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Spectrum,
    Rpf,
    Cones,
    Clt,
    LyCheck,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Spectrum => "spectrum",
            Pipeline::Rpf => "rpf",
            Pipeline::Cones => "cones",
            Pipeline::Clt => "clt",
            Pipeline::LyCheck => "ly-check",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pipeline: Option<Pipeline>,
    pub system: Option<SystemBlock>,
    #[serde(default)]
    pub discretization: DiscretizationBlock,
    #[serde(default)]
    pub twist: TwistBlock,
    pub cone: Option<ConeBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub statistics: StatisticsBlock,
    #[serde(default)]
    pub lasota_yorke: LyBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    Gauss,
    Doubling,
    Interval,
    Shift,
    Tower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "yes")]
    pub increasing: bool,
}

fn yes() -> bool {
    true
}

/// Symbol weights of a full shift: `probabilities` for finitely many
/// symbols, or a geometric/power law on infinitely many.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum WeightLaw {
    Geometric { scale: f64, ratio: f64 },
    Power { scale: f64, exponent: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub kind: Option<StageKind>,
    /// Interval maps.
    pub branches: Option<Vec<BranchSpec>>,
    /// Finite shifts.
    pub probabilities: Option<Vec<f64>>,
    pub weights: Option<WeightLaw>,
    /// Towers: `m₀{R > n} = θⁿ` up to `r_max`.
    pub r_max: Option<usize>,
    pub theta: Option<f64>,
    pub beta: Option<f64>,
    pub k_depth: Option<usize>,
    /// Base transition of a Markov tower (rows sum to 1).
    pub transition: Option<Vec<Vec<f64>>>,
}

/// A single stage inline, or a periodic window in `stages`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemBlock {
    pub kind: Option<StageKind>,
    pub branches: Option<Vec<BranchSpec>>,
    pub probabilities: Option<Vec<f64>>,
    pub weights: Option<WeightLaw>,
    pub r_max: Option<usize>,
    pub theta: Option<f64>,
    pub beta: Option<f64>,
    pub k_depth: Option<usize>,
    pub transition: Option<Vec<Vec<f64>>>,
    pub stages: Option<Vec<StageSpec>>,
}

impl SystemBlock {
    pub fn stage_specs(&self) -> Result<Vec<StageSpec>, RunError> {
        match (&self.stages, self.kind) {
            (Some(_), Some(_)) => Err(RunError::validation("system: give either kind or stages, not both")),
            (Some(s), None) if s.is_empty() => Err(RunError::validation("system.stages is empty")),
            (Some(s), None) => Ok(s.clone()),
            (None, Some(kind)) => Ok(vec![StageSpec {
                kind: Some(kind),
                branches: self.branches.clone(),
                probabilities: self.probabilities.clone(),
                weights: self.weights.clone(),
                r_max: self.r_max,
                theta: self.theta,
                beta: self.beta,
                k_depth: self.k_depth,
                transition: self.transition.clone(),
            }]),
            (None, None) => Err(RunError::validation("system block needs kind or stages")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKindSpec {
    Chebyshev,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscretizationBlock {
    pub grid: GridKindSpec,
    pub nodes: usize,
    /// Branch truncation `N` for countable-branch stages.
    pub truncation: usize,
    pub tail_budget: f64,
    /// Word length of cylinder grids.
    pub depth: usize,
}

impl Default for DiscretizationBlock {
    fn default() -> Self {
        DiscretizationBlock { grid: GridKindSpec::Chebyshev, nodes: 64, truncation: 10_000, tail_budget: 1e-2, depth: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Constant { value: f64 },
    Polynomial { coeffs: Vec<f64> },
    Log { coeff: f64 },
    Symbol { values: Vec<f64> },
    Level { values: Vec<f64> },
}

impl PotentialSpec {
    pub fn to_potential(&self) -> seqrpf_core::transfer::Potential {
        use seqrpf_core::transfer::Potential;
        match self {
            PotentialSpec::Constant { value } => Potential::Constant(*value),
            PotentialSpec::Polynomial { coeffs } => Potential::Polynomial(coeffs.clone()),
            PotentialSpec::Log { coeff } => Potential::Log { coeff: *coeff },
            PotentialSpec::Symbol { values } => Potential::Symbol(values.clone()),
            PotentialSpec::Level { values } => Potential::Level(values.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwistBlock {
    /// Potential shared by all stages.
    pub u: Option<PotentialSpec>,
    /// One potential per stage.
    pub potentials: Option<Vec<PotentialSpec>>,
    /// Explicit `z` values as `[re, im]`.
    pub z: Vec<[f64; 2]>,
    /// Circle radius and point count for pressure sampling.
    pub rho: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeKind {
    Tower,
    LogHolder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub kind: ConeKind,
    // tower cone
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub eps0: Option<f64>,
    pub samples: Option<usize>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub doublings: Option<usize>,
    // log-Hölder cone
    pub s: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub xi: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Periodic,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverBlock {
    pub tol: f64,
    pub max_iters: usize,
    pub boundary: BoundaryKind,
    pub warmup: Option<usize>,
    pub lambda_floor: f64,
    /// Validated radius; larger `|z|` are flagged in reports.
    pub radius: Option<f64>,
    /// Steps for convergence_rate.
    pub n_max: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock { tol: 1e-13, max_iters: 2000, boundary: BoundaryKind::Periodic, warmup: None, lambda_floor: 1e-8, radius: None, n_max: 25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialLaw {
    Stationary,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatisticsBlock {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub initial: InitialLaw,
    pub rho: f64,
    pub points: usize,
}

impl Default for StatisticsBlock {
    fn default() -> Self {
        StatisticsBlock { n: 1000, trials: 10_000, seed: 0, initial: InitialLaw::Stationary, rho: 0.4, points: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyBlock {
    pub samples: usize,
    pub z_max: f64,
    pub n_max: usize,
    pub q: f64,
    pub alpha: f64,
}

impl Default for LyBlock {
    fn default() -> Self {
        LyBlock { samples: 50, z_max: 1.0, n_max: 8, q: 7.2, alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    /// Write one CSV row per Monte Carlo trial.
    pub trials_csv: bool,
}

/// Parses TOML text, collecting every key the schema does not know.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, RunError> {
    let de = toml::Deserializer::parse(text).map_err(|e| RunError::validation(format!("config does not parse: {e}")))?;
    let mut unknown = Vec::new();
    let cfg: ExperimentConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string().replace(".?", "").replace("?.", "")))
        .map_err(|e| RunError::validation(format!("invalid config: {e}")))?;
    if !unknown.is_empty() {
        return Err(RunError::validation(format!("unknown keys: {}", unknown.join(", "))));
    }
    Ok(cfg)
}

/// Canonical hash of a config: SHA-256 of its re-serialized TOML.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    use sha2::{Digest, Sha256};
    let canonical = toml::to_string(cfg).unwrap_or_default();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = parse_config("[system]\nkind = \"gauss\"\nflavour = 1\n[solver]\ntoll = 1e-9\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("system.flavour") && msg.contains("solver.toll"), "{msg}");
    }

    #[test]
    fn defaults_and_single_stage() {
        let cfg = parse_config("[system]\nkind = \"gauss\"\n").unwrap();
        assert_eq!(cfg.discretization.nodes, 64);
        assert_eq!(cfg.system.unwrap().stage_specs().unwrap().len(), 1);
    }

    #[test]
    fn hash_is_stable() {
        let a = parse_config("[system]\nkind = \"doubling\"\n").unwrap();
        let b = parse_config("[system]\n  kind = 'doubling'   # same\n").unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
    }
}
