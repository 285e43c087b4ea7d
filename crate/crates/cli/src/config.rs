use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qgate_core::algebra::UnitaryMatrix;
use qgate_core::model::{self, ControlSystem, ProblemSpec, PulseBasis};
use qgate_core::objective::TargetSpec;
use qgate_core::solver;

use crate::error::{CliError, Result};
use crate::matrix_io::read_matrix;

/// An experiment: problem, target, solver settings and output location.
/// Relative matrix paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    IsingQft,
    HeisenbergT,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisChoice {
    PiecewiseConstant,
    Hermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub preset: Preset,
    /// Chain length for the spin-chain presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    pub basis: BasisChoice,
    pub k: usize,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub control_files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Qft,
    Identity,
    File,
    Reachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: TargetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Reachable targets: seed and integrated-power norm of the smooth
    /// generating pulse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    /// If set, the target is `W ⊗ I` with an environment of this dimension
    /// and `W` is the gate named by `kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Newton,
    Bfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    Auto,
}

/// `initial_norm = "auto"` or a fixed positive norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialNorm {
    Fixed(f64),
    Mode(NormMode),
}

impl Default for InitialNorm {
    fn default() -> Self {
        InitialNorm::Mode(NormMode::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluence_bound: Option<f64>,
    pub initial_norm: InitialNorm,
    pub norm_grid_size: usize,
    pub samples_per_norm: usize,
    /// Seed of the pulse directions used by the initial-norm search.
    pub search_seed: u64,
    pub seeds: Vec<u64>,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Newton,
            tolerance: model::DEFAULT_TOLERANCE,
            fluence_bound: None,
            initial_norm: InitialNorm::default(),
            norm_grid_size: 12,
            samples_per_norm: 3,
            search_seed: 0,
            seeds: vec![1],
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub spectrum: bool,
    /// Time samples per spectrum; `8K` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_samples: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("qgate-out"),
            spectrum: false,
            spectrum_samples: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file and resolves its relative matrix paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.problem.drift_file.as_mut() {
            fix(p);
        }
        self.problem.control_files.iter_mut().for_each(fix);
        if let Some(p) = self.target.file.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.k == 0 {
            return Err(CliError::config("problem.k must be positive"));
        }
        if !(p.duration > 0.0 && p.duration.is_finite()) {
            return Err(CliError::config("problem.duration must be positive"));
        }
        match p.preset {
            Preset::IsingQft | Preset::HeisenbergT => {
                if p.qubits == Some(0) {
                    return Err(CliError::config("problem.qubits must be positive"));
                }
            }
            Preset::Custom => {
                if p.drift_file.is_none() || p.control_files.is_empty() {
                    return Err(CliError::config(
                        "custom problems need drift_file and at least one control file",
                    ));
                }
            }
        }
        let t = &self.target;
        match t.kind {
            TargetKind::File if t.file.is_none() => {
                return Err(CliError::config("target.kind = \"file\" needs target.file"));
            }
            TargetKind::Reachable => {
                if t.env_dim.is_some() {
                    return Err(CliError::config(
                        "reachable targets cannot be subsystem targets",
                    ));
                }
                match t.norm {
                    Some(n) if n >= 0.0 && n.is_finite() => {}
                    _ => return Err(CliError::config("reachable targets need target.norm ≥ 0")),
                }
            }
            _ => {}
        }
        let s = &self.solver;
        if !(s.tolerance > 0.0) {
            return Err(CliError::config("solver.tolerance must be positive"));
        }
        if let Some(b) = s.fluence_bound {
            if !(b > 0.0) {
                return Err(CliError::config("solver.fluence_bound must be positive"));
            }
        }
        if let InitialNorm::Fixed(rho) = s.initial_norm {
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(CliError::config(
                    "solver.initial_norm must be \"auto\" or ≥ 0",
                ));
            }
        }
        if s.norm_grid_size == 0 || s.samples_per_norm == 0 {
            return Err(CliError::config(
                "solver.norm_grid_size and solver.samples_per_norm must be positive",
            ));
        }
        if s.seeds.is_empty() {
            return Err(CliError::config("solver.seeds must not be empty"));
        }
        if s.max_iter == 0 {
            return Err(CliError::config("solver.max_iter must be positive"));
        }
        if self.output.spectrum_samples.is_some_and(|n| n < 2) {
            return Err(CliError::config(
                "output.spectrum_samples must be at least 2",
            ));
        }
        Ok(())
    }

    fn system(&self) -> Result<ControlSystem> {
        let p = &self.problem;
        let system = match p.preset {
            Preset::IsingQft => {
                model::ising_chain_system(p.qubits.unwrap_or(model::ISING_QFT_QUBITS))?
            }
            Preset::HeisenbergT => {
                model::heisenberg_chain_system(p.qubits.unwrap_or(model::HEISENBERG_QUBITS))?
            }
            Preset::Custom => {
                let drift = read_matrix(p.drift_file.as_ref().expect("validated"))?;
                let controls = p
                    .control_files
                    .iter()
                    .map(|f| read_matrix(f))
                    .collect::<Result<Vec<_>>>()?;
                ControlSystem::new(drift, controls)?
            }
        };
        Ok(system)
    }

    fn basis(&self) -> Result<PulseBasis> {
        let p = &self.problem;
        Ok(match p.basis {
            BasisChoice::PiecewiseConstant => PulseBasis::piecewise_constant(p.k, p.duration)?,
            BasisChoice::Hermite => PulseBasis::hermite(p.k, p.duration)?,
        })
    }

    fn target_spec(&self, system: &ControlSystem, basis: &PulseBasis) -> Result<TargetSpec> {
        let t = &self.target;
        let n = system.dim();
        let gate_dim = match t.env_dim {
            Some(env) if env == 0 || !n.is_multiple_of(env) => {
                return Err(CliError::config(format!(
                    "target.env_dim = {env} does not divide N = {n}"
                )));
            }
            Some(env) => n / env,
            None => n,
        };
        let gate = match t.kind {
            TargetKind::Qft => model::qft(gate_dim),
            TargetKind::Identity => UnitaryMatrix::identity(gate_dim),
            TargetKind::File => {
                UnitaryMatrix::new(read_matrix(t.file.as_ref().expect("validated"))?)?
            }
            TargetKind::Reachable => solver::reachable_target(
                system,
                basis,
                t.norm.expect("validated"),
                t.seed.unwrap_or(0),
            )?,
        };
        Ok(match t.env_dim {
            Some(env) => TargetSpec::subsystem(gate, env)?,
            None => TargetSpec::full(gate),
        })
    }

    /// Builds the control problem this config describes.
    pub fn build_problem(&self) -> Result<ProblemSpec> {
        let system = self.system()?;
        let basis = self.basis()?;
        let target = self.target_spec(&system, &basis)?;
        let name = match self.problem.preset {
            Preset::IsingQft => "ising-qft",
            Preset::HeisenbergT => "heisenberg-t",
            Preset::Custom => "custom",
        };
        Ok(ProblemSpec::new(
            name,
            system,
            basis,
            target,
            self.solver.tolerance,
            self.solver.fluence_bound,
        )?)
    }
}
