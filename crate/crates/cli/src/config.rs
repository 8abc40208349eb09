//! Run configuration files.

use std::path::{Path, PathBuf};

use cim_core::ising::{self, IsingProblem, LevelSet};
use cim_core::UserParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where the Ising problem comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    /// Problem JSON file, relative to the config file.
    Path(PathBuf),
    /// Freshly generated SK1 instance.
    Sk1 { sk1: Sk1Spec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sk1Spec {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrid {
    pub alpha_fb: Vec<f64>,
    pub pump_r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub sizes: Vec<usize>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Trajectory cap per instance.
    #[serde(default = "default_max_traj")]
    pub max_traj: usize,
    /// Roundtrips per trajectory; `50·t_decay` when absent.
    #[serde(default)]
    pub t_sim: Option<u64>,
}

fn default_instances() -> usize {
    50
}

fn default_max_traj() -> usize {
    1_000_000
}

fn default_levels() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "UserParams::fig4")]
    pub params: UserParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSource>,
    /// Level-set file with the target configurations; computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<PathBuf>,
    /// Energy levels targeted when the oracle runs.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    /// Roundtrips per trajectory; `100·t_decay` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_sim: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emit_trajectory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSpec>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

/// Parses JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{what}: at `{path}`: {}", e.inner()))
    })
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = parse_json(&read(path)?, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn n_traj(&self) -> usize {
        self.n_traj.unwrap_or(1000)
    }

    pub fn t_sim(&self) -> u64 {
        self.t_sim.unwrap_or_else(|| (100.0 * self.params.t_decay).round().max(1.0) as u64)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        if self.n_traj() == 0 || self.t_sim() == 0 {
            return Err(CliError::Config("n_traj and t_sim must be positive".into()));
        }
        if self.levels == 0 {
            return Err(CliError::Config("levels must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        Ok(())
    }

    pub fn load_problem(&self) -> Result<IsingProblem, CliError> {
        match &self.problem {
            None => Err(CliError::Config("no problem given (use --problem or the `problem` key)".into())),
            Some(ProblemSource::Path(p)) => {
                let path = self.resolve(p);
                IsingProblem::from_json(&read(&path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
            Some(ProblemSource::Sk1 { sk1 }) => Ok(ising::generate_sk1(sk1.n, sk1.seed)?),
        }
    }

    /// Target level set from `targets`, else from the oracle suited to the size.
    pub fn load_targets(&self, problem: &IsingProblem) -> Result<LevelSet, CliError> {
        match &self.targets {
            Some(p) => {
                let path = self.resolve(p);
                let set = LevelSet::from_json(&read(&path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                set.verify(problem).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Ok(set)
            }
            None if problem.n() <= ising::MAX_BRUTE_FORCE_N => Ok(ising::enumerate_brute_force(problem, self.levels)?),
            None => {
                let opts = ising::TemperingOptions { seed: self.seed, ..Default::default() };
                Ok(ising::enumerate_parallel_tempering(problem, self.levels, &opts)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let c = RunConfig::default();
        assert_eq!(c.params, UserParams::fig4());
        assert_eq!((c.n_traj(), c.t_sim(), c.levels), (1000, 400, 2));
        let err = parse_json::<RunConfig>(r#"{"n_trajs": 3}"#, "cfg").unwrap_err();
        assert!(err.to_string().contains("n_trajs"));
    }

    #[test]
    fn mode_error_names_field() {
        let err = parse_json::<RunConfig>(r#"{"params": {"t_decay": 4, "eta_esc": 0.2, "pump_r": 0.8, "n_sat": 200, "alpha_fb": 5, "mode": "quantum"}}"#, "cfg")
            .unwrap_err();
        assert!(err.to_string().contains("params.mode"), "{err}");
    }

    #[test]
    fn problem_sources() {
        let c: RunConfig = parse_json(r#"{"problem": {"sk1": {"n": 5, "seed": 2}}}"#, "cfg").unwrap();
        assert_eq!(c.load_problem().unwrap().n(), 5);
        let c: RunConfig = parse_json(r#"{"problem": "p.json"}"#, "cfg").unwrap();
        assert_eq!(c.problem, Some(ProblemSource::Path("p.json".into())));
    }
}
