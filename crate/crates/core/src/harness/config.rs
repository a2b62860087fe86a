//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algos::{ProblemInstance, ScheduleConfig};
use crate::error::{Error, Result};
use crate::params::{Algorithm, ParamConfig};
use crate::priors::{discretize_truncated_gaussian, ArmPrior};

/// How the arms of an instance are given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSpec {
    /// Explicit arms, sorted by prior mean (highest first).
    Arms { arms: Vec<ArmPrior> },
    /// A JSON or TOML document holding an `arms` list, relative to the config file.
    File { path: PathBuf },
    /// `k` copies of one prior.
    Iid { prior: ArmPrior, k: usize },
    /// `k` arms cycling through `priors`, then sorted.
    Cycle { priors: Vec<ArmPrior>, k: usize },
    /// `Beta(m, 1)` and `Beta(1, m)`.
    BetaPair { m: f64 },
    /// One `last` arm and `k - 1` copies of `common`, sorted.
    Hard {
        common: ArmPrior,
        last: ArmPrior,
        k: usize,
    },
    /// Discretized truncated Gaussians with means `nus` and a shared `sigma`.
    Gaussian {
        nus: Vec<f64>,
        sigma: f64,
        grid: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ArmsDoc {
    arms: Vec<ArmPrior>,
}

impl InstanceSpec {
    pub fn build(&self, base: &Path) -> Result<ProblemInstance> {
        match self {
            InstanceSpec::Arms { arms } => ProblemInstance::new(arms.clone()),
            InstanceSpec::File { path } => {
                let path = base.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let doc = parse_arms(&path, &text)?;
                ProblemInstance::new(doc)
            }
            InstanceSpec::Iid { prior, k } => ProblemInstance::iid(prior.clone(), *k),
            InstanceSpec::Cycle { priors, k } => {
                if priors.is_empty() {
                    return Err(Error::Config("cycle needs at least one prior".into()));
                }
                ProblemInstance::sorted((0..*k).map(|i| priors[i % priors.len()].clone()).collect())
            }
            InstanceSpec::BetaPair { m } => {
                ProblemInstance::new(vec![ArmPrior::beta(*m, 1.0)?, ArmPrior::beta(1.0, *m)?])
            }
            InstanceSpec::Hard { common, last, k } => {
                if *k < 2 {
                    return Err(Error::Config("hard construction needs k >= 2".into()));
                }
                let mut arms = vec![common.clone(); k - 1];
                arms.push(last.clone());
                ProblemInstance::sorted(arms)
            }
            InstanceSpec::Gaussian { nus, sigma, grid } => ProblemInstance::sorted(
                nus.iter()
                    .map(|&nu| discretize_truncated_gaussian(nu, *sigma, *grid))
                    .collect::<Result<_>>()?,
            ),
        }
    }

    /// Priors of the collection the instance is drawn from.
    pub fn collection(&self, base: &Path) -> Result<Vec<ArmPrior>> {
        match self {
            InstanceSpec::Cycle { priors, .. } => Ok(priors.clone()),
            InstanceSpec::Iid { prior, .. } => Ok(vec![prior.clone()]),
            InstanceSpec::Hard { common, last, .. } => Ok(vec![common.clone(), last.clone()]),
            _ => Ok(self.build(base)?.arms().to_vec()),
        }
    }
}

fn parse_arms(path: &Path, text: &str) -> Result<Vec<ArmPrior>> {
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let doc: ArmsDoc = if is_toml {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    Ok(doc.arms)
}

/// Read an instance document: either a bare `arms` list or an [`InstanceSpec`].
pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let Ok(arms) = parse_arms(path, &text) {
        return ProblemInstance::new(arms);
    }
    let spec: InstanceSpec = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    spec.build(base)
}

/// What runs against the instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    #[default]
    Alg1,
    Alg2,
    Alg3,
    /// Thompson sampling from the first round.
    Thompson,
    /// `n` pulls per arm in turn, then Thompson sampling.
    RoundRobin,
}

impl AlgorithmSpec {
    pub fn scheduled(&self) -> Option<Algorithm> {
        match self {
            AlgorithmSpec::Alg1 => Some(Algorithm::Alg1),
            AlgorithmSpec::Alg2 => Some(Algorithm::Alg2),
            AlgorithmSpec::Alg3 => Some(Algorithm::Alg3),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub master: u64,
    /// Simulated runs.
    pub replicas: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            master: 0,
            replicas: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMethod {
    /// Exact enumeration, falling back to Monte Carlo when it is too large.
    #[default]
    Auto,
    Exact,
    Mc,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditSpec {
    pub method: AuditMethod,
    /// Monte Carlo replicas.
    pub replicas: u64,
    pub floor: f64,
    /// Monte Carlo margins pass at `-z` standard errors.
    pub z: f64,
    /// State cap of the exact engine.
    pub cap: usize,
}

impl Default for AuditSpec {
    fn default() -> Self {
        AuditSpec {
            method: AuditMethod::Auto,
            replicas: 10_000,
            floor: crate::audit::MARGIN_FLOOR,
            z: 3.0,
            cap: 10_000_000,
        }
    }
}

/// One experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    #[serde(default)]
    pub algorithm: AlgorithmSpec,
    /// Samples per arm; raised to the algorithm's floor when smaller.
    #[serde(default)]
    pub n: Option<usize>,
    /// Total rounds; Thompson sampling fills the rounds after the schedule.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub constants: ParamConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub audit: AuditSpec,
    /// Traces written to disk (the first runs).
    #[serde(default = "default_trace_limit")]
    pub trace_limit: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_trace_limit() -> usize {
    100
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSpec, algorithm: AlgorithmSpec) -> Self {
        ExperimentConfig {
            instance,
            algorithm,
            n: None,
            horizon: None,
            seeds: Seeds::default(),
            constants: ParamConfig::default(),
            schedule: ScheduleConfig::default(),
            audit: AuditSpec::default(),
            trace_limit: default_trace_limit(),
            out: None,
            base_dir: PathBuf::from("."),
        }
    }

    /// Parse a TOML (or `.json`) config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.replicas == 0 {
            return Err(Error::Config("seeds.replicas must be at least 1".into()));
        }
        let c = &self.constants;
        for (name, v) in [("c_ts", c.c_ts), ("c_pad", c.c_pad)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if c.lambda.is_some_and(|l| !(l > 0.0)) {
            return Err(Error::Config("lambda override must be positive".into()));
        }
        if c.grid < 2 || c.n_cap == 0 || c.iters == 0 {
            return Err(Error::Config(
                "grid >= 2, n_cap >= 1 and iters >= 1 are required".into(),
            ));
        }
        if self.audit.cap == 0 || !(self.audit.z > 0.0) {
            return Err(Error::Config(
                "audit.cap and audit.z must be positive".into(),
            ));
        }
        if matches!(self.audit.method, AuditMethod::Mc | AuditMethod::Auto)
            && self.audit.replicas < 100
        {
            return Err(Error::Config("audit.replicas must be at least 100".into()));
        }
        if let InstanceSpec::File { path } = &self.instance {
            let p = self.base_dir.join(path);
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "instance file {} does not exist",
                    p.display()
                )));
            }
        }
        if self.algorithm == AlgorithmSpec::Thompson && self.horizon.is_none() {
            return Err(Error::Config("thompson needs a horizon".into()));
        }
        Ok(())
    }

    pub fn build_instance(&self) -> Result<ProblemInstance> {
        self.instance.build(&self.base_dir)
    }
}
