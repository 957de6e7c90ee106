use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::netgen::Activation;
use crate::otloss::Solver;
use crate::priors::PriorFamily;
use crate::qcore::QubitLayout;
use crate::{Error, Result};

/// Desk-scale and paper-scale epoch budgets.
pub const DESK_EPOCHS: usize = 500;
pub const PAPER_EPOCHS: usize = 2000;

/// One training experiment, as read from a TOML file. Every field except the
/// layout has a default; [`ExperimentConfig::resolve`] makes them explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scale: RunScale,
    #[serde(default)]
    pub task: TaskConfig,
    pub layout: LayoutConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunScale {
    #[default]
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    #[default]
    Multicluster,
    EnsembleFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Total synthetic states, split evenly between train and test.
    pub count: usize,
    /// Standard deviation of the cluster perturbation angles.
    pub noise: f64,
    pub path: Option<PathBuf>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            kind: TaskKind::Multicluster,
            count: 256,
            noise: crate::data::DEFAULT_SCALE,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorFamily {
    #[default]
    Lpqc,
    NoLatent,
    Rd,
    Lmlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub family: GeneratorFamily,
    pub experts: usize,
    pub hidden: usize,
    pub depth: usize,
    pub activation: Activation,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            family: GeneratorFamily::Lpqc,
            experts: 1,
            hidden: 32,
            depth: 2,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub family: PriorFamily,
    pub modes: usize,
    pub dim: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            family: PriorFamily::Gaussian,
            modes: 1,
            dim: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub batch: usize,
    /// Unset means the budget of the chosen [`RunScale`].
    pub epochs: Option<usize>,
    pub lambda: f64,
    pub solver: SolverKind,
    pub sinkhorn_epsilon: f64,
    pub sinkhorn_max_iters: usize,
    pub sinkhorn_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 1e-3,
            batch: 128,
            epochs: None,
            lambda: 0.01,
            solver: SolverKind::Exact,
            sinkhorn_epsilon: 0.01,
            sinkhorn_max_iters: 2000,
            sinkhorn_tol: 1e-9,
        }
    }
}

impl OptimizerConfig {
    pub fn solver(&self) -> Solver {
        match self.solver {
            SolverKind::Exact => Solver::Exact,
            SolverKind::Sinkhorn => Solver::Sinkhorn {
                epsilon: self.sinkhorn_epsilon,
                max_iters: self.sinkhorn_max_iters,
                tol: self.sinkhorn_tol,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub data: u64,
    pub model: u64,
    pub train: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            data: 0,
            model: 1,
            train: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Test loss is logged every `log_stride` epochs and after the last one.
    pub log_stride: usize,
    /// Extra checkpoints every this many epochs; 0 keeps only the final one.
    pub checkpoint_every: usize,
    /// Generated samples per test evaluation; unset means the test-set size.
    pub eval_samples: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs/default"),
            log_stride: 1,
            checkpoint_every: 0,
            eval_samples: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML. Syntax and type errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, resolves relative paths against the file's directory, fills
    /// defaults and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.task.path {
            if p.is_relative() {
                cfg.task.path = Some(base.join(p));
            }
        }
        cfg.resolve()
    }

    /// Makes every default explicit and validates.
    pub fn resolve(mut self) -> Result<Self> {
        if self.optimizer.epochs.is_none() {
            self.optimizer.epochs = Some(match self.scale {
                RunScale::Desk => DESK_EPOCHS,
                RunScale::Paper => PAPER_EPOCHS,
            });
        }
        self.validate()?;
        Ok(self)
    }

    pub fn epochs(&self) -> usize {
        self.optimizer.epochs.unwrap_or(match self.scale {
            RunScale::Desk => DESK_EPOCHS,
            RunScale::Paper => PAPER_EPOCHS,
        })
    }

    pub fn qubit_layout(&self) -> Result<QubitLayout> {
        QubitLayout::new(self.layout.n, self.layout.m, self.layout.layers)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.layout.n == 0 {
            return bad("layout.n", "at least one data qubit is required".into());
        }
        self.qubit_layout()?;
        let o = &self.optimizer;
        if !(o.lambda >= 0.0) || !o.lambda.is_finite() {
            return bad(
                "optimizer.lambda",
                format!("must be a non-negative number, got {}", o.lambda),
            );
        }
        if !(o.lr > 0.0) || !o.lr.is_finite() {
            return bad("optimizer.lr", format!("must be positive, got {}", o.lr));
        }
        if o.batch == 0 {
            return bad("optimizer.batch", "must be positive".into());
        }
        if o.solver == SolverKind::Sinkhorn && !(o.sinkhorn_epsilon > 0.0) {
            return bad("optimizer.sinkhorn_epsilon", "must be positive".into());
        }
        let g = &self.generator;
        if g.experts == 0 {
            return bad("generator.experts", "must be positive".into());
        }
        if g.family == GeneratorFamily::Rd && self.layout.layers % 2 != 0 {
            return bad("layout.layers", "the rd baseline needs an even layer count".into());
        }
        if self.prior.dim == 0 {
            return bad("prior.dim", "must be positive".into());
        }
        if self.prior.modes == 0 {
            return bad("prior.modes", "must be positive".into());
        }
        if self.output.log_stride == 0 {
            return bad("output.log_stride", "must be positive".into());
        }
        if self.output.eval_samples == Some(0) {
            return bad("output.eval_samples", "must be positive".into());
        }
        match self.task.kind {
            TaskKind::Multicluster => {
                if self.task.count < 4 || self.task.count % 4 != 0 {
                    return bad(
                        "task.count",
                        format!("must be a positive multiple of 4, got {}", self.task.count),
                    );
                }
                if !(self.task.noise >= 0.0) {
                    return bad("task.noise", "must be non-negative".into());
                }
            }
            TaskKind::EnsembleFile => match &self.task.path {
                None => return bad("task.path", "required for the ensemble-file task".into()),
                Some(p) if !p.is_file() => return bad("task.path", format!("{} does not exist", p.display())),
                Some(_) => {}
            },
        }
        Ok(())
    }

    /// Resolved config as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[layout]\nn = 2\nlayers = 3\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(cfg.optimizer.epochs, Some(DESK_EPOCHS));
        assert_eq!(cfg.optimizer.batch, 128);
        assert_eq!(cfg.optimizer.lr, 1e-3);
        assert_eq!(cfg.optimizer.lambda, 0.01);
        assert_eq!(cfg.prior.dim, 4);
        assert_eq!(cfg.generator.hidden, 32);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn paper_scale_epochs() {
        let cfg = ExperimentConfig::from_toml_str("scale = \"paper\"\n[layout]\nn = 2\nlayers = 1\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(cfg.epochs(), PAPER_EPOCHS);
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let e = ExperimentConfig::from_toml_str("[layout]\nn = 2\nlayers = \"x\"\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = ExperimentConfig::from_toml_str("[layout]\nn = 2\nlayers = 1\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = ExperimentConfig::from_toml_str("[layout]\nn = 2\nlayers = 1\n[optimizer]\nlambda = -1.0\n")
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(e.to_string().contains("optimizer.lambda"), "{e}");
        let e = ExperimentConfig::from_toml_str(
            "[layout]\nn = 2\nlayers = 1\n[task]\nkind = \"ensemble-file\"\npath = \"/nonexistent/x\"\n",
        )
        .unwrap()
        .resolve()
        .unwrap_err();
        assert!(e.to_string().contains("task.path"), "{e}");
    }
}
