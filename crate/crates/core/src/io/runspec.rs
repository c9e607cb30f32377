//! Run specification from `key=value` config files and overrides.
//!
//! Keys use the long flag names of the command-line tool (`threads`,
//! `epochs`, `inner`, ...). Later assignments win, so a config file is
//! applied first and flags on top of it.

use std::fs;
use std::path::{Path, PathBuf};

use super::libsvm::load_libsvm;
use super::synthetic::{gen_synthetic, SyntheticSpec};
use super::trace_csv::{load_partition, TraceFormat};
use crate::error::{Error, Result};
use crate::partition::BlockPartition;
use crate::problem::{CompositeProblem, Loss, Regularizer};
use crate::solver::{DelayInjection, GammaChoice, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    None,
    L1,
    Group,
    Elastic,
}

impl std::str::FromStr for RegKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "zero" => Ok(RegKind::None),
            "l1" | "lasso" => Ok(RegKind::L1),
            "group" | "group-l2" | "group_l2" | "grouplasso" => Ok(RegKind::Group),
            "elastic" | "elastic-net" | "elastic_net" | "elasticnet" => Ok(RegKind::Elastic),
            other => Err(Error::Unsupported(format!("regularizer `{other}`"))),
        }
    }
}

impl RegKind {
    pub fn name(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::L1 => "l1",
            RegKind::Group => "group",
            RegKind::Elastic => "elastic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FStar {
    Unknown,
    /// Computed by the high-accuracy solver.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub data: DataSource,
    /// Dimension override for file input.
    pub dim: Option<usize>,
    pub synthetic: SyntheticSpec,
    pub loss: Option<Loss>,
    pub reg: RegKind,
    pub lambda: f64,
    pub lambda2: f64,
    pub ridge: Option<f64>,
    /// `None` means `min(n, 100)`.
    pub blocks: Option<usize>,
    pub partition: Option<PathBuf>,
    pub threads: usize,
    pub epochs: usize,
    /// `None` means `2l`.
    pub inner: Option<usize>,
    pub per_thread_m: bool,
    pub batch: usize,
    /// `None` selects the automatic policy.
    pub gamma: Option<f64>,
    pub rho: f64,
    pub seed: u64,
    pub delay: usize,
    pub trace_every: usize,
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: TraceFormat,
    pub fstar: FStar,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            data: DataSource::Synthetic,
            dim: None,
            synthetic: SyntheticSpec::default(),
            loss: None,
            reg: RegKind::L1,
            lambda: 1e-2,
            lambda2: 0.0,
            ridge: None,
            blocks: None,
            partition: None,
            threads: 1,
            epochs: 20,
            inner: None,
            per_thread_m: false,
            batch: 1,
            gamma: None,
            rho: crate::solver::AUTO_RHO,
            seed: 0,
            delay: 0,
            trace_every: 1,
            trace: None,
            out: None,
            format: TraceFormat::Csv,
            fstar: FStar::Unknown,
        }
    }
}

/// Problem built from a spec, with the planted solution when synthetic.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: CompositeProblem<f64>,
    pub planted: Option<Vec<f64>>,
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("invalid value `{value}` for `{key}`"))),
    }
}

impl RunSpec {
    /// Applies one assignment. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "data" => {
                self.data = match value.strip_prefix("synthetic") {
                    Some("") => DataSource::Synthetic,
                    Some(rest) if rest.starts_with(':') => {
                        self.synthetic.kind = rest[1..].parse()?;
                        DataSource::Synthetic
                    }
                    _ => DataSource::File(PathBuf::from(value)),
                }
            }
            "dim" => self.dim = Some(parse(k, value)?),
            "synthetic" | "kind" => self.synthetic.kind = value.parse()?,
            "n" => self.synthetic.n = parse(k, value)?,
            "l" => self.synthetic.l = parse(k, value)?,
            "density" => self.synthetic.density = parse(k, value)?,
            "noise" => self.synthetic.noise = parse(k, value)?,
            "sparsity" => self.synthetic.sparsity = parse(k, value)?,
            "data-seed" => self.synthetic.seed = parse(k, value)?,
            "ridge" => self.ridge = Some(parse(k, value)?),
            "loss" => self.loss = Some(value.parse()?),
            "reg" => self.reg = value.parse()?,
            "lambda" => self.lambda = parse(k, value)?,
            "lambda2" => self.lambda2 = parse(k, value)?,
            "blocks" => self.blocks = Some(parse(k, value)?),
            "partition" => self.partition = Some(PathBuf::from(value)),
            "threads" => self.threads = parse(k, value)?,
            "epochs" => self.epochs = parse(k, value)?,
            "inner" => self.inner = Some(parse(k, value)?),
            "per-thread-m" => self.per_thread_m = parse_bool(k, value)?,
            "batch" => self.batch = parse(k, value)?,
            "gamma" => {
                self.gamma = if value == "auto" {
                    None
                } else {
                    Some(parse(k, value)?)
                }
            }
            "rho" => self.rho = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "delay" => self.delay = parse(k, value)?,
            "trace-every" => self.trace_every = parse(k, value)?,
            "trace" => self.trace = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "fstar" => {
                self.fstar = match value {
                    "auto" => FStar::Auto,
                    "none" => FStar::Unknown,
                    v => FStar::Value(parse(k, v)?),
                }
            }
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line; `#` starts a comment.
    pub fn apply_config_str(&mut self, text: &str, path: &Path) -> Result<()> {
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: ln + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected key=value, got `{line}`")))?;
            self.set(k, v).map_err(|e| fail(e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        self.apply_config_str(&text, path)
    }

    pub fn loss_kind(&self) -> Loss {
        self.loss.unwrap_or(match self.data {
            DataSource::Synthetic => self.synthetic.kind.loss(),
            DataSource::File(_) => Loss::Squared,
        })
    }

    pub fn regularizer(&self) -> Regularizer<f64> {
        match self.reg {
            RegKind::None => Regularizer::Zero,
            RegKind::L1 => Regularizer::L1 { lambda: self.lambda },
            RegKind::Group => Regularizer::GroupL2 { lambda: self.lambda },
            RegKind::Elastic => Regularizer::ElasticNet {
                l1: self.lambda,
                l2: self.lambda2,
            },
        }
    }

    pub fn build_problem(&self) -> Result<BuiltProblem> {
        let (data, planted, ridge) = match &self.data {
            DataSource::File(p) => (load_libsvm(p, self.dim)?, None, self.ridge.unwrap_or(0.0)),
            DataSource::Synthetic => {
                let spec = SyntheticSpec {
                    ridge: self.ridge,
                    ..self.synthetic
                };
                let s = gen_synthetic::<f64>(&spec)?;
                (s.data, Some(s.planted), s.ridge)
            }
        };
        let n = data.dim();
        let partition = match (&self.partition, self.blocks) {
            (Some(p), _) => load_partition(p, n)?,
            (None, Some(k)) => BlockPartition::contiguous(n, k)?,
            (None, None) => BlockPartition::contiguous(n, n.min(100))?,
        };
        let problem = CompositeProblem::new(data, self.loss_kind(), self.regularizer(), partition)?.with_ridge(ridge)?;
        Ok(BuiltProblem { problem, planted })
    }

    pub fn inner_iters(&self, problem: &CompositeProblem<f64>) -> usize {
        self.inner.unwrap_or(2 * problem.num_components())
    }

    pub fn solver_config(&self, problem: &CompositeProblem<f64>) -> SolverConfig<f64> {
        SolverConfig {
            threads: self.threads,
            epochs: self.epochs,
            inner_iters: self.inner_iters(problem),
            per_thread_m: self.per_thread_m,
            minibatch: self.batch,
            gamma: match self.gamma {
                Some(g) => GammaChoice::Fixed(g),
                None => GammaChoice::Auto { rho: self.rho },
            },
            seed: self.seed,
            delay: (self.delay > 0).then_some(DelayInjection {
                max_extra_staleness: self.delay,
            }),
            trace_every: self.trace_every,
            ..Default::default()
        }
    }

    /// Every setting in `key=value` form, with defaults resolved against
    /// `problem`. Feeding these back through `set` reproduces the run.
    pub fn entries(&self, problem: &CompositeProblem<f64>) -> Vec<(String, String)> {
        let mut e: Vec<(&str, String)> = Vec::new();
        match &self.data {
            DataSource::File(p) => {
                e.push(("data", p.display().to_string()));
                if let Some(d) = self.dim {
                    e.push(("dim", d.to_string()));
                }
            }
            DataSource::Synthetic => {
                let s = &self.synthetic;
                e.push(("data", "synthetic".into()));
                e.push(("synthetic", s.kind.name().into()));
                e.push(("n", s.n.to_string()));
                e.push(("l", s.l.to_string()));
                e.push(("density", s.density.to_string()));
                e.push(("noise", s.noise.to_string()));
                e.push(("sparsity", s.sparsity.to_string()));
                e.push(("data-seed", s.seed.to_string()));
            }
        }
        e.push(("ridge", problem.ridge().to_string()));
        e.push(("loss", self.loss_kind().name().into()));
        e.push(("reg", self.reg.name().into()));
        e.push(("lambda", self.lambda.to_string()));
        e.push(("lambda2", self.lambda2.to_string()));
        match &self.partition {
            Some(p) => e.push(("partition", p.display().to_string())),
            None => e.push(("blocks", problem.num_blocks().to_string())),
        }
        e.push(("threads", self.threads.to_string()));
        e.push(("epochs", self.epochs.to_string()));
        e.push(("inner", self.inner_iters(problem).to_string()));
        e.push(("per-thread-m", self.per_thread_m.to_string()));
        e.push(("batch", self.batch.to_string()));
        e.push((
            "gamma",
            self.gamma.map_or_else(|| "auto".to_string(), |g| g.to_string()),
        ));
        e.push(("rho", self.rho.to_string()));
        e.push(("seed", self.seed.to_string()));
        e.push(("delay", self.delay.to_string()));
        e.push(("trace-every", self.trace_every.to_string()));
        e.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
