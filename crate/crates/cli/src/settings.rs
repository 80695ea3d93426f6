//! Effective run settings: command-line flags over an optional TOML file over
//! built-in defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, ValueEnum};
use gabp_core::svm::{LoadingMode, SolverConfig, SupportThreshold, TrainConfig};
use gabp_core::{KernelFamily, KernelSpec, Schedule, Variant};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    Linear,
    Rbf,
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadingArg {
    OneOverC,
    EnforceDominance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleArg {
    Sync,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Edge,
    Broadcast,
}

/// `auto` (one over the training-set size) or an explicit constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BiasRepr", into = "BiasRepr")]
pub enum Bias {
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BiasRepr {
    Value(f64),
    Word(String),
}

impl TryFrom<BiasRepr> for Bias {
    type Error = String;

    fn try_from(r: BiasRepr) -> Result<Self, Self::Error> {
        match r {
            BiasRepr::Value(v) => Ok(Bias::Value(v)),
            BiasRepr::Word(w) => w.parse(),
        }
    }
}

impl From<Bias> for BiasRepr {
    fn from(b: Bias) -> Self {
        match b {
            Bias::Auto => BiasRepr::Word("auto".into()),
            Bias::Value(v) => BiasRepr::Value(v),
        }
    }
}

impl FromStr for Bias {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Bias::Auto);
        }
        s.parse::<f64>()
            .map(Bias::Value)
            .map_err(|_| format!("expected \"auto\" or a number, got {s:?}"))
    }
}

/// Flags shared by every subcommand. Every field is optional so that unset
/// flags fall through to the config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SettingsArgs {
    /// TOML file with any of these settings; flags override it.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub coef0: Option<f64>,
    /// Kernel offset constant: `auto` (1/N) or a real.
    #[arg(long, value_name = "auto|REAL")]
    pub bias: Option<Bias>,
    #[arg(long)]
    pub cost_c: Option<f64>,
    #[arg(long, value_enum)]
    pub loading: Option<LoadingArg>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Worker count for the row-partitioned runtime.
    #[arg(long, env = "GABP_WORKERS")]
    pub workers: Option<usize>,
    /// Absolute threshold on |h_i| for support vectors (default: 1e-5 of max |h|).
    #[arg(long)]
    pub sv_threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Raw label mapped to +1; every other label maps to -1.
    #[arg(long)]
    pub positive_class: Option<String>,
    /// Min-max scale features to [0, 1] using training statistics.
    #[arg(long, action = ArgAction::SetTrue)]
    #[serde(default)]
    pub scale: bool,
}

/// Fully resolved settings, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub kernel: KernelArg,
    pub gamma: f64,
    pub degree: u32,
    pub coef0: f64,
    pub bias: Bias,
    pub cost_c: f64,
    pub loading: LoadingArg,
    pub epsilon: f64,
    pub max_iters: usize,
    pub schedule: ScheduleArg,
    pub variant: VariantArg,
    pub workers: usize,
    pub sv_threshold: Option<f64>,
    pub seed: u64,
    pub positive_class: Option<String>,
    pub scale: bool,
}

/// Defaults that differ by subcommand.
pub struct Defaults {
    pub schedule: ScheduleArg,
    pub variant: VariantArg,
}

impl Defaults {
    /// Solving follows the engine defaults: synchronous per-edge messages.
    pub const SOLVE: Defaults = Defaults {
        schedule: ScheduleArg::Sync,
        variant: VariantArg::Edge,
    };
    /// Training uses broadcast messages; single-process runs sweep
    /// asynchronously, which converges far faster on loaded dual matrices.
    pub const TRAIN: Defaults = Defaults {
        schedule: ScheduleArg::Async,
        variant: VariantArg::Broadcast,
    };
}

fn read_config(path: &Path) -> anyhow::Result<SettingsArgs> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl SettingsArgs {
    pub fn resolve(&self, defaults: Defaults) -> anyhow::Result<Settings> {
        let file = match &self.config {
            Some(path) => read_config(path)?,
            None => SettingsArgs::default(),
        };
        let workers = self.workers.or(file.workers).unwrap_or(1);
        // the distributed runtime only runs synchronous broadcast rounds
        let (schedule, variant) = if workers > 1 {
            (ScheduleArg::Sync, VariantArg::Broadcast)
        } else {
            (defaults.schedule, defaults.variant)
        };
        let s = Settings {
            kernel: self.kernel.or(file.kernel).unwrap_or(KernelArg::Rbf),
            gamma: self.gamma.or(file.gamma).unwrap_or(1.0),
            degree: self.degree.or(file.degree).unwrap_or(3),
            coef0: self.coef0.or(file.coef0).unwrap_or(1.0),
            bias: self.bias.or(file.bias).unwrap_or(Bias::Auto),
            cost_c: self.cost_c.or(file.cost_c).unwrap_or(1.0),
            loading: self.loading.or(file.loading).unwrap_or(LoadingArg::OneOverC),
            epsilon: self.epsilon.or(file.epsilon).unwrap_or(gabp_core::gabp::DEFAULT_EPSILON),
            max_iters: self.max_iters.or(file.max_iters).unwrap_or(gabp_core::gabp::DEFAULT_MAX_ITERS),
            schedule: self.schedule.or(file.schedule).unwrap_or(schedule),
            variant: self.variant.or(file.variant).unwrap_or(variant),
            workers,
            sv_threshold: self.sv_threshold.or(file.sv_threshold),
            seed: self.seed.or(file.seed).unwrap_or(0),
            positive_class: self.positive_class.clone().or(file.positive_class),
            scale: self.scale || file.scale,
        };
        if s.workers == 0 {
            bail!("--workers must be at least 1");
        }
        if s.workers > 1 && (s.schedule != ScheduleArg::Sync || s.variant != VariantArg::Broadcast) {
            bail!("--workers > 1 needs --schedule sync and --variant broadcast");
        }
        Ok(s)
    }
}

impl Settings {
    pub fn schedule(&self) -> Schedule {
        match self.schedule {
            ScheduleArg::Sync => Schedule::Synchronous,
            ScheduleArg::Async => Schedule::AsynchronousSweep,
        }
    }

    pub fn variant(&self) -> Variant {
        match self.variant {
            VariantArg::Edge => Variant::Edge,
            VariantArg::Broadcast => Variant::Broadcast,
        }
    }

    pub fn kernel_spec(&self, n_train: usize) -> gabp_core::Result<KernelSpec> {
        let family = match self.kernel {
            KernelArg::Linear => KernelFamily::Linear,
            KernelArg::Rbf => KernelFamily::Rbf { gamma: self.gamma },
            KernelArg::Poly => KernelFamily::Polynomial {
                degree: self.degree,
                coef0: self.coef0,
            },
        };
        let bias = match self.bias {
            Bias::Auto => gabp_core::kernels::default_bias_constant(n_train),
            Bias::Value(v) => v,
        };
        KernelSpec::new(family, bias)
    }

    pub fn train_config(&self, n_train: usize) -> gabp_core::Result<TrainConfig> {
        let mut c = TrainConfig::new(self.kernel_spec(n_train)?);
        c.cost_c = self.cost_c;
        c.loading = match self.loading {
            LoadingArg::OneOverC => LoadingMode::OneOverC,
            LoadingArg::EnforceDominance => LoadingMode::EnforceDominance,
        };
        c.solver = SolverConfig {
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            schedule: self.schedule(),
            variant: self.variant(),
        };
        if let Some(t) = self.sv_threshold {
            c.sv_threshold = SupportThreshold::Absolute(t);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("settings serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_parses() {
        assert_eq!("auto".parse::<Bias>().unwrap(), Bias::Auto);
        assert_eq!("0.5".parse::<Bias>().unwrap(), Bias::Value(0.5));
        assert!("x".parse::<Bias>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "gamma = 4.0\ncost-c = 2.0\nbias = \"auto\"\nloading = \"enforce-dominance\"\n").unwrap();
        let args = SettingsArgs {
            config: Some(path),
            gamma: Some(0.5),
            ..Default::default()
        };
        let s = args.resolve(Defaults::TRAIN).unwrap();
        assert_eq!(s.gamma, 0.5);
        assert_eq!(s.cost_c, 2.0);
        assert_eq!(s.loading, LoadingArg::EnforceDominance);
        assert_eq!(s.schedule, ScheduleArg::Async);
    }

    #[test]
    fn numeric_bias_in_file() {
        let file: SettingsArgs = toml::from_str("bias = 0.25").unwrap();
        assert_eq!(file.bias, Some(Bias::Value(0.25)));
        assert!(toml::from_str::<SettingsArgs>("unknown = 1").is_err());
    }

    #[test]
    fn multiple_workers_force_sync_broadcast() {
        let args = SettingsArgs {
            workers: Some(4),
            ..Default::default()
        };
        let s = args.resolve(Defaults::TRAIN).unwrap();
        assert_eq!((s.schedule, s.variant), (ScheduleArg::Sync, VariantArg::Broadcast));
        let bad = SettingsArgs {
            workers: Some(4),
            schedule: Some(ScheduleArg::Async),
            ..Default::default()
        };
        assert!(bad.resolve(Defaults::TRAIN).is_err());
    }
}
