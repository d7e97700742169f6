//! Flat `key = value` experiment configuration.
//!
//! One file drives every subcommand; unknown keys are hard errors so a
//! typo cannot silently fall back to a default. `#` starts a comment,
//! blank lines are ignored, list values are comma-separated. The
//! command line can override `seed`, the output directory and the
//! evaluation sample count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lens_core::attribution::AttributionMethod;
use lens_core::model::{Activation, DEFAULT_SOFTPLUS_BETA};

use crate::error::{CliError, CliResult};

/// Training regimes a checkpoint can come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Regime {
    Natural,
    Pgd,
}

impl Regime {
    pub fn id(self) -> &'static str {
        match self {
            Regime::Natural => "natural",
            Regime::Pgd => "pgd",
        }
    }
}

impl FromStr for Regime {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "natural" => Ok(Regime::Natural),
            "pgd" => Ok(Regime::Pgd),
            other => Err(CliError::Config(format!("unknown training regime {other:?}"))),
        }
    }
}

/// Metrics the evaluation grid can emit. Declaration order is the
/// fixed column order of reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricKind {
    TopK,
    LensRecall,
    LensPrec,
    TopKDiv,
    LensRecallDiv,
    LensPrecDiv,
    Spearman,
    Kendall,
    LensSpearman,
    LensKendall,
}

impl MetricKind {
    pub const REPORT_ORDER: [MetricKind; 10] = [
        MetricKind::TopK,
        MetricKind::LensRecall,
        MetricKind::LensPrec,
        MetricKind::TopKDiv,
        MetricKind::LensRecallDiv,
        MetricKind::LensPrecDiv,
        MetricKind::Spearman,
        MetricKind::Kendall,
        MetricKind::LensSpearman,
        MetricKind::LensKendall,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MetricKind::TopK => "topk",
            MetricKind::LensRecall => "lens_recall",
            MetricKind::LensPrec => "lens_prec",
            MetricKind::TopKDiv => "topk_div",
            MetricKind::LensRecallDiv => "lens_recall_div",
            MetricKind::LensPrecDiv => "lens_prec_div",
            MetricKind::Spearman => "spearman",
            MetricKind::Kendall => "kendall",
            MetricKind::LensSpearman => "lens_spearman",
            MetricKind::LensKendall => "lens_kendall",
        }
    }

    pub fn order_index(self) -> usize {
        Self::REPORT_ORDER.iter().position(|m| *m == self).expect("listed")
    }

    /// Does this metric use the diverse top-k selection?
    pub fn is_diverse(self) -> bool {
        matches!(
            self,
            MetricKind::TopKDiv | MetricKind::LensRecallDiv | MetricKind::LensPrecDiv
        )
    }
}

impl FromStr for MetricKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        MetricKind::REPORT_ORDER
            .iter()
            .copied()
            .find(|m| m.id() == s)
            .ok_or_else(|| CliError::Config(format!("unknown metric {s:?}")))
    }
}

/// Attack variants the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AttackKind {
    RandomSign,
    UniversalRandom,
    TopK,
    MassCenter,
    LensObjective,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::RandomSign,
        AttackKind::UniversalRandom,
        AttackKind::TopK,
        AttackKind::MassCenter,
        AttackKind::LensObjective,
    ];

    pub fn id(self) -> &'static str {
        match self {
            AttackKind::RandomSign => "random_sign",
            AttackKind::UniversalRandom => "universal_random",
            AttackKind::TopK => "topk_attack",
            AttackKind::MassCenter => "mass_center_attack",
            AttackKind::LensObjective => "lens_objective_attack",
        }
    }
}

impl FromStr for AttackKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        AttackKind::ALL
            .iter()
            .copied()
            .find(|a| a.id() == s)
            .ok_or_else(|| CliError::Config(format!("unknown attack {s:?}")))
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Where checkpoints are read from during evaluation; defaults to
    /// the output directory (where `train` writes them).
    pub model_dir: PathBuf,
    pub seed: u64,
    /// Evaluate on this many manifest images (sampled without
    /// replacement); `None` means all of them.
    pub sample_count: Option<usize>,
    pub dataset_samples: usize,

    pub regimes: Vec<Regime>,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub train_epochs: usize,
    pub train_batch: usize,
    pub train_lr: f64,
    pub pgd_epsilon: f64,
    pub pgd_steps: usize,
    pub pgd_step_size: f64,

    pub attribution: AttributionMethod,
    /// Rank absolute attribution values instead of signed ones.
    pub rank_abs: bool,

    pub metrics: Vec<MetricKind>,
    pub k_values: Vec<usize>,
    pub w_values: Vec<usize>,
    pub w_div: usize,

    pub attacks: Vec<AttackKind>,
    pub epsilon_values: Vec<f64>,
    pub attack_steps: usize,
    pub attack_step_size: f64,
    pub attack_restarts: usize,
    /// Size of the attacked top set.
    pub attack_t: usize,
    /// Window of the locality-aware attack objective.
    pub attack_w: usize,
}

/// Command-line overrides applied after the file is parsed.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut pairs: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            let key = key.trim().to_string();
            if pairs.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key {key:?}", i + 1)));
            }
        }

        let mut p = Pairs { map: pairs };
        let softplus_beta = p.parse_or("softplus_beta", DEFAULT_SOFTPLUS_BETA)?;
        let activation = match p.take("activation").as_deref().unwrap_or("softplus") {
            "relu" => Activation::Relu,
            "softplus" => {
                if !(softplus_beta.is_finite() && softplus_beta > 0.0) {
                    return Err(CliError::Config("softplus_beta must be positive".into()));
                }
                Activation::Softplus { beta: softplus_beta }
            }
            other => return Err(CliError::Config(format!("unknown activation {other:?}"))),
        };

        let ig_steps: usize = p.parse_or("ig_steps", 32)?;
        if ig_steps == 0 {
            return Err(CliError::Config("ig_steps must be positive".into()));
        }
        let attribution = match p.take("attribution").as_deref().unwrap_or("gradient") {
            "gradient" => AttributionMethod::Gradient,
            "input_x_gradient" => AttributionMethod::InputXGradient,
            "integrated_gradients" => AttributionMethod::IntegratedGradients { steps: ig_steps },
            other => return Err(CliError::Config(format!("unknown attribution {other:?}"))),
        };

        let cfg = ExperimentConfig {
            dataset_dir: PathBuf::from(
                p.take("dataset_dir")
                    .ok_or_else(|| CliError::Config("missing required key dataset_dir".into()))?,
            ),
            out_dir: {
                let from_file = p.take("out_dir").map(PathBuf::from);
                overrides
                    .out
                    .clone()
                    .or(from_file)
                    .unwrap_or_else(|| PathBuf::from("out"))
            },
            model_dir: PathBuf::new(), // resolved below
            seed: match overrides.seed {
                Some(s) => {
                    p.take("seed");
                    s
                }
                None => p.parse_or("seed", 0)?,
            },
            sample_count: match overrides.samples {
                Some(n) => {
                    p.take("sample_count");
                    Some(n)
                }
                None => p.take_parsed::<usize>("sample_count")?,
            },
            dataset_samples: p.parse_or("dataset_samples", 500)?,
            regimes: p.parse_list_or("regimes", "natural")?,
            hidden_dims: p.parse_list_or("hidden_dims", "32")?,
            activation,
            train_epochs: p.parse_or("train_epochs", 30)?,
            train_batch: p.parse_or("train_batch", 32)?,
            train_lr: p.parse_or("train_lr", 0.5)?,
            pgd_epsilon: p.parse_or("pgd_epsilon", 0.3)?,
            pgd_steps: p.parse_or("pgd_steps", 40)?,
            pgd_step_size: p.parse_or("pgd_step_size", 0.01)?,
            attribution,
            rank_abs: p.parse_or("rank_abs", false)?,
            metrics: p.parse_list_or("metrics", "topk,lens_recall,lens_prec")?,
            k_values: p.parse_list_or("k_values", "1,5,10")?,
            w_values: p.parse_list_or("w_values", "0,1,2")?,
            w_div: p.parse_or("w_div", 1)?,
            attacks: p.parse_list_or("attacks", "random_sign,topk_attack")?,
            epsilon_values: p.parse_list_or("epsilon_values", "0.1,0.2,0.3")?,
            attack_steps: p.parse_or("attack_steps", 100)?,
            attack_step_size: p.parse_or("attack_step_size", 0.01)?,
            attack_restarts: p.parse_or("attack_restarts", 3)?,
            attack_t: p.parse_or("attack_t", 10)?,
            attack_w: p.parse_or("attack_w", 1)?,
        };
        let model_dir = p.take("model_dir").map(PathBuf::from).unwrap_or_else(|| cfg.out_dir.clone());
        let cfg = ExperimentConfig { model_dir, ..cfg };

        if let Some((line, _)) = p.map.values().next() {
            let keys: Vec<&str> = p.map.keys().map(|s| s.as_str()).collect();
            return Err(CliError::Config(format!(
                "unknown key(s) {} (first at line {line})",
                keys.join(", ")
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.regimes.is_empty() {
            return bad("regimes must not be empty");
        }
        if self.metrics.is_empty() {
            return bad("metrics must not be empty");
        }
        if self.attacks.is_empty() {
            return bad("attacks must not be empty");
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return bad("k_values must be positive and non-empty");
        }
        if self.w_values.is_empty() {
            return bad("w_values must not be empty");
        }
        if self.epsilon_values.is_empty()
            || self.epsilon_values.iter().any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return bad("epsilon_values must be non-negative and non-empty");
        }
        if !(self.train_lr.is_finite() && self.train_lr > 0.0) {
            return bad("train_lr must be positive");
        }
        if self.train_epochs == 0 || self.train_batch == 0 {
            return bad("train_epochs and train_batch must be positive");
        }
        if !(self.attack_step_size.is_finite() && self.attack_step_size > 0.0) {
            return bad("attack_step_size must be positive");
        }
        if self.attack_steps == 0 || self.attack_restarts == 0 {
            return bad("attack_steps and attack_restarts must be positive");
        }
        if self.attack_t == 0 {
            return bad("attack_t must be positive");
        }
        if self.dataset_samples == 0 {
            return bad("dataset_samples must be positive");
        }
        if self.sample_count == Some(0) {
            return bad("sample_count must be positive when given");
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.regimes {
            if !seen.insert(*r) {
                return bad("regimes lists a regime twice");
            }
        }
        Ok(())
    }

    /// Canonical echo of the resolved settings, written next to every
    /// result tree so a run can be reproduced byte for byte.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: &str| writeln!(s, "{k} = {v}").expect("string write");
        kv(&mut s, "activation", &self.activation.to_string());
        if let Activation::Softplus { beta } = self.activation {
            kv(&mut s, "softplus_beta", &format!("{beta}"));
        }
        kv(
            &mut s,
            "attacks",
            &self.attacks.iter().map(|a| a.id()).collect::<Vec<_>>().join(","),
        );
        kv(&mut s, "attack_restarts", &self.attack_restarts.to_string());
        kv(&mut s, "attack_step_size", &format!("{}", self.attack_step_size));
        kv(&mut s, "attack_steps", &self.attack_steps.to_string());
        kv(&mut s, "attack_t", &self.attack_t.to_string());
        kv(&mut s, "attack_w", &self.attack_w.to_string());
        let attribution_id = match self.attribution {
            AttributionMethod::Gradient => "gradient".to_string(),
            AttributionMethod::InputXGradient => "input_x_gradient".to_string(),
            AttributionMethod::IntegratedGradients { steps } => {
                kv(&mut s, "ig_steps", &steps.to_string());
                "integrated_gradients".to_string()
            }
        };
        kv(&mut s, "attribution", &attribution_id);
        kv(&mut s, "dataset_dir", &self.dataset_dir.display().to_string());
        kv(&mut s, "dataset_samples", &self.dataset_samples.to_string());
        kv(
            &mut s,
            "epsilon_values",
            &self
                .epsilon_values
                .iter()
                .map(|e| format!("{e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(
            &mut s,
            "hidden_dims",
            &self.hidden_dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
        );
        kv(
            &mut s,
            "k_values",
            &self.k_values.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
        );
        kv(
            &mut s,
            "metrics",
            &self.metrics.iter().map(|m| m.id()).collect::<Vec<_>>().join(","),
        );
        kv(&mut s, "model_dir", &self.model_dir.display().to_string());
        kv(&mut s, "out_dir", &self.out_dir.display().to_string());
        kv(&mut s, "pgd_epsilon", &format!("{}", self.pgd_epsilon));
        kv(&mut s, "pgd_step_size", &format!("{}", self.pgd_step_size));
        kv(&mut s, "pgd_steps", &self.pgd_steps.to_string());
        kv(&mut s, "rank_abs", &self.rank_abs.to_string());
        kv(
            &mut s,
            "regimes",
            &self.regimes.iter().map(|r| r.id()).collect::<Vec<_>>().join(","),
        );
        if let Some(n) = self.sample_count {
            kv(&mut s, "sample_count", &n.to_string());
        }
        kv(&mut s, "seed", &self.seed.to_string());
        kv(&mut s, "train_batch", &self.train_batch.to_string());
        kv(&mut s, "train_epochs", &self.train_epochs.to_string());
        kv(&mut s, "train_lr", &format!("{}", self.train_lr));
        kv(
            &mut s,
            "w_values",
            &self.w_values.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","),
        );
        kv(&mut s, "w_div", &self.w_div.to_string());
        s
    }
}

struct Pairs {
    map: BTreeMap<String, (usize, String)>,
}

impl Pairs {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|(_, v)| v)
    }

    fn take_parsed<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Config(format!("bad value for {key}: {v:?}"))),
        }
    }

    fn parse_or<T: FromStr>(&mut self, key: &str, default: T) -> CliResult<T> {
        Ok(self.take_parsed(key)?.unwrap_or(default))
    }

    fn parse_list_or<T>(&mut self, key: &str, default: &str) -> CliResult<Vec<T>>
    where
        T: FromStr,
    {
        let raw = self.take(key).unwrap_or_else(|| default.to_string());
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<T>()
                    .map_err(|_| CliError::Config(format!("bad value {tok:?} in {key}")))
            })
            .collect()
    }
}
