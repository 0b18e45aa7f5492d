//! TOML run configuration. Every section is optional; the defaults describe
//! a small synthetic run.

use std::fs;
use std::path::{Path, PathBuf};

use riloss_core::bounds::ConvergenceConfig;
use riloss_core::data::{SplitSpec, SyntheticSpec};
use riloss_core::forecaster::TrainConfig;
use riloss_core::loss::{CorruptionMode, LossKind, RiLossConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub loss: RiLossConfig,
    pub ablation: AblationSection,
    pub robustness: RobustnessSection,
    pub sweep: SweepSection,
    pub tradeoff: TradeoffSection,
    pub crossterm: CrosstermSection,
    pub bounds: ConvergenceConfig,
    pub friedman: FriedmanSection,
    /// Source text, echoed into reports. Empty for built-in defaults.
    #[serde(skip)]
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Master seed: model init, batch order, loss noise and SNR noise all
    /// derive from it. `[train].seed` and `[loss].seed` are overwritten.
    pub seed: u64,
    pub out: PathBuf,
    /// Independent runs per setting at seeds `seed, seed + 1, ...`.
    pub repeats: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            out: PathBuf::from("out"),
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Synthetic,
    Csv,
}

/// Public benchmark files with fixed month-based borders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Etth1,
    Etth2,
    Ettm1,
    Ettm2,
}

impl Benchmark {
    pub fn split(self) -> SplitSpec {
        match self {
            Benchmark::Etth1 | Benchmark::Etth2 => SplitSpec::EttHourly,
            Benchmark::Ettm1 | Benchmark::Ettm2 => SplitSpec::EttMinute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    /// Marks `path` as a downloaded benchmark file; implies its split and
    /// needs `--acknowledge-datasets`.
    pub benchmark: Option<Benchmark>,
    pub split: SplitSpec,
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
    /// Gaussian noise added to the standardised inputs (targets stay clean).
    pub snr_db: Option<f64>,
    pub synthetic: SyntheticSpec,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataSource::Synthetic,
            path: None,
            benchmark: None,
            split: SplitSpec::default(),
            lookback: 96,
            horizon: 96,
            stride: 1,
            snr_db: None,
            synthetic: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kernel_size: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { kernel_size: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub kinds: Vec<LossKind>,
    /// Empty means `[data].horizon`.
    pub horizons: Vec<usize>,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            kinds: LossKind::ALL.to_vec(),
            horizons: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessSection {
    pub snr_db: Vec<f64>,
    pub kinds: Vec<LossKind>,
}

impl Default for RobustnessSection {
    fn default() -> Self {
        RobustnessSection {
            snr_db: vec![-3.0, 0.0, 3.0, 10.0],
            kinds: vec![LossKind::Mse, LossKind::Ri],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub kinds: Vec<LossKind>,
    pub horizons: Vec<usize>,
    /// Empty means `[data].snr_db`.
    pub snr_db: Vec<f64>,
    /// Empty means `repeats` seeds from `[run].seed`.
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            kinds: vec![LossKind::Mse, LossKind::Ri],
            horizons: Vec::new(),
            snr_db: Vec::new(),
            seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffSection {
    pub taus: Vec<f64>,
    pub steps: usize,
    pub points: usize,
    pub mode: CorruptionMode,
}

impl Default for TradeoffSection {
    fn default() -> Self {
        TradeoffSection {
            taus: vec![50.0, 100.0],
            steps: 51,
            points: 1000,
            mode: CorruptionMode::Fresh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosstermSection {
    pub horizon: usize,
    /// `identity`, `zero` or `random`; each `random` entry expands to
    /// `random_count` matrices.
    pub projections: Vec<String>,
    pub random_count: usize,
    pub sigmas: Vec<f64>,
    pub trials: usize,
}

impl Default for CrosstermSection {
    fn default() -> Self {
        CrosstermSection {
            horizon: 8,
            projections: vec!["identity".into(), "random".into()],
            random_count: 10,
            sigmas: vec![0.5, 1.0],
            trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FriedmanSection {
    /// CSV: a label column followed by one metric column per method.
    pub table: Option<PathBuf>,
    /// Overrides the built-in Nemenyi value for alpha = 0.05.
    pub q_alpha: Option<f64>,
    pub lower_is_better: bool,
}

impl Default for FriedmanSection {
    fn default() -> Self {
        FriedmanSection {
            table: None,
            q_alpha: None,
            lower_is_better: true,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = error_key(text, &e);
            HarnessError::new("config", key.as_deref(), e.message().to_string())
        })?;
        cfg.raw = text.to_string();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::new("io", Some("config"), format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Structural checks that do not need data. Numeric ranges of core
    /// types are checked where they are used.
    pub fn validate(&self) -> Result<()> {
        if self.run.repeats == 0 {
            return Err(HarnessError::config("run.repeats", "must be at least 1"));
        }
        let d = &self.data;
        for (key, v) in [
            ("data.lookback", d.lookback),
            ("data.horizon", d.horizon),
            ("data.stride", d.stride),
        ] {
            if v == 0 {
                return Err(HarnessError::config(key, "must be positive"));
            }
        }
        if d.source == DataSource::Csv && d.path.is_none() {
            return Err(HarnessError::config("data.path", "required when source = \"csv\""));
        }
        if d.benchmark.is_some() && d.source != DataSource::Csv {
            return Err(HarnessError::config(
                "data.benchmark",
                "benchmarks are read with source = \"csv\"",
            ));
        }
        if let Some(snr) = d.snr_db {
            check_snr("data.snr_db", snr)?;
        }
        if self.ablation.horizons.contains(&0) {
            return Err(HarnessError::config("ablation.horizons", "must be positive"));
        }
        if self.sweep.horizons.contains(&0) {
            return Err(HarnessError::config("sweep.horizons", "must be positive"));
        }
        for snr in &self.robustness.snr_db {
            check_snr("robustness.snr_db", *snr)?;
        }
        for snr in &self.sweep.snr_db {
            check_snr("sweep.snr_db", *snr)?;
        }
        for (key, kinds) in [
            ("ablation.kinds", &self.ablation.kinds),
            ("robustness.kinds", &self.robustness.kinds),
            ("sweep.kinds", &self.sweep.kinds),
        ] {
            if kinds.is_empty() {
                return Err(HarnessError::config(key, "must list at least one loss"));
            }
        }
        if let Some(q) = self.friedman.q_alpha {
            if !(q.is_finite() && q > 0.0) {
                return Err(HarnessError::config(
                    "friedman.q_alpha",
                    format!("must be > 0, got {q}"),
                ));
            }
        }
        Ok(())
    }

    /// The provenance text written into reports.
    pub fn echo(&self) -> String {
        if self.raw.is_empty() {
            toml::to_string(self).unwrap_or_default()
        } else {
            self.raw.clone()
        }
    }
}

pub fn check_snr(key: &str, snr: f64) -> Result<()> {
    if snr.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::config(key, format!("SNR must be finite, got {snr}")))
    }
}

/// Best-effort dotted key for a TOML error: the section header above the
/// error position, plus the key on the offending line.
fn error_key(text: &str, err: &toml::de::Error) -> Option<String> {
    let span = err.span()?;
    let before = &text[..span.start.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[line_start..].find('\n').map_or(text.len(), |i| line_start + i);
    let line = text[line_start..line_end].trim();
    let section = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    let key = line
        .split('=')
        .next()
        .map(str::trim)
        .filter(|k| !k.is_empty() && !k.starts_with('['));
    match (section, key) {
        (Some(s), Some(k)) => Some(format!("{s}.{k}")),
        (None, Some(k)) => Some(k.to_string()),
        (Some(s), None) => Some(s),
        (None, None) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.data.lookback, 96);
        assert_eq!(cfg.loss.lambda, 10.0);
        assert_eq!(cfg.ablation.kinds.len(), 4);
        assert_eq!(cfg.robustness.snr_db, vec![-3.0, 0.0, 3.0, 10.0]);
    }

    #[test]
    fn sections_parse() {
        let text = r#"
[run]
seed = 7
out = "runs/a"

[data]
horizon = 24
snr_db = 0.0
[data.split]
mode = "ratio"
train = 0.6
val = 0.2
test = 0.2
[data.synthetic]
length = 800

[train]
loss_kind = "ri"
epochs = 2

[loss]
lambda = 5.0
sample_axis = "whole_window"
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.data.horizon, 24);
        assert_eq!(cfg.data.synthetic.length, 800);
        assert_eq!(cfg.train.loss_kind, LossKind::Ri);
        assert_eq!(cfg.loss.lambda, 5.0);
        assert_eq!(cfg.raw, text);
        assert!(matches!(cfg.data.split, SplitSpec::Ratio { train, .. } if train == 0.6));
    }

    #[test]
    fn unknown_key_is_reported_with_its_path() {
        let err = RunConfig::parse("[train]\nlearning_rat = 0.1\n").unwrap_err();
        assert_eq!(err.kind, "config");
        assert_eq!(err.key.as_deref(), Some("train.learning_rat"));
    }

    #[test]
    fn wrong_type_is_reported_with_its_path() {
        let err = RunConfig::parse("[data]\nhorizon = \"long\"\n").unwrap_err();
        assert_eq!(err.key.as_deref(), Some("data.horizon"));
    }

    #[test]
    fn structural_errors_name_the_key() {
        let err = RunConfig::parse("[data]\nsource = \"csv\"\n").unwrap_err();
        assert_eq!(err.key.as_deref(), Some("data.path"));
        let err = RunConfig::parse("[data]\nhorizon = 0\n").unwrap_err();
        assert_eq!(err.key.as_deref(), Some("data.horizon"));
    }

    #[test]
    fn shipped_configs_parse() {
        for text in [
            include_str!("../../../configs/small.toml"),
            include_str!("../../../configs/etth1.toml"),
        ] {
            RunConfig::parse(text).unwrap();
        }
        let etth1 = RunConfig::parse(include_str!("../../../configs/etth1.toml")).unwrap();
        assert_eq!(etth1.data.benchmark, Some(Benchmark::Etth1));
    }
}
