//! Experiment configuration (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cdp_core::attack::{EstimatorKind, Mode, TrainConfig};
use cdp_core::authmetrics::{MetricVector, PreprocessParams};
use cdp_core::classify::{DEFAULT_C, DEFAULT_GAMMA, DEFAULT_NU};
use cdp_core::printchan::ChannelParams;

/// Held-out originals each protocol run needs beyond the training set.
pub const MIN_HELD_OUT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub templates: TemplateSpec,
    /// Printer tag → channel. Tags are the table keys, so they are unique.
    pub printers: BTreeMap<String, PrinterSpec>,
    #[serde(default)]
    pub attack: AttackSpec,
    #[serde(default)]
    pub fakes: FakeSpec,
    #[serde(default)]
    pub auth: PreprocessParams,
    #[serde(default)]
    pub classify: ClassifySpec,
    #[serde(default)]
    pub report: ReportSpec,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub rows: usize,
    pub cols: usize,
    pub densities: Vec<f64>,
    /// Codes per density.
    pub count: usize,
}

/// A named preset with optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrinterSpec {
    pub preset: Option<String>,
    pub psf_sigma: Option<f64>,
    pub dot_gain: Option<f64>,
    pub gain: Option<f64>,
    pub offset: Option<f64>,
    pub noise_std: Option<f64>,
    pub ink_noise_std: Option<f64>,
    pub dot_gain_jitter: Option<f64>,
    pub seed: Option<u64>,
}

impl PrinterSpec {
    /// Resolve to channel parameters at the attack resolution.
    pub fn resolve(&self, tag: &str) -> Result<ChannelParams> {
        let base = self.preset.as_deref().unwrap_or(tag);
        let mut p = ChannelParams::preset(base)
            .with_context(|| format!("printer {tag}: unknown preset {base:?} (known: P55, P76)"))?;
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        over!(psf_sigma, dot_gain, gain, offset, noise_std, ink_noise_std, dot_gain_jitter, seed);
        p.validate().with_context(|| format!("printer {tag}"))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSpec {
    pub estimators: Vec<EstimatorKind>,
    /// Leading codes of each density used to fit the estimators; the rest
    /// are held out.
    pub train_codes: usize,
    pub lda_window: usize,
    pub learned_mode: Mode,
    pub learned: TrainConfig,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            estimators: vec![EstimatorKind::Otsu, EstimatorKind::Lda, EstimatorKind::Learned],
            train_codes: 16,
            lda_window: 1,
            learned_mode: Mode::Deterministic,
            learned: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FakeSpec {
    pub estimator: EstimatorKind,
    /// Densities whose held-out codes are faked and authenticated; empty
    /// means all.
    pub densities: Vec<f64>,
}

impl Default for FakeSpec {
    fn default() -> Self {
        FakeSpec {
            estimator: EstimatorKind::Learned,
            densities: vec![0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySpec {
    pub train_size: usize,
    pub runs: usize,
    pub nu: f64,
    pub gamma: f64,
    pub c: f64,
    /// One-class subsets: metric names joined by `+`, or `all`.
    pub one_class_subsets: Vec<String>,
    pub two_class_subsets: Vec<String>,
}

impl Default for ClassifySpec {
    fn default() -> Self {
        let mut one_class: Vec<String> = cdp_core::evalreport::metric_pairs()
            .into_iter()
            .map(|(i, j)| format!("{}+{}", MetricVector::NAMES[i], MetricVector::NAMES[j]))
            .collect();
        one_class.push("all".into());
        ClassifySpec {
            train_size: 144,
            runs: 20,
            nu: DEFAULT_NU,
            gamma: DEFAULT_GAMMA,
            c: DEFAULT_C,
            one_class_subsets: one_class,
            two_class_subsets: vec!["all".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSpec {
    pub region_resolution: usize,
}

impl Default for ReportSpec {
    fn default() -> Self {
        ReportSpec { region_resolution: 60 }
    }
}

/// Metric indices of a subset such as `hamming+corr` or `all`.
pub fn parse_subset(s: &str) -> Result<Vec<usize>> {
    if s == "all" {
        return Ok((0..4).collect());
    }
    let mut idx = Vec::new();
    for name in s.split('+') {
        let i = MetricVector::index_of(name)
            .with_context(|| format!("unknown metric {name:?} in subset {s:?} (hamming, ssim, jaccard, corr)"))?;
        if idx.contains(&i) {
            bail!("metric {name} repeated in subset {s:?}");
        }
        idx.push(i);
    }
    Ok(idx)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn fake_densities(&self) -> Vec<f64> {
        if self.fakes.densities.is_empty() {
            self.templates.densities.clone()
        } else {
            self.fakes.densities.clone()
        }
    }

    pub fn held_out_per_density(&self) -> usize {
        self.templates.count.saturating_sub(self.attack.train_codes)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.templates;
        if t.count == 0 {
            bail!("templates.count must be >= 1");
        }
        if t.densities.is_empty() {
            bail!("templates.densities is empty");
        }
        for (i, d) in t.densities.iter().enumerate() {
            if !(*d > 0.0 && *d < 1.0) {
                bail!("density {d} must lie in (0, 1)");
            }
            if t.densities[..i].contains(d) {
                bail!("density {d} listed twice");
            }
        }
        if self.printers.is_empty() {
            bail!("no printers configured");
        }
        for (tag, p) in &self.printers {
            if tag.is_empty() || tag.contains(['/', ',', ' ']) {
                bail!("printer tag {tag:?} must be non-empty without '/', ',' or spaces");
            }
            p.resolve(tag)?;
        }
        if self.attack.train_codes == 0 || self.attack.train_codes >= t.count {
            bail!(
                "attack.train_codes = {} must lie in 1..{} (templates.count)",
                self.attack.train_codes,
                t.count
            );
        }
        self.attack.learned.validate()?;
        if self.attack.estimators.contains(&EstimatorKind::Learned) {
            let crop = self.attack.learned.crop;
            if t.rows < crop || t.cols < crop {
                bail!("learned estimator crops {crop} symbols but templates are {}x{}", t.rows, t.cols);
            }
            if self.attack.train_codes < 8 {
                bail!("learned estimator needs attack.train_codes >= 8");
            }
        }
        if self.attack.estimators.is_empty() {
            bail!("attack.estimators is empty");
        }
        if !self.attack.estimators.contains(&self.fakes.estimator) {
            bail!("fakes.estimator {} is not among attack.estimators", self.fakes.estimator.name());
        }
        for d in &self.fakes.densities {
            if !t.densities.contains(d) {
                bail!("fakes density {d} is not a template density");
            }
        }
        self.auth.validate()?;
        let c = &self.classify;
        let originals = self.held_out_per_density() * self.fake_densities().len();
        if originals < c.train_size + MIN_HELD_OUT {
            bail!(
                "only {originals} held-out originals per printer; classify.train_size {} needs >= {}",
                c.train_size,
                c.train_size + MIN_HELD_OUT
            );
        }
        if c.train_size < 10 {
            bail!("classify.train_size must be >= 10");
        }
        if c.runs == 0 {
            bail!("classify.runs must be >= 1");
        }
        for s in c.one_class_subsets.iter().chain(&c.two_class_subsets) {
            parse_subset(s)?;
        }
        if self.report.region_resolution < 2 {
            bail!("report.region_resolution must be >= 2");
        }
        Ok(())
    }

    pub fn printer(&self, tag: &str) -> Result<ChannelParams> {
        match self.printers.get(tag) {
            Some(p) => p.resolve(tag),
            None => bail!(
                "unknown printer tag {tag:?} (configured: {})",
                self.printers.keys().cloned().collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 3
        [templates]
        rows = 32
        cols = 32
        densities = [0.3, 0.5]
        count = 32
        [printers.P55]
        [printers.P76]
        [classify]
        train_size = 10
    "#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.attack.train_codes, 16);
        assert_eq!(cfg.classify.one_class_subsets.len(), 7);
        assert_eq!(cfg.printer("P55").unwrap(), ChannelParams::p55());
        assert!(cfg.printer("P99").is_err());
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_apply() {
        let spec = PrinterSpec {
            preset: Some("P55".into()),
            dot_gain: Some(0.1),
            ..PrinterSpec::default()
        };
        assert_eq!(spec.resolve("mine").unwrap().dot_gain, 0.1);
        assert!(PrinterSpec::default().resolve("mine").is_err());
    }

    #[test]
    fn invalid_counts_are_rejected() {
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.classify.train_size = 100;
        assert!(cfg.validate().is_err());
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.templates.count = 0;
        assert!(cfg.validate().is_err());
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.classify.train_size = 6;
        assert!(cfg.validate().is_err());
        assert!(toml::from_str::<ExperimentConfig>(&MINIMAL.replace("seed = 3", "sed = 3")).is_err());
    }

    #[test]
    fn subsets_parse() {
        assert_eq!(parse_subset("all").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_subset("corr+hamming").unwrap(), vec![3, 0]);
        assert!(parse_subset("corr+corr").is_err());
        assert!(parse_subset("psnr").is_err());
    }
}
