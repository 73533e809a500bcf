//! Run configuration: one TOML document per run, every default expanded
//! before it is logged or hashed.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rankaudit::audit::{TauVariant, BASELINE};
use rankaudit::scorer::ScorerConfig;
use rankaudit::synthetic::SyntheticConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetRef>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    /// Registry name (adult, compas, dutch, law, student) unless `spec` is given.
    pub name: String,
    pub spec: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Used when no CSV is given.
    pub synthetic: Option<SyntheticSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub rows: usize,
    pub seed: u64,
    pub protected_share: f64,
    pub group_gap: f64,
    pub proxy_strength: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        let c = SyntheticConfig::default();
        SyntheticSettings {
            rows: c.rows,
            seed: c.seed,
            protected_share: c.protected_share,
            group_gap: c.group_gap,
            proxy_strength: c.proxy_strength,
        }
    }
}

impl From<&SyntheticSettings> for SyntheticConfig {
    fn from(s: &SyntheticSettings) -> Self {
        SyntheticConfig {
            rows: s.rows,
            seed: s.seed,
            protected_share: s.protected_share,
            group_gap: s.group_gap,
            proxy_strength: s.proxy_strength,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
            seed: 42,
        }
    }
}

fn dir_name() -> String {
    "DIR".into()
}
fn to_name() -> String {
    "TO".into()
}
fn roc_name() -> String {
    "ROC".into()
}
fn eop_name() -> String {
    "EOP".into()
}
fn full_repair() -> f64 {
    1.0
}
fn default_spd_bound() -> f64 {
    0.05
}
fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodConfig {
    Dir {
        #[serde(default = "dir_name")]
        name: String,
        #[serde(default = "full_repair")]
        repair_level: f64,
        /// Numeric columns to repair; empty means all numeric features.
        #[serde(default)]
        columns: Vec<String>,
    },
    ThresholdOptimizer {
        #[serde(default = "to_name")]
        name: String,
    },
    RejectOption {
        #[serde(default = "roc_name")]
        name: String,
        #[serde(default = "default_spd_bound")]
        spd_bound: f64,
    },
    EqualizedOdds {
        #[serde(default = "eop_name")]
        name: String,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Scores produced elsewhere, ingested for audit only.
    External { name: String, scores: PathBuf },
}

impl MethodConfig {
    pub fn name(&self) -> &str {
        match self {
            MethodConfig::Dir { name, .. }
            | MethodConfig::ThresholdOptimizer { name }
            | MethodConfig::RejectOption { name, .. }
            | MethodConfig::EqualizedOdds { name, .. }
            | MethodConfig::External { name, .. } => name,
        }
    }

    pub fn fitted_on_validation(&self) -> bool {
        matches!(
            self,
            MethodConfig::ThresholdOptimizer { .. } | MethodConfig::RejectOption { .. } | MethodConfig::EqualizedOdds { .. }
        )
    }
}

/// How scores become labels in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    FixedThreshold { t: f64 },
    GlobalTopRate { r: f64 },
    /// The same rate inside each group.
    GroupRate { r: f64 },
    /// Global top rate equal to the baseline positive rate at 0.5 on test.
    BaselinePdr,
    /// Global top rate equal to the training base rate.
    BaseRate,
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::FixedThreshold { t } => format!("fixed-threshold-{t}"),
            PolicySpec::GlobalTopRate { r } => format!("global-top-rate-{r}"),
            PolicySpec::GroupRate { r } => format!("group-rate-{r}"),
            PolicySpec::BaselinePdr => "baseline-pdr".into(),
            PolicySpec::BaseRate => "base-rate".into(),
        }
    }

    /// True when the analyst, not the data, fixed the selection rate.
    pub fn is_rate_policy(&self) -> bool {
        !matches!(self, PolicySpec::FixedThreshold { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub tau_variant: TauVariant,
    pub policies: Vec<PolicySpec>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            tau_variant: TauVariant::TauB,
            policies: vec![
                PolicySpec::FixedThreshold { t: 0.5 },
                PolicySpec::BaselinePdr,
                PolicySpec::BaseRate,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub scatter: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: vec![Format::Json, Format::Csv],
            scatter: true,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_toml(&text, &base)
    }

    /// Apply overrides, expand defaults and validate.
    pub fn resolve(mut self, o: &Overrides) -> CliResult<Self> {
        let absolute = |p: &Path| std::path::absolute(p).map_err(|e| CliError::io(p, e));
        self.base_dir = absolute(&self.base_dir)?;
        let base = self.base_dir.clone();
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in self.datasets.iter_mut() {
            for p in [&mut d.spec, &mut d.csv].into_iter().flatten() {
                anchor(p);
            }
        }
        for m in self.methods.iter_mut() {
            if let MethodConfig::External { scores, .. } = m {
                anchor(scores);
            }
        }
        if let Some(dir) = self.output.dir.as_mut() {
            anchor(dir);
        }
        if let Some(out) = &o.out {
            self.output.dir = Some(absolute(out)?);
        }
        if let Some(seed) = o.seed {
            self.split.seed = seed;
            self.scorer.seed = seed;
            for m in self.methods.iter_mut() {
                if let MethodConfig::EqualizedOdds { seed: s, .. } = m {
                    *s = seed;
                }
            }
            for d in self.datasets.iter_mut() {
                if let Some(s) = d.synthetic.as_mut() {
                    s.seed = seed;
                }
            }
        }
        if let Some(f) = o.format {
            self.output.formats = vec![f];
        }
        for d in self.datasets.iter_mut() {
            if d.csv.is_none() && d.synthetic.is_none() {
                d.synthetic = Some(SyntheticSettings::default());
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| self.base_dir.join("out"))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.datasets.is_empty() {
            return bad("at least one [[datasets]] entry is required".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                return bad(format!("dataset name `{}` is used twice", d.name));
            }
            for p in [&d.spec, &d.csv].into_iter().flatten() {
                if !self.resolve_path(p).is_file() {
                    return bad(format!("dataset `{}`: file {} does not exist", d.name, p.display()));
                }
            }
            if d.spec.is_none() && rankaudit::registry::get(&d.name).is_err() {
                return bad(format!("dataset `{}` is not in the registry and has no spec file", d.name));
            }
        }
        let s = &self.split;
        if [s.train, s.validation, s.test].iter().any(|f| !(*f >= 0.0)) || (s.train + s.validation + s.test - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions {} / {} / {} must be nonnegative and sum to 1", s.train, s.validation, s.test));
        }
        self.scorer.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let mut methods = BTreeSet::from([BASELINE.to_string()]);
        for m in &self.methods {
            if !methods.insert(m.name().to_string()) {
                return bad(format!("method name `{}` is not unique", m.name()));
            }
            if m.name().is_empty() || m.name().contains(['/', '\\']) {
                return bad(format!("method name `{}` cannot be used as a file name", m.name()));
            }
            match m {
                MethodConfig::Dir { repair_level, .. } if !(0.0..=1.0).contains(repair_level) => {
                    return bad(format!("{}: repair_level must lie in [0, 1]", m.name()))
                }
                MethodConfig::RejectOption { spd_bound, .. } if !(*spd_bound > 0.0) => {
                    return bad(format!("{}: spd_bound must be positive", m.name()))
                }
                MethodConfig::External { scores, .. } if !self.resolve_path(scores).is_file() => {
                    return bad(format!("{}: score file {} does not exist", m.name(), scores.display()))
                }
                _ => {}
            }
            if m.fitted_on_validation() && s.validation == 0.0 {
                return bad(format!("{} is fitted on the validation partition, which is empty", m.name()));
            }
        }
        if self.audit.policies.is_empty() {
            return bad("at least one decision policy is required".into());
        }
        let mut labels = BTreeSet::new();
        for p in &self.audit.policies {
            let ok = match p {
                PolicySpec::FixedThreshold { t } => (0.0..=1.0).contains(t),
                PolicySpec::GlobalTopRate { r } | PolicySpec::GroupRate { r } => (0.0..=1.0).contains(r),
                _ => true,
            };
            if !ok {
                return bad(format!("policy {} has a parameter outside [0, 1]", p.label()));
            }
            if !labels.insert(p.label()) {
                return bad(format!("policy {} is listed twice", p.label()));
            }
        }
        if self.output.formats.is_empty() {
            return bad("output.formats is empty".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved config with the output directory blanked,
    /// so the same run written to two places hashes the same.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = None;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }
}
