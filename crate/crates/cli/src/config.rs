use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use framing::baselines::{LdaConfig, Method};
use framing::corpus::CorpusConfig;
use framing::promptgen::{AnswerMode, PromptGenConfig, Structure};
use framing::representation::NormalizationMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable that overrides the configured scorer with an HTTP
/// backend at the given URL.
pub const SCORER_URL_ENV: &str = "FRAMING_SCORER_URL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerBackend {
    Stub(String),
    Http(String),
}

impl FromStr for ScorerBackend {
    type Err = anyhow::Error;

    /// `stub=<path>` or `http=<url>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some(("stub", p)) if !p.is_empty() => Ok(ScorerBackend::Stub(p.to_string())),
            Some(("http", u)) if !u.is_empty() => Ok(ScorerBackend::Http(u.to_string())),
            _ => bail!("backend must be stub=<path> or http=<url>, got {s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthKind {
    Survey,
    Leaning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthSpec {
    pub name: String,
    pub kind: GroundTruthKind,
    pub path: String,
    /// Survey baseline column; detected by an "all" prefix when absent.
    #[serde(default)]
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub max_words: usize,
    pub dev_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let c = CorpusConfig::default();
        CorpusSection {
            max_words: c.max_words,
            dev_fraction: c.dev_fraction,
        }
    }
}

/// A prompt-generation method, or a filtered view of the manual prompts such
/// as `manual-declarative-single`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PromptMethod {
    Random,
    Attention,
    BigramOuter,
    BigramInner,
    TrigramInner,
    Manual(Vec<String>),
}

impl PromptMethod {
    fn manual_filter_ok(part: &str) -> bool {
        Structure::ALL
            .iter()
            .any(|s| s.as_str() == part || s.family() == part)
            || [AnswerMode::Qa, AnswerMode::Single]
                .iter()
                .any(|m| m.as_str() == part)
    }

    /// Whether a manual prompt id (`topic/manual/structure/mode/...`) passes
    /// this method's filter.
    pub fn accepts_manual_id(&self, id: &str) -> bool {
        let PromptMethod::Manual(filter) = self else {
            return false;
        };
        let parts: Vec<&str> = id.split('/').collect();
        let (Some(structure), Some(mode)) = (parts.get(2), parts.get(3)) else {
            return false;
        };
        let family = Structure::ALL
            .iter()
            .find(|s| s.as_str() == *structure)
            .map(|s| s.family())
            .unwrap_or(structure);
        filter
            .iter()
            .all(|f| f == structure || f == family || f == mode)
    }
}

impl fmt::Display for PromptMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptMethod::Random => f.write_str("random"),
            PromptMethod::Attention => f.write_str("attention"),
            PromptMethod::BigramOuter => f.write_str("bigram_outer"),
            PromptMethod::BigramInner => f.write_str("bigram_inner"),
            PromptMethod::TrigramInner => f.write_str("trigram_inner"),
            PromptMethod::Manual(filter) if filter.is_empty() => f.write_str("manual"),
            PromptMethod::Manual(filter) => write!(f, "manual-{}", filter.join("-")),
        }
    }
}

impl FromStr for PromptMethod {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random" => PromptMethod::Random,
            "attention" => PromptMethod::Attention,
            "bigram_outer" => PromptMethod::BigramOuter,
            "bigram_inner" => PromptMethod::BigramInner,
            "trigram_inner" => PromptMethod::TrigramInner,
            "manual" => PromptMethod::Manual(Vec::new()),
            other => match other.strip_prefix("manual-") {
                Some(rest) => {
                    let parts: Vec<String> = rest.split('-').map(String::from).collect();
                    if let Some(bad) = parts.iter().find(|p| !Self::manual_filter_ok(p)) {
                        bail!("unknown manual prompt filter {bad:?} in {s:?}");
                    }
                    PromptMethod::Manual(parts)
                }
                None => bail!("unknown prompt method {s:?}"),
            },
        })
    }
}

fn default_families() -> Vec<String> {
    vec!["roberta".into()]
}
fn default_methods() -> Vec<String> {
    vec!["bigram_outer".into()]
}
fn default_normalizations() -> Vec<NormalizationMode> {
    NormalizationMode::ALL.to_vec()
}
fn default_baselines() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_k() -> usize {
    10
}
fn default_seed() -> u64 {
    42
}
fn default_in_flight() -> usize {
    framing::scorer::DEFAULT_MAX_IN_FLIGHT
}
fn default_bins() -> usize {
    20
}
fn default_extremes() -> usize {
    5
}

/// The run configuration file (TOML). Relative paths resolve against the
/// directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topics: Vec<String>,
    pub sources: Vec<String>,
    #[serde(default = "default_families")]
    pub families: Vec<String>,
    #[serde(default = "default_methods")]
    pub prompt_methods: Vec<String>,
    #[serde(default = "default_normalizations")]
    pub normalizations: Vec<NormalizationMode>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: String,
    #[serde(default)]
    pub corpus_dir: Option<String>,
    /// Fixed prompt files `<dir>/<topic>/<method>.jsonl` used instead of
    /// generating prompts.
    #[serde(default)]
    pub prompts_dir: Option<String>,
    /// Manual template inventory (JSON); a built-in set is used otherwise.
    #[serde(default)]
    pub templates: Option<String>,
    /// Topic terms for the built-in manual templates, per topic.
    #[serde(default)]
    pub topic_terms: BTreeMap<String, Vec<String>>,
    pub scorer: ScorerBackend,
    #[serde(default)]
    pub ground_truth: Vec<GroundTruthSpec>,
    #[serde(default = "default_baselines")]
    pub baselines: Vec<Method>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_extremes")]
    pub extremes: usize,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub promptgen: PromptGenConfig,
    #[serde(default)]
    pub lda: LdaConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub topic: Option<String>,
    pub method: Option<String>,
    pub normalization: Option<String>,
    pub backend: Option<String>,
    pub out: Option<PathBuf>,
    pub scorer_url: Option<String>,
}

/// A loaded, validated configuration with resolved paths.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub prompt_methods: Vec<PromptMethod>,
    pub config_sha256: String,
    /// `--method` filter, applied to prompt methods and baseline methods.
    pub method_filter: Option<String>,
}

impl RunConfig {
    pub fn corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            max_words: self.corpus.max_words,
            dev_fraction: self.corpus.dev_fraction,
            split_seed: self.seed,
        }
    }

    pub fn promptgen_config(&self) -> PromptGenConfig {
        PromptGenConfig {
            seed: self.seed,
            ..self.promptgen.clone()
        }
    }

    pub fn lda_config(&self) -> LdaConfig {
        LdaConfig {
            seed: self.seed,
            ..self.lda.clone()
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Run {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Run> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();

        if let Some(url) = overrides.scorer_url.as_ref().filter(|u| !u.is_empty()) {
            config.scorer = ScorerBackend::Http(url.clone());
        }
        if let Some(b) = &overrides.backend {
            config.scorer = b.parse()?;
        }
        if let Some(t) = &overrides.topic {
            ensure!(
                config.topics.contains(t),
                "topic {t:?} is not configured (have {:?})",
                config.topics
            );
            config.topics = vec![t.clone()];
        }
        if let Some(n) = &overrides.normalization {
            let mode: NormalizationMode = n.parse()?;
            config.normalizations = vec![mode];
        }
        let out_dir = match &overrides.out {
            Some(o) => o.clone(),
            None => base_dir.join(&config.output_dir),
        };

        let mut hashed = config.clone();
        hashed.output_dir = String::new();
        let config_sha256 = sha256_hex(serde_json::to_string(&hashed)?.as_bytes());

        let mut run = Run {
            prompt_methods: Vec::new(),
            config,
            base_dir,
            out_dir,
            config_sha256,
            method_filter: overrides.method.clone(),
        };
        run.validate()?;
        Ok(run)
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        self.base_dir.join(p)
    }

    fn validate(&mut self) -> Result<()> {
        let c = &self.config;
        ensure!(!c.topics.is_empty(), "config lists no topics");
        ensure!(
            c.sources.len() >= 3,
            "similarity rankings need at least 3 sources, config lists {}",
            c.sources.len()
        );
        let mut uniq = c.sources.clone();
        uniq.sort();
        uniq.dedup();
        ensure!(uniq.len() == c.sources.len(), "duplicate source in config");
        ensure!(!c.families.is_empty(), "config lists no model families");
        ensure!(!c.normalizations.is_empty(), "config lists no normalization modes");
        ensure!(c.k >= 1, "k must be at least 1");
        ensure!(c.max_in_flight >= 1, "max_in_flight must be at least 1");
        c.corpus_config().validate()?;
        c.promptgen_config().validate()?;
        c.lda_config()
            .validate()
            .map_err(|e| anyhow::anyhow!("lda: {e}"))?;
        for name in c
            .topics
            .iter()
            .chain(&c.sources)
            .chain(&c.families)
            .chain(c.ground_truth.iter().map(|g| &g.name))
        {
            ensure!(
                !name.is_empty() && !name.contains(['/', '\\', ':']) && name != "." && name != "..",
                "name {name:?} cannot be used as a path component or model key part"
            );
        }

        let mut methods: Vec<PromptMethod> = c
            .prompt_methods
            .iter()
            .map(|m| m.parse())
            .collect::<Result<_>>()?;
        let mut baselines = c.baselines.clone();
        if let Some(f) = &self.method_filter {
            let as_prompt = f.parse::<PromptMethod>().ok().filter(|m| methods.contains(m));
            let as_baseline = f.parse::<Method>().ok().filter(|m| baselines.contains(m));
            ensure!(
                as_prompt.is_some() || as_baseline.is_some(),
                "method {f:?} is not configured"
            );
            methods.retain(|m| Some(m) == as_prompt.as_ref());
            baselines.retain(|m| Some(*m) == as_baseline);
        }
        let mut names: Vec<&str> = c.ground_truth.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        ensure!(
            names.windows(2).all(|w| w[0] != w[1]),
            "duplicate ground truth name"
        );

        let must_exist = |label: &str, p: &str, dir: bool| -> Result<()> {
            let path = self.resolve(p);
            let ok = if dir { path.is_dir() } else { path.is_file() };
            ensure!(ok, "{label} {} does not exist", path.display());
            Ok(())
        };
        if let ScorerBackend::Stub(p) = &c.scorer {
            must_exist("stub table", p, false)?;
        }
        for g in &c.ground_truth {
            must_exist("ground truth", &g.path, false)?;
        }
        if let Some(p) = &c.corpus_dir {
            must_exist("corpus directory", p, true)?;
        }
        if let Some(p) = &c.prompts_dir {
            must_exist("prompts directory", p, true)?;
        }
        if let Some(p) = &c.templates {
            must_exist("template file", p, false)?;
        }
        self.prompt_methods = methods;
        self.config.baselines = baselines;
        Ok(())
    }

    /// Baseline methods after `--method` filtering.
    pub fn baselines(&self) -> &[Method] {
        &self.config.baselines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_method_names() {
        for s in ["random", "attention", "bigram_outer", "manual", "manual-declarative-single"] {
            assert_eq!(s.parse::<PromptMethod>().unwrap().to_string(), s);
        }
        assert!("manual-sideways".parse::<PromptMethod>().is_err());
        assert!("ngram".parse::<PromptMethod>().is_err());
    }

    #[test]
    fn manual_filters_match_ids() {
        let m: PromptMethod = "manual-association-qa".parse().unwrap();
        assert!(m.accepts_manual_id("aca/manual/association_pre/qa/term/good"));
        assert!(!m.accepts_manual_id("aca/manual/association_pre/single/term/good-bad"));
        assert!(!m.accepts_manual_id("aca/manual/declarative/qa/term/good"));
        let all: PromptMethod = "manual".parse().unwrap();
        assert!(all.accepts_manual_id("aca/manual/declarative/qa/term/good"));
    }

    #[test]
    fn backend_flag() {
        assert_eq!(
            "http=http://x:1".parse::<ScorerBackend>().unwrap(),
            ScorerBackend::Http("http://x:1".into())
        );
        assert!("grpc=x".parse::<ScorerBackend>().is_err());
    }
}
