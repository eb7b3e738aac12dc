//! The TOML run configuration for `navinstr generate`.
//!
//! Relative paths are resolved against the directory holding the config
//! file. A minimal file:
//!
//! ```toml
//! seed = 7
//! output = "dataset.jsonl"
//!
//! [sampling]
//! graphs = ["graphs/grid.json"]
//! trajectories_per_graph = 5
//!
//! [[variants]]
//! alpha = 0.5
//! k = 4
//!
//! [providers.detector]
//! kind = "fixture"
//! path = "detections.json"
//!
//! [providers.embedder]
//! kind = "fixture"
//! path = "embeddings.json"
//!
//! [providers.lm]
//! kind = "toy"
//! path = "toy_lm.json"
//!
//! [landmarks]
//! categories = "categories.json"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::entities::LandmarkEmbedding;
use crate::error::{Error, Result};
use crate::landmarks::PanoramaGeometry;
use crate::speaker::{DecodingParams, REWRITE_PROMPT};

/// Which waypoint's panorama a sub-trajectory's landmark is searched in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkAnchor {
    /// Only the sub-trajectory's final waypoint, facing the direction the
    /// agent arrives in.
    #[default]
    ExitWaypoint,
    /// Every waypoint of the sub-trajectory, each facing its own next step;
    /// bounds come from the panorama the winning detection was found in.
    DetectionWaypoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderSpec {
    /// JSON fixture served in-process.
    Fixture { path: PathBuf },
    /// In-process bigram language model from a JSON file.
    Toy { path: PathBuf },
    /// External program speaking the NDJSON protocol on stdin/stdout.
    Command { command: Vec<String> },
}

impl ProviderSpec {
    fn resolve(&mut self, base: &Path) {
        match self {
            ProviderSpec::Fixture { path } | ProviderSpec::Toy { path } => *path = base.join(&*path),
            ProviderSpec::Command { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Providers {
    pub detector: ProviderSpec,
    pub embedder: ProviderSpec,
    pub lm: ProviderSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub graphs: Vec<PathBuf>,
    pub trajectories_per_graph: usize,
    #[serde(default = "default_min_steps")]
    pub min_steps: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub min_length: Option<f64>,
    #[serde(default)]
    pub max_length: Option<f64>,
}

fn default_min_steps() -> usize {
    5
}
fn default_max_steps() -> usize {
    7
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub alpha: f64,
    pub k: usize,
}

/// Six variants: alpha in {0.3, 0.5, 0.7} times k in {4, 8}.
pub fn default_variants() -> Vec<Variant> {
    let mut v = Vec::new();
    for alpha in [0.3, 0.5, 0.7] {
        for k in [4, 8] {
            v.push(Variant { alpha, k });
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkConfig {
    pub categories: PathBuf,
    #[serde(default)]
    pub anchor: LandmarkAnchor,
    #[serde(default)]
    pub panorama: PanoramaGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkingConfig {
    #[serde(default = "yes")]
    pub merge_straight: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatingConfig {
    /// Optional replacement for the built-in 108-template library.
    #[serde(default)]
    pub library: Option<PathBuf>,
    /// With this off, crafted instructions never mention landmarks.
    #[serde(default = "yes")]
    pub landmarks: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerConfig {
    #[serde(default = "default_prompt")]
    pub prompt: String,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    /// JSON map `scan/viewpoint` -> 36 view vectors.
    #[serde(default)]
    pub pano_features: Option<PathBuf>,
}

fn default_prompt() -> String {
    REWRITE_PROMPT.to_string()
}
fn default_max_len() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityConfig {
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub embedding: LandmarkEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblyConfig {
    #[serde(default = "default_joiner")]
    pub joiner: String,
}

fn default_joiner() -> String {
    crate::assembly::DEFAULT_JOINER.to_string()
}

fn yes() -> bool {
    true
}

fn default_workers() -> usize {
    1
}

macro_rules! default_from_empty {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                toml::from_str("").expect("all fields have defaults")
            }
        }
    )*};
}
default_from_empty!(ChunkingConfig, TemplatingConfig, SpeakerConfig, EntityConfig, AssemblyConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output: PathBuf,
    pub sampling: SamplingConfig,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    pub providers: Providers,
    pub landmarks: LandmarkConfig,
    #[serde(default)]
    pub chunking: ChunkingConfig,
    #[serde(default)]
    pub templating: TemplatingConfig,
    #[serde(default)]
    pub speaker: SpeakerConfig,
    #[serde(default)]
    pub entities: EntityConfig,
    #[serde(default)]
    pub assembly: AssemblyConfig,
}

impl PipelineConfig {
    /// Parses and validates; relative paths are joined onto `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| *p = base.join(&*p);
        join(&mut self.output);
        self.sampling.graphs.iter_mut().for_each(join);
        self.providers.detector.resolve(base);
        self.providers.embedder.resolve(base);
        self.providers.lm.resolve(base);
        join(&mut self.landmarks.categories);
        self.templating.library.iter_mut().for_each(join);
        self.speaker.pano_features.iter_mut().for_each(join);
        self.entities.lexicon.iter_mut().for_each(join);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.variants.is_empty() {
            return bad("at least one decoding variant is required".into());
        }
        for v in &self.variants {
            DecodingParams { k: v.k, alpha: v.alpha, max_len: self.speaker.max_len }
                .validate()
                .map_err(|e| Error::Config(format!("variant (alpha={}, k={}): {e}", v.alpha, v.k)))?;
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.sampling.graphs.is_empty() {
            return bad("no graphs listed under [sampling]".into());
        }
        let s = &self.sampling;
        if s.min_steps == 0 || s.min_steps > s.max_steps {
            return bad(format!("invalid step range {}..={}", s.min_steps, s.max_steps));
        }
        if let (Some(lo), Some(hi)) = (s.min_length, s.max_length) {
            if lo > hi {
                return bad(format!("min_length {lo} exceeds max_length {hi}"));
            }
        }
        for (name, spec) in
            [("detector", &self.providers.detector), ("embedder", &self.providers.embedder), ("lm", &self.providers.lm)]
        {
            match spec {
                ProviderSpec::Command { command } if command.is_empty() => {
                    return bad(format!("provider `{name}` has an empty command"));
                }
                ProviderSpec::Toy { .. } if name != "lm" => {
                    return bad(format!("provider `{name}` cannot be a toy language model"));
                }
                ProviderSpec::Fixture { .. } if name == "lm" => {
                    return bad("the language model provider must be `toy` or `command`".into());
                }
                _ => {}
            }
        }
        let p = &self.landmarks.panorama;
        if p.width == 0 || p.height == 0 || !p.center_heading.is_finite() {
            return bad("panorama geometry must have positive size and a finite center heading".into());
        }
        Ok(())
    }
}
