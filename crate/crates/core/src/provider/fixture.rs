//! File-backed stand-ins for the detector and embedding models.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::protocol::{Request, RequestBody, RequestHandler, Response};
use super::{DetectQuery, Detector, Embedder, LanguageModel};
use crate::error::{Error, Result};
use crate::landmarks::{BBox, Detection};

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// Serves detections from a JSON map keyed by `scan/viewpoint`. Only
/// detections whose label is among the requested categories are returned.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixtureDetector {
    #[serde(skip)]
    name: String,
    #[serde(flatten)]
    detections: BTreeMap<String, Vec<Detection>>,
}

impl FixtureDetector {
    pub fn new(detections: BTreeMap<String, Vec<Detection>>) -> Self {
        Self { name: "fixture-detector".into(), detections }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut d: Self = read_json(path)?;
        d.name = format!("fixture-detector:{}", file_name(path));
        Ok(d)
    }
}

impl Detector for FixtureDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn detect(&self, query: &DetectQuery<'_>) -> Result<Vec<Detection>> {
        let key = format!("{}/{}", query.scan, query.viewpoint);
        Ok(self
            .detections
            .get(&key)
            .map(|dets| {
                dets.iter()
                    .filter(|d| query.categories.iter().any(|c| c.eq_ignore_ascii_case(&d.label)))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default())
    }
}

/// Serves embeddings from a JSON file:
/// `{"text": {phrase: vec}, "image": {"scan/viewpoint/x0,y0,x1,y1": vec}}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixtureEmbedder {
    #[serde(skip)]
    name: String,
    #[serde(default)]
    pub text: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub image: BTreeMap<String, Vec<f64>>,
}

impl FixtureEmbedder {
    pub fn new(text: BTreeMap<String, Vec<f64>>, image: BTreeMap<String, Vec<f64>>) -> Self {
        Self { name: "fixture-embedder".into(), text, image }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut e: Self = read_json(path)?;
        e.name = format!("fixture-embedder:{}", file_name(path));
        Ok(e)
    }

    pub fn image_key(scan: &str, viewpoint: &str, bbox: &BBox) -> String {
        format!("{scan}/{viewpoint}/{},{},{},{}", bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max)
    }
}

impl Embedder for FixtureEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        self.text.get(text).cloned().ok_or_else(|| Error::Provider {
            provider: self.name.clone(),
            id: 0,
            message: format!("no text embedding for \"{text}\""),
        })
    }

    fn embed_image(&self, scan: &str, viewpoint: &str, bbox: &BBox) -> Result<Vec<f64>> {
        let key = Self::image_key(scan, viewpoint, bbox);
        self.image.get(&key).cloned().ok_or_else(|| Error::Provider {
            provider: self.name.clone(),
            id: 0,
            message: format!("no image embedding for \"{key}\""),
        })
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Answers protocol requests from in-process providers, so that fixtures
/// can be served to the pipeline through a subprocess.
#[derive(Default)]
pub struct MockProvider {
    pub detector: Option<Box<dyn Detector>>,
    pub embedder: Option<Box<dyn Embedder>>,
    pub lm: Option<Box<dyn LanguageModel>>,
}

impl RequestHandler for MockProvider {
    fn handle(&self, request: &Request) -> Response {
        let id = request.id;
        let unsupported = || Response::error(id, format!("unsupported op `{}`", request.body.op()));
        let result = match &request.body {
            RequestBody::Detect { scan, viewpoint, categories, pano_width, pano_height } => match &self.detector {
                Some(d) => d
                    .detect(&DetectQuery {
                        scan,
                        viewpoint,
                        categories,
                        pano_width: *pano_width,
                        pano_height: *pano_height,
                    })
                    .map(|dets| Response { id, detections: Some(dets), ..Default::default() }),
                None => return unsupported(),
            },
            RequestBody::EmbedText { text } => match &self.embedder {
                Some(e) => e.embed_text(text).map(|v| Response { id, vec: Some(v), ..Default::default() }),
                None => return unsupported(),
            },
            RequestBody::EmbedImage { scan, viewpoint, bbox } => match &self.embedder {
                Some(e) => {
                    e.embed_image(scan, viewpoint, bbox).map(|v| Response { id, vec: Some(v), ..Default::default() })
                }
                None => return unsupported(),
            },
            RequestBody::LmStep { context, cond, k } => match &self.lm {
                Some(lm) => {
                    lm.step(context, cond, *k).map(|c| Response { id, candidates: Some(c), ..Default::default() })
                }
                None => return unsupported(),
            },
            RequestBody::Vocab => match &self.lm {
                Some(lm) => lm.vocabulary().map(|v| Response { id, vocab: Some(v), ..Default::default() }),
                None => return unsupported(),
            },
        };
        result.unwrap_or_else(|e| Response::error(id, e.to_string()))
    }
}
