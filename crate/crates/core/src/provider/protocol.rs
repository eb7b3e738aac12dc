//! Newline-delimited JSON messages exchanged with provider processes.
//!
//! Every request carries an integer `id` and an `op`; the matching response
//! echoes the `id`. A response with an `error` field reports a failed
//! request.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Candidate, VocabularySpec};
use crate::error::Error;
use crate::landmarks::{BBox, Detection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub body: RequestBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RequestBody {
    Detect { scan: String, viewpoint: String, categories: Vec<String>, pano_width: u32, pano_height: u32 },
    EmbedText { text: String },
    EmbedImage { scan: String, viewpoint: String, bbox: BBox },
    LmStep { context: Vec<u32>, cond: serde_json::Value, k: usize },
    Vocab,
}

impl RequestBody {
    pub fn op(&self) -> &'static str {
        match self {
            RequestBody::Detect { .. } => "detect",
            RequestBody::EmbedText { .. } => "embed_text",
            RequestBody::EmbedImage { .. } => "embed_image",
            RequestBody::LmStep { .. } => "lm_step",
            RequestBody::Vocab => "vocab",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<Detection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Candidate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vec: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<VocabularySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn error(id: u64, message: impl Into<String>) -> Self {
        Self { id, error: Some(message.into()), ..Default::default() }
    }
}

/// Server side of the protocol: something that can answer one request.
pub trait RequestHandler {
    fn handle(&self, request: &Request) -> Response;
}

/// Answers requests line by line until the reader reaches end of input.
/// Malformed lines get an error response with id 0.
pub fn serve<R: BufRead, W: Write>(reader: R, mut writer: W, handler: &dyn RequestHandler) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => handler.handle(&req),
            Err(e) => Response::error(request_id_hint(&line), format!("malformed request: {e}")),
        };
        serde_json::to_writer(&mut writer, &response)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

fn request_id_hint(line: &str) -> u64 {
    serde_json::from_str::<serde_json::Value>(line).ok().and_then(|v| v.get("id").and_then(|i| i.as_u64())).unwrap_or(0)
}

pub(crate) fn protocol_error(provider: &str, id: u64, message: impl Into<String>) -> Error {
    Error::Provider { provider: provider.to_string(), id, message: message.into() }
}
