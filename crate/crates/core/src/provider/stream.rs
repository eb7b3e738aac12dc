use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use super::protocol::{protocol_error, Request, RequestBody, Response};
use super::{Candidate, DetectQuery, Detector, Embedder, LanguageModel, VocabularySpec};
use crate::error::{Error, Result};
use crate::landmarks::{BBox, Detection};

struct Channel {
    writer: Box<dyn Write + Send>,
    reader: Box<dyn BufRead + Send>,
    next_id: u64,
    /// Responses that arrived while waiting for a different id.
    parked: HashMap<u64, Response>,
}

/// Client for a provider speaking the NDJSON protocol over a byte stream.
///
/// Calls are serialized through a mutex; responses are matched to requests
/// by id, and out-of-order responses are parked until asked for.
pub struct StreamProvider {
    name: String,
    channel: Mutex<Channel>,
    child: Option<Mutex<Child>>,
}

impl StreamProvider {
    pub fn new(
        name: impl Into<String>,
        writer: impl Write + Send + 'static,
        reader: impl BufRead + Send + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            channel: Mutex::new(Channel {
                writer: Box::new(writer),
                reader: Box::new(reader),
                next_id: 1,
                parked: HashMap::new(),
            }),
            child: None,
        }
    }

    /// Starts `command[0]` with arguments `command[1..]` and talks to it over
    /// its stdin/stdout.
    pub fn spawn(name: impl Into<String>, command: &[String]) -> Result<Self> {
        let name = name.into();
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::ProviderStartup { provider: name.clone(), message: "empty command".into() })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::ProviderStartup {
                provider: name.clone(),
                message: format!("cannot start `{program}`: {e}"),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut provider = Self::new(name, stdin, BufReader::new(stdout));
        provider.child = Some(Mutex::new(child));
        Ok(provider)
    }

    pub fn call(&self, body: RequestBody) -> Result<Response> {
        let mut ch = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        let id = ch.next_id;
        ch.next_id += 1;
        let line =
            serde_json::to_string(&Request { id, body }).map_err(|e| protocol_error(&self.name, id, e.to_string()))?;
        ch.writer
            .write_all(line.as_bytes())
            .and_then(|_| ch.writer.write_all(b"\n"))
            .and_then(|_| ch.writer.flush())
            .map_err(|e| protocol_error(&self.name, id, format!("write failed: {e}")))?;

        loop {
            if let Some(resp) = ch.parked.remove(&id) {
                return self.check(resp);
            }
            let mut buf = String::new();
            let n = ch
                .reader
                .read_line(&mut buf)
                .map_err(|e| protocol_error(&self.name, id, format!("read failed: {e}")))?;
            if n == 0 {
                return Err(protocol_error(&self.name, id, "provider closed the stream"));
            }
            if buf.trim().is_empty() {
                continue;
            }
            let resp: Response = serde_json::from_str(&buf)
                .map_err(|e| protocol_error(&self.name, id, format!("malformed response: {e}")))?;
            if resp.id == id {
                return self.check(resp);
            }
            ch.parked.insert(resp.id, resp);
        }
    }

    fn check(&self, resp: Response) -> Result<Response> {
        match resp.error {
            Some(message) => Err(protocol_error(&self.name, resp.id, message)),
            None => Ok(resp),
        }
    }
}

impl Drop for StreamProvider {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            let mut child = child.lock().unwrap_or_else(|p| p.into_inner());
            // closing stdin ends the provider's read loop
            if let Ok(mut ch) = self.channel.lock() {
                ch.writer = Box::new(std::io::sink());
            }
            let _ = child.wait();
        }
    }
}

fn missing(provider: &str, id: u64, field: &str) -> Error {
    protocol_error(provider, id, format!("response lacks `{field}`"))
}

impl Detector for StreamProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn detect(&self, query: &DetectQuery<'_>) -> Result<Vec<Detection>> {
        let resp = self.call(RequestBody::Detect {
            scan: query.scan.into(),
            viewpoint: query.viewpoint.into(),
            categories: query.categories.to_vec(),
            pano_width: query.pano_width,
            pano_height: query.pano_height,
        })?;
        let id = resp.id;
        resp.detections.ok_or_else(|| missing(&self.name, id, "detections"))
    }
}

impl Embedder for StreamProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        let resp = self.call(RequestBody::EmbedText { text: text.into() })?;
        let id = resp.id;
        resp.vec.ok_or_else(|| missing(&self.name, id, "vec"))
    }

    fn embed_image(&self, scan: &str, viewpoint: &str, bbox: &BBox) -> Result<Vec<f64>> {
        let resp =
            self.call(RequestBody::EmbedImage { scan: scan.into(), viewpoint: viewpoint.into(), bbox: *bbox })?;
        let id = resp.id;
        resp.vec.ok_or_else(|| missing(&self.name, id, "vec"))
    }
}

impl LanguageModel for StreamProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn vocabulary(&self) -> Result<VocabularySpec> {
        let resp = self.call(RequestBody::Vocab)?;
        let id = resp.id;
        resp.vocab.ok_or_else(|| missing(&self.name, id, "vocab"))
    }

    fn step(&self, context: &[u32], cond: &serde_json::Value, k: usize) -> Result<Vec<Candidate>> {
        let resp = self.call(RequestBody::LmStep { context: context.to_vec(), cond: cond.clone(), k })?;
        let id = resp.id;
        resp.candidates.ok_or_else(|| missing(&self.name, id, "candidates"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn parked_responses_are_matched_by_id() {
        // the "server" answered request 2 before request 1
        let script = "{\"id\":2,\"vec\":[2.0]}\n{\"id\":1,\"vec\":[1.0]}\n";
        let p = StreamProvider::new("emb", std::io::sink(), Cursor::new(script.as_bytes().to_vec()));
        assert_eq!(p.embed_text("a").unwrap(), vec![1.0]);
        assert_eq!(p.embed_text("b").unwrap(), vec![2.0]);
    }

    #[test]
    fn error_response_carries_request_id() {
        let script = "{\"id\":1,\"error\":\"boom\"}\n";
        let p = StreamProvider::new("det", std::io::sink(), Cursor::new(script.as_bytes().to_vec()));
        let err = p.embed_text("x").unwrap_err();
        match err {
            Error::Provider { provider, id, message } => {
                assert_eq!((provider.as_str(), id, message.as_str()), ("det", 1, "boom"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn closed_stream_is_an_error() {
        let p = StreamProvider::new("lm", std::io::sink(), Cursor::new(Vec::new()));
        assert!(matches!(p.vocabulary(), Err(Error::Provider { .. })));
    }

    #[test]
    fn missing_program_fails_startup() {
        let err = StreamProvider::spawn("detector", &["/nonexistent/provider-bin".into()]).err().unwrap();
        assert!(matches!(err, Error::ProviderStartup { .. }));
        assert!(err.to_string().contains("detector"));
    }
}
