//! Sub-pair integration, the dataset record format, record validation and
//! dataset statistics.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entities::EntitySpan;
use crate::error::{Error, Result};
use crate::landmarks::{BBox, Landmark};
use crate::navgraph::ConnectivityGraph;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_JOINER: &str = ". ";

/// One sub-trajectory with its sub-instruction and optional entity match.
/// Entity offsets are local to `sub_instruction`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPair {
    pub steps: Range<usize>,
    pub sub_instruction: String,
    pub entity: Option<EntitySpan>,
    pub landmark: Option<Landmark>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedSegment {
    pub steps: Range<usize>,
    pub text_span: Range<usize>,
    pub entity: Option<EntitySpan>,
    pub landmark: Option<Landmark>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedInstruction {
    pub instruction: String,
    pub segments: Vec<IntegratedSegment>,
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {
            let mut out = String::with_capacity(s.len());
            out.push(c.to_ascii_uppercase());
            out.push_str(chars.as_str());
            out
        }
        _ => s.to_string(),
    }
}

/// Joins sub-instructions into one instruction and moves entity spans into
/// its coordinates.
///
/// Each segment is trimmed of surrounding whitespace and trailing periods,
/// its first letter is upper-cased if ASCII, segments are joined with
/// `joiner` and a final period is appended. Upper-casing an ASCII letter
/// keeps byte lengths, so a local span `[s, e)` becomes
/// `[offset + s - lead, offset + e - lead)` where `lead` is the trimmed
/// prefix length.
pub fn integrate_sub_pairs(pairs: &[SubPair], joiner: &str) -> Result<IntegratedInstruction> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no sub-pairs to integrate".into()));
    }
    let mut instruction = String::new();
    let mut segments = Vec::with_capacity(pairs.len());
    for (n, pair) in pairs.iter().enumerate() {
        if n > 0 {
            instruction.push_str(joiner);
        }
        let raw = pair.sub_instruction.as_str();
        let lead = raw.len() - raw.trim_start().len();
        let body = raw.trim_start().trim_end_matches(|c: char| c.is_whitespace() || c == '.');
        let offset = instruction.len();
        instruction.push_str(&capitalize_first(body));
        let text_span = offset..instruction.len();

        let entity = match &pair.entity {
            None => None,
            Some(ent) => {
                if ent.start < lead || ent.end > lead + body.len() || ent.start >= ent.end {
                    return Err(Error::InvalidInput(format!(
                        "entity \"{}\" [{}, {}) lies outside sub-instruction {n}",
                        ent.text, ent.start, ent.end
                    )));
                }
                if raw.get(ent.start..ent.end) != Some(ent.text.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "entity \"{}\" does not match sub-instruction {n} at [{}, {})",
                        ent.text, ent.start, ent.end
                    )));
                }
                let start = offset + ent.start - lead;
                let end = offset + ent.end - lead;
                Some(EntitySpan {
                    text: instruction[start..end].to_string(),
                    start,
                    end,
                    normalized: ent.normalized.clone(),
                })
            }
        };
        segments.push(IntegratedSegment {
            steps: pair.steps.clone(),
            text_span,
            entity,
            landmark: pair.landmark.clone(),
        });
    }
    instruction.push('.');
    Ok(IntegratedInstruction { instruction, segments })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntity {
    pub text: String,
    pub span: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLandmark {
    pub viewpoint: String,
    pub label: String,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSubPair {
    pub steps: [usize; 2],
    pub text_span: [usize; 2],
    pub entity: Option<RecordEntity>,
    pub landmark: Option<RecordLandmark>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
}

/// One line of the dataset JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub schema: u32,
    pub instr_id: String,
    pub scan: String,
    pub path: Vec<String>,
    pub headings: Vec<f64>,
    pub instruction: String,
    pub sub_pairs: Vec<RecordSubPair>,
    pub gen: GenParams,
}

impl DatasetRecord {
    pub fn from_integrated(
        instr_id: String,
        scan: String,
        path: Vec<String>,
        headings: Vec<f64>,
        integrated: IntegratedInstruction,
        gen: GenParams,
    ) -> Self {
        let sub_pairs = integrated
            .segments
            .into_iter()
            .map(|seg| RecordSubPair {
                steps: [seg.steps.start, seg.steps.end],
                text_span: [seg.text_span.start, seg.text_span.end],
                entity: seg.entity.map(|e| RecordEntity { text: e.text, span: [e.start, e.end] }),
                landmark: seg.landmark.map(|l| RecordLandmark {
                    viewpoint: l.viewpoint_id,
                    label: l.detection.label,
                    bbox: l.detection.bbox,
                    confidence: l.detection.confidence,
                }),
            })
            .collect();
        Self {
            schema: SCHEMA_VERSION,
            instr_id,
            scan,
            path,
            headings,
            instruction: integrated.instruction,
            sub_pairs,
            gen,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

pub fn write_records_to<W: Write>(mut writer: W, records: &[DatasetRecord]) -> Result<()> {
    for r in records {
        writer
            .write_all(r.to_json_line().as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|e| Error::io("<records>", e))?;
    }
    writer.flush().map_err(|e| Error::io("<records>", e))
}

pub fn write_records(path: impl AsRef<Path>, records: &[DatasetRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records_to(BufWriter::new(file), records)
}

/// Parses JSONL records; errors name the 1-based line number.
pub fn read_records_from<R: BufRead>(reader: R) -> Result<Vec<DatasetRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Record { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| Error::Record { line: line_no, message: e.to_string() })?;
        if rec.schema != SCHEMA_VERSION {
            return Err(Error::Record { line: line_no, message: format!("unsupported schema version {}", rec.schema) });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records_from(BufReader::new(file))
}

/// A broken record invariant; `field` is a JSON-pointer-like location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub instr_id: String,
    pub field: String,
    pub message: String,
}

fn span_ok(text: &str, span: [usize; 2]) -> bool {
    span[0] <= span[1] && text.get(span[0]..span[1]).is_some()
}

/// Checks every record-level invariant: span validity and exact substrings,
/// contiguous step coverage, headings length, landmark sanity, and hop
/// adjacency when a graph for the record's scan is given.
pub fn validate_record(record: &DatasetRecord, graph: Option<&ConnectivityGraph>) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut fail =
        |field: String, message: String| v.push(Violation { instr_id: record.instr_id.clone(), field, message });

    if record.path.len() < 2 {
        fail("path".into(), "fewer than two viewpoints".into());
    }
    if record.headings.len() != record.path.len() {
        fail("headings".into(), format!("{} headings for {} viewpoints", record.headings.len(), record.path.len()));
    }
    if record.headings.iter().any(|h| !(h.is_finite() && *h > -180.0 && *h <= 180.0)) {
        fail("headings".into(), "heading outside (-180, 180]".into());
    }
    if record.instruction.is_empty() {
        fail("instruction".into(), "empty instruction".into());
    }
    if record.sub_pairs.is_empty() {
        fail("sub_pairs".into(), "no sub-pairs".into());
    }

    let steps = record.path.len().saturating_sub(1);
    let mut expected_start = 0;
    let mut prev_text_end = 0;
    for (i, sp) in record.sub_pairs.iter().enumerate() {
        let at = |f: &str| format!("sub_pairs[{i}].{f}");
        if sp.steps[0] != expected_start || sp.steps[1] <= sp.steps[0] {
            fail(at("steps"), format!("range {:?} does not continue at step {expected_start}", sp.steps));
        }
        expected_start = sp.steps[1];

        if !span_ok(&record.instruction, sp.text_span) {
            fail(at("text_span"), format!("span {:?} invalid for instruction", sp.text_span));
        } else if sp.text_span[0] < prev_text_end {
            fail(at("text_span"), "overlaps the previous sub-instruction".into());
        }
        prev_text_end = sp.text_span[1];

        if let Some(ent) = &sp.entity {
            if ent.span[0] >= ent.span[1] || !span_ok(&record.instruction, ent.span) {
                fail(at("entity.span"), format!("span {:?} invalid for instruction", ent.span));
            } else if record.instruction[ent.span[0]..ent.span[1]] != ent.text {
                fail(
                    at("entity.span"),
                    format!(
                        "instruction[{}..{}] = \"{}\" but entity text is \"{}\"",
                        ent.span[0],
                        ent.span[1],
                        &record.instruction[ent.span[0]..ent.span[1]],
                        ent.text
                    ),
                );
            } else if ent.span[0] < sp.text_span[0] || ent.span[1] > sp.text_span[1] {
                fail(at("entity.span"), "entity lies outside its sub-instruction".into());
            }
        }
        if let Some(lm) = &sp.landmark {
            if !(0.0..=1.0).contains(&lm.confidence) {
                fail(at("landmark.confidence"), format!("{} outside [0, 1]", lm.confidence));
            }
            let b = lm.bbox;
            if !(b.x_min < b.x_max && b.y_min < b.y_max && b.x_min >= 0.0 && b.y_min >= 0.0) {
                fail(at("landmark.bbox"), format!("degenerate box {:?}", b.to_array()));
            }
            if !record.path.contains(&lm.viewpoint) {
                fail(at("landmark.viewpoint"), format!("\"{}\" is not on the path", lm.viewpoint));
            }
        }
    }
    if !record.sub_pairs.is_empty() && expected_start != steps {
        fail("sub_pairs".into(), format!("steps cover [0, {expected_start}) of [0, {steps})"));
    }

    if let Some(g) = graph.filter(|g| g.scan_id() == record.scan) {
        for (i, w) in record.path.windows(2).enumerate() {
            if !g.is_adjacent(&w[0], &w[1]) {
                fail(format!("path[{i}]"), format!("\"{}\" -> \"{}\" is not a graph edge", w[0], w[1]));
            }
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DatasetStats {
    pub trajectories: usize,
    pub instructions: usize,
    pub sub_pairs: usize,
    pub entity_pairs: usize,
}

/// Counts over unique instruction ids; records repeating an id are ignored
/// after the first. Trajectories are distinct `(scan, path)` pairs.
pub fn dataset_statistics(records: &[DatasetRecord]) -> DatasetStats {
    let mut ids = HashSet::new();
    let mut trajectories = HashSet::new();
    let mut stats = DatasetStats::default();
    let mut duplicates = 0usize;
    for r in records {
        if !ids.insert(r.instr_id.as_str()) {
            duplicates += 1;
            continue;
        }
        trajectories.insert((r.scan.as_str(), &r.path));
        stats.instructions += 1;
        stats.sub_pairs += r.sub_pairs.len();
        stats.entity_pairs += r.sub_pairs.iter().filter(|s| s.entity.is_some()).count();
    }
    if duplicates > 0 {
        log::warn!("{duplicates} record(s) repeat an instruction id and were counted once");
    }
    stats.trajectories = trajectories.len();
    stats
}
