//! C ABI over the `navinstr` library.
//!
//! Every fallible function returns an [`NiStatus`]; on failure the message
//! is available from [`ni_last_error`] on the same thread. Objects are
//! opaque handles released with their matching `_free` function, and
//! strings returned through out-parameters are released with
//! [`ni_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use navinstr::assembly::{dataset_statistics, read_records, validate_record, DatasetRecord};
use navinstr::chunking::{HorizontalClass, VerticalClass};
use navinstr::config::PipelineConfig;
use navinstr::landmarks::{bbox_heading_bounds, BBox, Relation};
use navinstr::metrics::{BleuSmoothing, EvalCorpus, EvalItem, LanguageReport};
use navinstr::navgraph::{load_graph, normalize_heading};
use navinstr::pipeline::{cmd_evaluate, cmd_generate};
use navinstr::speaker::contrastive_loss;
use navinstr::templating::{build_template_library, TemplateKey, TemplateLibrary};
use navinstr::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Numeric = 4,
    Schema = 5,
    Config = 6,
    Io = 7,
    Provider = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiTurnClass {
    Straight = 0,
    SlightRight,
    ModerateRight,
    HardRight,
    SlightRightRear,
    SharpRightRear,
    Backward,
    SlightLeft,
    ModerateLeft,
    HardLeft,
    SlightLeftRear,
    SharpLeftRear,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiVerticalClass {
    Level = 0,
    Upward,
    Downward,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiRelation {
    Towards = 0,
    TowardsLeftOf,
    TowardsRightOf,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiBleuSmoothing {
    None = 0,
    AddOne,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NiLanguageScores {
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NiDatasetStats {
    pub trajectories: usize,
    pub instructions: usize,
    pub sub_pairs: usize,
    pub entity_pairs: usize,
}

/// Opaque template library handle.
pub struct NiTemplateLibrary(TemplateLibrary);

/// Opaque, growable list of hypothesis/reference items.
pub struct NiEvalCorpus(Vec<EvalItem>);

/// Opaque handle over the records of a dataset file.
pub struct NiDataset(Vec<DatasetRecord>);

const TURNS: [(HorizontalClass, NiTurnClass); 12] = [
    (HorizontalClass::Straight, NiTurnClass::Straight),
    (HorizontalClass::SlightRight, NiTurnClass::SlightRight),
    (HorizontalClass::ModerateRight, NiTurnClass::ModerateRight),
    (HorizontalClass::HardRight, NiTurnClass::HardRight),
    (HorizontalClass::SlightRightRear, NiTurnClass::SlightRightRear),
    (HorizontalClass::SharpRightRear, NiTurnClass::SharpRightRear),
    (HorizontalClass::Backward, NiTurnClass::Backward),
    (HorizontalClass::SlightLeft, NiTurnClass::SlightLeft),
    (HorizontalClass::ModerateLeft, NiTurnClass::ModerateLeft),
    (HorizontalClass::HardLeft, NiTurnClass::HardLeft),
    (HorizontalClass::SlightLeftRear, NiTurnClass::SlightLeftRear),
    (HorizontalClass::SharpLeftRear, NiTurnClass::SharpLeftRear),
];

fn turn_to_c(h: HorizontalClass) -> NiTurnClass {
    TURNS.iter().find(|(k, _)| *k == h).map(|(_, c)| *c).expect("all classes mapped")
}

fn turn_from_c(c: NiTurnClass) -> HorizontalClass {
    TURNS.iter().find(|(_, v)| *v == c).map(|(k, _)| *k).expect("all classes mapped")
}

fn vertical_to_c(v: VerticalClass) -> NiVerticalClass {
    match v {
        VerticalClass::Level => NiVerticalClass::Level,
        VerticalClass::Upward => NiVerticalClass::Upward,
        VerticalClass::Downward => NiVerticalClass::Downward,
    }
}

fn vertical_from_c(v: NiVerticalClass) -> VerticalClass {
    match v {
        NiVerticalClass::Level => VerticalClass::Level,
        NiVerticalClass::Upward => VerticalClass::Upward,
        NiVerticalClass::Downward => VerticalClass::Downward,
    }
}

fn relation_from_c(r: NiRelation) -> Relation {
    match r {
        NiRelation::Towards => Relation::Towards,
        NiRelation::TowardsLeftOf => Relation::TowardsLeftOf,
        NiRelation::TowardsRightOf => Relation::TowardsRightOf,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: NiStatus,
    message: String,
}

impl Failure {
    fn new(status: NiStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => NiStatus::Io,
            Error::Provider { .. } | Error::ProviderStartup { .. } => NiStatus::Provider,
            Error::Config(_) => NiStatus::Config,
            Error::Json { .. } | Error::Schema(_) | Error::Graph(_) | Error::Record { .. } => NiStatus::Schema,
            Error::NonFinite { .. }
            | Error::ZeroNorm
            | Error::DimensionMismatch { .. }
            | Error::InfiniteLoss { .. }
            | Error::DegenerateEdge { .. } => NiStatus::Numeric,
            _ => NiStatus::InvalidInput,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure or panic as the thread's last error and
/// maps it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NiStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            NiStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(NiStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(NiStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(NiStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NUL bytes removed").into_raw()
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(NiStatus::NullPointer, format!("{what} is null")))
}

/// Message of the last failed call on this thread, or null if the last
/// call succeeded. Valid until the next `ni_` call on the same thread.
#[no_mangle]
pub extern "C" fn ni_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ni_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn ni_normalize_heading(degrees: f64) -> f64 {
    normalize_heading(degrees)
}

/// # Safety
/// `out` must be null or point to writable memory for one value.
#[no_mangle]
pub unsafe extern "C" fn ni_classify_turn(turn_angle: f64, out: *mut NiTurnClass) -> NiStatus {
    guard(|| {
        let c = HorizontalClass::classify(turn_angle)?;
        write_out(out, turn_to_c(c), "out")
    })
}

/// # Safety
/// `out` must be null or point to writable memory for one value.
#[no_mangle]
pub unsafe extern "C" fn ni_classify_vertical(vertical_delta: f64, out: *mut NiVerticalClass) -> NiStatus {
    guard(|| {
        let c = VerticalClass::classify(vertical_delta)?;
        write_out(out, vertical_to_c(c), "out")
    })
}

/// Headings of a box's left and right edges on a panorama `pano_width`
/// columns wide whose center column faces `center_heading`.
///
/// # Safety
/// `out_min` and `out_max` must be null or point to writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ni_bbox_heading_bounds(
    x_min: f64,
    x_max: f64,
    pano_width: f64,
    center_heading: f64,
    out_min: *mut f64,
    out_max: *mut f64,
) -> NiStatus {
    guard(|| {
        if out_min.is_null() || out_max.is_null() {
            return Err(Failure::new(NiStatus::NullPointer, "output pointer is null"));
        }
        let b = bbox_heading_bounds(&BBox::new(x_min, 0.0, x_max, 0.0), pano_width, center_heading)?;
        out_min.write(b.min);
        out_max.write(b.max);
        Ok(())
    })
}

/// Token contrastive loss over `n` representations of `dim` values each,
/// stored row by row in `reps`.
///
/// # Safety
/// `reps` must point to `n * dim` readable doubles; `out` to a writable one.
#[no_mangle]
pub unsafe extern "C" fn ni_contrastive_loss(
    reps: *const f64,
    n: usize,
    dim: usize,
    rho: f64,
    out: *mut f64,
) -> NiStatus {
    guard(|| {
        if reps.is_null() {
            return Err(Failure::new(NiStatus::NullPointer, "reps is null"));
        }
        let len = n.checked_mul(dim).ok_or_else(|| Failure::new(NiStatus::InvalidInput, "n * dim overflows"))?;
        let flat = std::slice::from_raw_parts(reps, len);
        let rows: Vec<Vec<f64>> =
            if dim == 0 { vec![Vec::new(); n] } else { flat.chunks(dim).map(<[f64]>::to_vec).collect() };
        write_out(out, contrastive_loss(&rows, rho)?, "out")
    })
}

#[no_mangle]
pub extern "C" fn ni_template_library_new() -> *mut NiTemplateLibrary {
    Box::into_raw(Box::new(NiTemplateLibrary(build_template_library())))
}

/// # Safety
/// `lib` must be a live handle from [`ni_template_library_new`].
#[no_mangle]
pub unsafe extern "C" fn ni_template_library_len(lib: *const NiTemplateLibrary) -> usize {
    lib.as_ref().map_or(0, |l| l.0.len())
}

/// Template text for one key, with its `{landmark}` slot; free the result
/// with [`ni_string_free`].
///
/// # Safety
/// `lib` must be a live handle; `out` must point to a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ni_template_library_get(
    lib: *const NiTemplateLibrary,
    turn: NiTurnClass,
    vertical: NiVerticalClass,
    relation: NiRelation,
    out: *mut *mut c_char,
) -> NiStatus {
    guard(|| {
        let lib = handle(lib, "lib")?;
        let key = TemplateKey {
            horizontal: turn_from_c(turn),
            vertical: vertical_from_c(vertical),
            relation: relation_from_c(relation),
        };
        let text = lib
            .0
            .get(&key)
            .ok_or_else(|| Failure::new(NiStatus::InvalidInput, format!("no template for {}", key.as_string())))?;
        if out.is_null() {
            return Err(Failure::new(NiStatus::NullPointer, "out is null"));
        }
        out.write(c_string(text.to_string()));
        Ok(())
    })
}

/// # Safety
/// `lib` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ni_template_library_free(lib: *mut NiTemplateLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

#[no_mangle]
pub extern "C" fn ni_eval_corpus_new() -> *mut NiEvalCorpus {
    Box::into_raw(Box::new(NiEvalCorpus(Vec::new())))
}

/// Appends one hypothesis with `n_refs` references.
///
/// # Safety
/// `corpus` must be a live handle; `id` and `hyp` NUL-terminated strings;
/// `refs` must point to `n_refs` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ni_eval_corpus_add(
    corpus: *mut NiEvalCorpus,
    id: *const c_char,
    hyp: *const c_char,
    refs: *const *const c_char,
    n_refs: usize,
) -> NiStatus {
    guard(|| {
        let corpus = corpus.as_mut().ok_or_else(|| Failure::new(NiStatus::NullPointer, "corpus is null"))?;
        let id = str_arg(id, "id")?.to_string();
        let hyp = str_arg(hyp, "hyp")?.to_string();
        if n_refs == 0 {
            return Err(Failure::new(NiStatus::InvalidInput, format!("item \"{id}\" has no references")));
        }
        if refs.is_null() {
            return Err(Failure::new(NiStatus::NullPointer, "refs is null"));
        }
        let refs = std::slice::from_raw_parts(refs, n_refs)
            .iter()
            .enumerate()
            .map(|(i, r)| str_arg(*r, &format!("refs[{i}]")).map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        corpus.0.push(EvalItem { id, hyp, refs });
        Ok(())
    })
}

/// # Safety
/// `corpus` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ni_eval_corpus_len(corpus: *const NiEvalCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// BLEU-4, METEOR, ROUGE-L and CIDEr over the items added so far.
///
/// # Safety
/// `corpus` must be a live handle; `out` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn ni_eval_corpus_score(
    corpus: *const NiEvalCorpus,
    smoothing: NiBleuSmoothing,
    out: *mut NiLanguageScores,
) -> NiStatus {
    guard(|| {
        let corpus = EvalCorpus::new(handle(corpus, "corpus")?.0.clone())?;
        let smoothing = match smoothing {
            NiBleuSmoothing::None => BleuSmoothing::None,
            NiBleuSmoothing::AddOne => BleuSmoothing::AddOne,
        };
        let r = LanguageReport::compute(&corpus, smoothing);
        write_out(out, NiLanguageScores { bleu4: r.bleu4, meteor: r.meteor, rouge_l: r.rouge_l, cider: r.cider }, "out")
    })
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ni_eval_corpus_free(corpus: *mut NiEvalCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Scores an evaluation JSONL file (language or navigation) and returns the
/// JSON report through `out_json`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_json` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ni_evaluate_file(
    path: *const c_char,
    smoothing: NiBleuSmoothing,
    out_json: *mut *mut c_char,
) -> NiStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let smoothing = match smoothing {
            NiBleuSmoothing::None => BleuSmoothing::None,
            NiBleuSmoothing::AddOne => BleuSmoothing::AddOne,
        };
        let report = cmd_evaluate(Path::new(path), smoothing)?;
        let json = serde_json::to_string(&report).expect("report serializes");
        if out_json.is_null() {
            return Err(Failure::new(NiStatus::NullPointer, "out_json is null"));
        }
        out_json.write(c_string(json));
        Ok(())
    })
}

/// Runs the generation pipeline from a TOML config. `output` (nullable)
/// overrides the configured output path and `workers` the worker count
/// when non-zero. The JSON run report is returned through `out_json` when
/// it is not null.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `output` null or one.
#[no_mangle]
pub unsafe extern "C" fn ni_generate(
    config_path: *const c_char,
    output: *const c_char,
    workers: usize,
    resume: bool,
    out_json: *mut *mut c_char,
) -> NiStatus {
    guard(|| {
        let mut cfg = PipelineConfig::load(str_arg(config_path, "config_path")?)?;
        if !output.is_null() {
            cfg.output = PathBuf::from(str_arg(output, "output")?);
        }
        if workers > 0 {
            cfg.workers = workers;
        }
        cfg.validate()?;
        let report = cmd_generate(cfg, resume)?;
        if !out_json.is_null() {
            out_json.write(c_string(serde_json::to_string(&report).expect("report serializes")));
        }
        Ok(())
    })
}

/// Reads every record of a dataset file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_open(path: *const c_char, out: *mut *mut NiDataset) -> NiStatus {
    guard(|| {
        let records = read_records(str_arg(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(NiDataset(records))), "out")
    })
}

/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_len(ds: *const NiDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `ds` must be a live handle; `out` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_stats(ds: *const NiDataset, out: *mut NiDatasetStats) -> NiStatus {
    guard(|| {
        let s = dataset_statistics(&handle(ds, "ds")?.0);
        write_out(
            out,
            NiDatasetStats {
                trajectories: s.trajectories,
                instructions: s.instructions,
                sub_pairs: s.sub_pairs,
                entity_pairs: s.entity_pairs,
            },
            "out",
        )
    })
}

/// Checks every record, against the graph at `graph_path` when it is not
/// null. Writes the violation count to `out_count` and, when
/// `out_json` is not null, the violations as a JSON array.
///
/// # Safety
/// `ds` must be a live handle; `graph_path` null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_validate(
    ds: *const NiDataset,
    graph_path: *const c_char,
    out_count: *mut usize,
    out_json: *mut *mut c_char,
) -> NiStatus {
    guard(|| {
        let ds = handle(ds, "ds")?;
        let graph = if graph_path.is_null() { None } else { Some(load_graph(str_arg(graph_path, "graph_path")?)?) };
        let violations: Vec<_> =
            ds.0.iter().flat_map(|r| validate_record(r, graph.as_ref().filter(|g| g.scan_id() == r.scan))).collect();
        write_out(out_count, violations.len(), "out_count")?;
        if !out_json.is_null() {
            out_json.write(c_string(serde_json::to_string(&violations).expect("violations serialize")));
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_free(ds: *mut NiDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}
