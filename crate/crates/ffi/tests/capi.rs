use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use navinstr_ffi::*;

fn fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ni_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    ni_string_free(p);
    s
}

#[test]
fn classification_and_headings() {
    let mut turn = NiTurnClass::Straight;
    assert_eq!(unsafe { ni_classify_turn(-100.0, &mut turn) }, NiStatus::Ok);
    assert_eq!(turn, NiTurnClass::HardLeft);
    assert!(ni_last_error().is_null());
    assert_eq!(unsafe { ni_classify_turn(f64::NAN, &mut turn) }, NiStatus::Numeric);
    assert!(last_error().contains("turn angle"));
    assert_eq!(unsafe { ni_classify_turn(10.0, ptr::null_mut()) }, NiStatus::NullPointer);

    let mut v = NiVerticalClass::Level;
    assert_eq!(unsafe { ni_classify_vertical(-0.3, &mut v) }, NiStatus::Ok);
    assert_eq!(v, NiVerticalClass::Downward);

    assert_eq!(ni_normalize_heading(540.0), 180.0);
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(unsafe { ni_bbox_heading_bounds(0.0, 512.0, 1024.0, 0.0, &mut lo, &mut hi) }, NiStatus::Ok);
    assert_eq!((lo, hi), (-180.0, 0.0));
    assert_eq!(unsafe { ni_bbox_heading_bounds(5.0, 5.0, 1024.0, 0.0, &mut lo, &mut hi) }, NiStatus::InvalidInput);
}

#[test]
fn contrastive_loss_analytic_cases() {
    let same = [1.0, 2.0, 1.0, 2.0];
    let mut out = -1.0;
    assert_eq!(unsafe { ni_contrastive_loss(same.as_ptr(), 2, 2, 0.5, &mut out) }, NiStatus::Ok);
    assert_eq!(out, 0.5);
    let ortho = [1.0, 0.0, 0.0, 1.0];
    assert_eq!(unsafe { ni_contrastive_loss(ortho.as_ptr(), 2, 2, 0.0, &mut out) }, NiStatus::Ok);
    assert_eq!(out, 0.0);
    assert_eq!(unsafe { ni_contrastive_loss(ortho.as_ptr(), 1, 4, 0.0, &mut out) }, NiStatus::InvalidInput);
    assert_eq!(unsafe { ni_contrastive_loss(ptr::null(), 2, 2, 0.0, &mut out) }, NiStatus::NullPointer);
}

#[test]
fn template_library_handle() {
    unsafe {
        let lib = ni_template_library_new();
        assert_eq!(ni_template_library_len(lib), 108);
        let mut text = ptr::null_mut();
        let st = ni_template_library_get(
            lib,
            NiTurnClass::SlightLeft,
            NiVerticalClass::Upward,
            NiRelation::TowardsRightOf,
            &mut text,
        );
        assert_eq!(st, NiStatus::Ok);
        let t = take_string(text);
        assert!(t.contains("{landmark}") && t.contains("left"), "{t}");
        ni_template_library_free(lib);
        ni_template_library_free(ptr::null_mut());
    }
}

#[test]
fn eval_corpus_scores() {
    unsafe {
        let c = ni_eval_corpus_new();
        let mut scores = NiLanguageScores::default();
        // empty corpus
        assert_eq!(ni_eval_corpus_score(c, NiBleuSmoothing::None, &mut scores), NiStatus::InvalidInput);
        let id = CString::new("a").unwrap();
        let hyp = CString::new("walk past the sofa and stop").unwrap();
        let refs = [hyp.as_ptr()];
        assert_eq!(ni_eval_corpus_add(c, id.as_ptr(), hyp.as_ptr(), refs.as_ptr(), 1), NiStatus::Ok);
        assert_eq!(ni_eval_corpus_add(c, id.as_ptr(), hyp.as_ptr(), refs.as_ptr(), 0), NiStatus::InvalidInput);
        let bad = [0xffu8, 0];
        assert_eq!(ni_eval_corpus_add(c, id.as_ptr(), bad.as_ptr().cast(), refs.as_ptr(), 1), NiStatus::InvalidUtf8);
        assert_eq!(ni_eval_corpus_len(c), 1);
        assert_eq!(ni_eval_corpus_score(c, NiBleuSmoothing::None, &mut scores), NiStatus::Ok);
        assert_eq!(scores.bleu4, 100.0);
        assert!((scores.rouge_l - 100.0).abs() < 1e-9);
        ni_eval_corpus_free(c);
    }
}

#[test]
fn evaluate_navigation_file() {
    unsafe {
        let mut json = ptr::null_mut();
        let path = fixture("eval_nav.jsonl");
        assert_eq!(ni_evaluate_file(path.as_ptr(), NiBleuSmoothing::None, &mut json), NiStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(v["kind"], "navigation");
        assert_eq!(v["spl"], 0.625);
        let missing = CString::new("/nonexistent/eval.jsonl").unwrap();
        assert_eq!(ni_evaluate_file(missing.as_ptr(), NiBleuSmoothing::None, &mut json), NiStatus::Io);
    }
}

#[test]
fn generate_open_validate_stats() {
    let dir = tempfile::TempDir::new().unwrap();
    let out = CString::new(dir.path().join("d.jsonl").to_str().unwrap()).unwrap();
    unsafe {
        let mut report = ptr::null_mut();
        let cfg = fixture("config.toml");
        assert_eq!(ni_generate(cfg.as_ptr(), out.as_ptr(), 1, false, &mut report), NiStatus::Ok, "{}", last_error());
        let report: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
        assert_eq!(report["records"], 10);

        let mut ds = ptr::null_mut();
        assert_eq!(ni_dataset_open(out.as_ptr(), &mut ds), NiStatus::Ok);
        assert_eq!(ni_dataset_len(ds), 10);
        let mut stats = NiDatasetStats::default();
        assert_eq!(ni_dataset_stats(ds, &mut stats), NiStatus::Ok);
        assert_eq!((stats.trajectories, stats.instructions), (5, 10));
        assert_eq!(stats.sub_pairs as u64, report["sub_pairs"].as_u64().unwrap());
        let mut count = usize::MAX;
        let graph = fixture("grid.json");
        assert_eq!(ni_dataset_validate(ds, graph.as_ptr(), &mut count, ptr::null_mut()), NiStatus::Ok);
        assert_eq!(count, 0);
        ni_dataset_free(ds);
    }
}

#[test]
fn config_errors_map_to_status() {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\nworkers = 0\n").unwrap();
    let cfg = CString::new(cfg.to_str().unwrap()).unwrap();
    let st = unsafe { ni_generate(cfg.as_ptr(), ptr::null(), 0, false, ptr::null_mut()) };
    assert!(matches!(st, NiStatus::Config | NiStatus::Schema), "{st:?}");
    assert!(!last_error().is_empty());
}

/// Compiles a C program against the generated header and the static
/// library, then runs it.
#[test]
fn c_program_links_against_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libnavinstr_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::TempDir::new().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "navinstr.h"
int main(void) {
    NiTurnClass turn;
    if (ni_classify_turn(170.0, &turn) != NI_STATUS_OK || turn != NI_TURN_CLASS_BACKWARD) return 1;
    if (ni_classify_turn(0.0 / 0.0, &turn) != NI_STATUS_NUMERIC || ni_last_error() == NULL) return 2;
    NiTemplateLibrary *lib = ni_template_library_new();
    char *text = NULL;
    if (ni_template_library_get(lib, NI_TURN_CLASS_STRAIGHT, NI_VERTICAL_CLASS_LEVEL,
                                NI_RELATION_TOWARDS, &text) != NI_STATUS_OK) return 3;
    printf("%zu %s\n", ni_template_library_len(lib), text);
    ni_string_free(text);
    ni_template_library_free(lib);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("108 go straight"), "{text}");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
