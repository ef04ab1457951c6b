use std::ffi::{CStr, CString};
use std::fs::File;
use std::path::Path;
use std::process::Command;
use std::ptr;

use vcshot::store::write_store;
use vcshot::synthetic::PlantedParts;
use vcshot_ffi::*;

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = vc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn planted_store(dir: &Path) -> std::path::PathBuf {
    let store = PlantedParts {
        categories: 6,
        images_per_category: 8,
        ..PlantedParts::default()
    }
    .generate();
    let path = dir.join("parts.vcfs");
    write_store(&store, File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn store_dictionary_and_benchmark_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = c_path(&planted_store(dir.path()));
    unsafe {
        let mut store = ptr::null_mut();
        assert_eq!(vc_store_open(store_path.as_ptr(), &mut store), VcStatus::Ok);
        let mut n = 0usize;
        assert_eq!(vc_store_grid_count(store, &mut n), VcStatus::Ok);
        assert_eq!(n, 48);
        assert_eq!(vc_store_category_count(store, &mut n), VcStatus::Ok);
        assert_eq!(n, 6);

        let mut dict = ptr::null_mut();
        assert_eq!(vc_dictionary_learn(store, 12, 3, &mut dict), VcStatus::Ok);
        assert_eq!(vc_dictionary_num_vcs(dict, &mut n), VcStatus::Ok);
        assert_eq!(n, 12);
        let mut ll = 0.0;
        assert_eq!(vc_dictionary_log_likelihood(dict, &mut ll), VcStatus::Ok);
        assert!(ll.is_finite());

        let dict_path = c_path(&dir.path().join("d.vcdc"));
        assert_eq!(vc_dictionary_save(dict, dict_path.as_ptr()), VcStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(vc_dictionary_load(dict_path.as_ptr(), &mut loaded), VcStatus::Ok);
        assert_eq!(vc_dictionary_num_vcs(loaded, &mut n), VcStatus::Ok);
        assert_eq!(n, 12);
        vc_dictionary_free(loaded);
        vc_dictionary_free(dict);

        let mut spec = vc_episode_spec_default();
        assert_eq!(spec.num_vcs, 200);
        assert_eq!(spec.queries, 15);
        spec.ways = 3;
        spec.shots = 2;
        spec.queries = 3;
        spec.trials = 4;
        spec.num_vcs = 20;
        let mut result = VcBenchmarkResult::default();
        assert_eq!(vc_run_benchmark(store, &spec, &mut result), VcStatus::Ok);
        assert_eq!(result.trials, 4);
        assert!(result.mean_accuracy > 0.9, "{result:?}");
        vc_store_free(store);
    }
}

#[test]
fn failures_report_status_and_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = c_path(&dir.path().join("missing.vcfs"));
    let garbage_path = dir.path().join("garbage.vcfs");
    std::fs::write(&garbage_path, b"VCFS\x01\x00\x05").unwrap();
    let garbage = c_path(&garbage_path);
    unsafe {
        let mut store = ptr::null_mut();
        assert_eq!(vc_store_open(missing.as_ptr(), &mut store), VcStatus::Io);
        assert!(store.is_null());
        assert_eq!(vc_store_open(garbage.as_ptr(), &mut store), VcStatus::Format);
        assert!(last_error().contains("truncated payload at offset 6"), "{}", last_error());
        assert_eq!(vc_store_open(ptr::null(), &mut store), VcStatus::NullPointer);
        assert_eq!(vc_store_open(missing.as_ptr(), ptr::null_mut()), VcStatus::NullPointer);

        let store_path = c_path(&planted_store(dir.path()));
        assert_eq!(vc_store_open(store_path.as_ptr(), &mut store), VcStatus::Ok);
        let mut dict = ptr::null_mut();
        assert_eq!(vc_dictionary_learn(store, 1_000_000, 0, &mut dict), VcStatus::Fit);
        assert!(dict.is_null());
        assert!(last_error().contains("need at least"));

        let mut spec = vc_episode_spec_default();
        spec.ways = 50;
        let mut result = VcBenchmarkResult::default();
        assert_eq!(vc_run_benchmark(store, &spec, &mut result), VcStatus::InvalidArgument);
        spec.ways = 0;
        assert_eq!(vc_run_benchmark(store, &spec, &mut result), VcStatus::InvalidArgument);
        vc_store_free(store);
        vc_store_free(ptr::null_mut());
        vc_dictionary_free(ptr::null_mut());
    }
}

#[test]
fn generated_header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/vcshot.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "vc_store_open",
        "vc_store_free",
        "vc_dictionary_learn",
        "vc_dictionary_save",
        "vc_run_benchmark",
        "vc_last_error_message",
        "VC_STATUS_OK",
        "typedef struct VcStore VcStore;",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler available, skipping syntax check");
        return;
    };
    assert!(status.success());
}
