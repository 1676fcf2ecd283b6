//! End-to-end runs of the `radiodisco` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn radiodisco(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_radiodisco"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = radiodisco(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn gen_topology_is_byte_identical_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["n_pairs=300", "side_m=1000"];
    for d in [&a, &b] {
        let mut v = vec!["gen-topology", "--out", d.to_str().unwrap(), "--seed", "11"];
        v.extend(args);
        ok(&v);
    }
    let ta = fs::read(a.join("topology.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("topology.csv")).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert!(!text.contains('\r'));
    assert!(text
        .lines()
        .any(|l| l == "link_id,tx_x,tx_y,rx_x,rx_y,coord_range,beta"));
}

#[test]
fn unknown_keys_and_bad_values_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let r = radiodisco(&["ground-truth", "--out", out, "colour=blue"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("colour"));
    let r = radiodisco(&["ground-truth", "--out", out, "n_pairs=many"]);
    assert!(!r.status.success());
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "seed = 1\nwhatever = 2\n").unwrap();
    let r = radiodisco(&[
        "ground-truth",
        "--out",
        out,
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(!r.status.success());
}

#[test]
fn warm_summary_has_one_row_per_repetition_plus_mean_and_std() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("warm");
    ok(&[
        "discovery-warm",
        "--out",
        out.to_str().unwrap(),
        "--repetitions",
        "20",
        "n_pairs=150",
        "side_m=600",
    ]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 1 + 20 + 2);
    assert!(lines[0].starts_with("repetition,seed,"));
    assert!(lines[21].starts_with("mean,"));
    assert!(lines[22].starts_with("std,"));
    assert!(out.join("trace_019.csv").exists());
    let trace = fs::read_to_string(out.join("trace_000.csv")).unwrap();
    assert!(trace.starts_with("time_s,metric,value\n"));
    assert!(trace.lines().last().unwrap().contains("stable_time_s"));
}

#[test]
fn rerun_from_manifest_reproduces_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    ok(&[
        "discovery-join",
        "--out",
        first.to_str().unwrap(),
        "--seed",
        "5",
        "--repetitions",
        "2",
        "n_pairs=120",
        "side_m=500",
        "join_links=2",
    ]);
    let second = tmp.path().join("second");
    let manifest = first.join("manifest.txt");
    ok(&[
        "discovery-join",
        "--out",
        second.to_str().unwrap(),
        "--config",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(read_dir_sorted(&first), read_dir_sorted(&second));
}

#[test]
fn alloc_series_has_satisfied_columns_per_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("alloc");
    ok(&[
        "alloc-over-time",
        "--out",
        out.to_str().unwrap(),
        "duration_s=30",
    ]);
    let series = fs::read_to_string(out.join("series_000.csv")).unwrap();
    let lines: Vec<&str> = series.lines().collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    for col in [
        "time_s",
        "proposed_satisfied",
        "random_satisfied",
        "selfish_satisfied",
    ] {
        assert!(header.contains(&col), "{col}");
    }
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("0,305,"));
}
