use std::fs;
use std::path::Path;
use std::process::Command;

use bdc::cli::run;
use bdc_core::report::percentage;

const GT: &str = "\
0--A/one.jpg
2
0 0 10 10 1 0 0 0 0 0
100 100 20 20 0 0 0 0 0 0
0--A/two.jpg
2
0 0 10 10 0 1 0 0 0 0
100 100 20 20 0 0 0 0 1 0
1--B/three.jpg
2
0 0 10 10 0 0 1 0 0 0
100 100 20 20 0 0 0 0 2 0
1--B/nodets.jpg
1
5 5 5 5 0 0 0 0 0 0
1--B/empty.jpg
0
0 0 0 0 0 0 0 0 0 0
";

// Per image: a shifted detection (IoU 2/3) at 0.9 and an exact one at 0.5,
// so the average confidence is 0.7 and only the shifted ones qualify.
const DETS: &str = "\
0--A/one.jpg
2
2 0 10 10 0.9
100 100 20 20 0.5
0--A/two.jpg
2
2 0 10 10 0.9
100 100 20 20 0.5
1--B/three.jpg
2
2 0 10 10 0.9
100 100 20 20 0.5
";

fn fixture(dir: &Path) {
    fs::write(dir.join("gt.txt"), GT).unwrap();
    fs::write(dir.join("dets.txt"), DETS).unwrap();
}

fn run_ok(args: &[&str]) -> String {
    let mut out = Vec::new();
    let code = run(std::iter::once("bdc").chain(args.iter().copied()), &mut out);
    let text = String::from_utf8(out).unwrap();
    assert_eq!(code, 0, "{args:?}: {text}");
    text
}

fn run_code(args: &[&str]) -> i32 {
    let mut out = Vec::new();
    run(std::iter::once("bdc").chain(args.iter().copied()), &mut out)
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn calibrate_fixture_with_three_mbps() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let d = dir.path();
    let summary = run_ok(&[
        "calibrate", "--gt", &p(d, "gt.txt"), "--dets", &p(d, "dets.txt"), "--out", &p(d, "out.txt"),
        "--report", &p(d, "report.json"), "--mbp-export", &p(d, "mbp.tsv"), "--predictor", "fixture",
    ]);
    assert!(summary.contains("calibrated 3"), "{summary}");
    assert!(summary.contains("ADC 0.700000"), "{summary}");
    assert!(summary.contains("interval [0.5, 0.8]"), "{summary}");

    let diff = run_ok(&["diff", &p(d, "gt.txt"), &p(d, "out.txt")]);
    assert!(diff.ends_with("3 changes\n"), "{diff}");
    assert!(diff.contains("0--A/one.jpg\t0\t0,0,10,10\t2,0,10,10"));

    // flags survive replacement
    let out = fs::read_to_string(d.join("out.txt")).unwrap();
    assert!(out.contains("2 0 10 10 1 0 0 0 0 0\n"));
    assert!(out.contains("1--B/empty.jpg\n0\n0 0 0 0 0 0 0 0 0 0\n"));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["calibrated"], 3);
    assert_eq!(report["predictor"], "fixture");
    assert_eq!(report["interval"], serde_json::json!([0.5, 0.8]));
    assert_eq!(report["counters"]["missing_detections"], 2);
    assert_eq!(report["loss"]["name"], "diou");
    assert_eq!(report["loss"]["summary"]["count"], 3);
    assert_eq!(report["histogram"]["total"], 3);
    assert!(report["wall_time"].as_f64().unwrap() >= 0.0);

    let tsv = fs::read_to_string(d.join("mbp.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.starts_with(bdc::export::MBP_HEADER));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(&["synth", "--out", &p(d, "s"), "--seed", "3", "--images", "300", "--faces", "0,12", "--distractors", "0,4"]);
    let mut outputs = Vec::new();
    for t in ["1", "3", "8"] {
        let out = p(d, &format!("out{t}.txt"));
        let mbp = p(d, &format!("mbp{t}.tsv"));
        run_ok(&[
            "calibrate", "--gt", &p(d, "s/gt.txt"), "--dets", &p(d, "s/dets"), "--out", &out,
            "--mbp-export", &mbp, "--threads", t,
        ]);
        outputs.push((fs::read(out).unwrap(), fs::read(mbp).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn invalid_interval_exits_one() {
    let exe = env!("CARGO_BIN_EXE_bdc");
    let out = Command::new(exe)
        .args(["calibrate", "--gt", "nope", "--dets", "nope", "--out", "x", "--tm", "0.9", "--tc", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_m < t_c required"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    // missing input file is an I/O error
    assert_eq!(run_code(&["adc", "--gt", &p(d, "missing.txt"), "--dets", &p(d, "dets.txt")]), 2);
    fs::write(d.join("bad.txt"), "c.jpg\nxyz\n").unwrap();
    assert_eq!(run_code(&["adc", "--gt", &p(d, "bad.txt"), "--dets", &p(d, "dets.txt")]), 1);
    assert_eq!(run_code(&["calibrate", "--gt", "x"]), 1);
    assert_eq!(run_code(&["frobnicate"]), 1);
    assert_eq!(run_code(&["--help"]), 0);
    assert_eq!(run_code(&["calibrate", "--gt", "a", "--dets", "b", "--out", "c", "--threads", "0"]), 1);
}

#[test]
fn adc_prints_average() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("gt.txt"), "a.jpg\n2\n0 0 5 5 0 0 0 0 0 0\n9 9 5 5 0 0 0 0 0 0\n").unwrap();
    fs::create_dir(d.join("dets")).unwrap();
    fs::write(d.join("dets/a.txt"), "a\n3\n0 0 5 5 0.3\n0 0 5 5 0.9\n9 9 5 5 0.8\n").unwrap();
    let text = run_ok(&["adc", "--gt", &p(d, "gt.txt"), "--dets", &p(d, "dets")]);
    assert!(text.starts_with("adc\t0.850000\n"), "{text}");
    assert!(text.contains("denominator\t2\n"));
}

#[test]
fn stats_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // A 20x10 face matched by full-height detections of width w has IoU w/20.
    // Widths 11, 13, 15, 17, 19 land one per bin; counts 1..=5.
    let mut gt = String::new();
    let mut dets = String::new();
    let mut img = 0;
    for (bin, w) in [11, 13, 15, 17, 19].iter().enumerate() {
        for _ in 0..=bin {
            gt.push_str(&format!("i{img}.jpg\n1\n0 0 20 10 0 0 0 0 0 0\n"));
            dets.push_str(&format!("i{img}.jpg\n1\n0 0 {w} 10 0.9\n"));
            img += 1;
        }
    }
    fs::write(d.join("gt.txt"), &gt).unwrap();
    fs::write(d.join("dets.txt"), &dets).unwrap();
    let table = run_ok(&[
        "stats", "--gt", &p(d, "gt.txt"), "--dets", &p(d, "dets.txt"), "--adc", "0.5", "--out", &p(d, "h.json"),
    ]);
    for (i, count) in (1..=5).enumerate() {
        let pct = format!("{:.3}", percentage(count, 15));
        assert!(table.lines().any(|l| l.starts_with(&format!("{}\t", i + 1)) && l.ends_with(&format!("\t{count}\t{pct}"))), "{table}");
    }
    assert!(table.contains("6\t[0.5,0.8]\t6\t40.000"), "{table}");
    assert!(table.contains("7\t[0.5,1]\t15\t100.000"), "{table}");
    assert!(d.join("h.json").exists());

    fs::write(d.join("none.txt"), "").unwrap();
    let empty = run_ok(&["stats", "--gt", &p(d, "gt.txt"), "--dets", &p(d, "none.txt")]);
    assert!(empty.contains("total\t\t0"), "{empty}");

    assert_eq!(run_code(&["stats", "--gt", &p(d, "gt.txt"), "--dets", &p(d, "dets.txt"), "--edges", "0.5,0.9,0.7"]), 1);
}

#[test]
fn self_diff_has_no_changes() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let gt = p(dir.path(), "gt.txt");
    assert_eq!(run_ok(&["diff", &gt, &gt]), "0 changes\n");
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(root).unwrap().display().to_string(), fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(&["synth", "--out", &p(d, "a"), "--seed", "7", "--distractors", "0,2"]);
    run_ok(&["synth", "--out", &p(d, "b"), "--seed", "7", "--distractors", "0,2"]);
    let a = tree(&d.join("a"));
    assert!(a.len() > 100);
    assert_eq!(a, tree(&d.join("b")));
    run_ok(&["synth", "--out", &p(d, "c"), "--seed", "8", "--distractors", "0,2"]);
    assert_ne!(a, tree(&d.join("c")));
    assert_eq!(run_code(&["synth", "--out", &p(d, "e"), "--iou", "0.8,0.6"]), 1);
}
