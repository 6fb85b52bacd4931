use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruletree::bench::BenchReport;
use ruletree::synth::planted_conjunction;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruletree"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).expect("json report")
}

fn planted_file(dir: &Path, n: usize, p: usize, seed: u64) -> (String, usize) {
    let planted = planted_conjunction(n, p, 0.7, seed);
    let path = dir.join(format!("planted_{n}_{p}_{seed}.csv"));
    std::fs::write(&path, &planted.csv).unwrap();
    (path.to_string_lossy().into_owned(), planted.positives)
}

#[test]
fn fit_recovers_planted_rule() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, positives) = planted_file(dir.path(), 120, 4, 1);
    let report = json(&[
        "fit", "--data", &csv, "--target", "label", "--full", "--format", "json",
    ]);
    assert_eq!(report["status"], "optimal");
    assert_eq!(report["i_max"].as_f64(), Some(positives as f64));
    assert_eq!(report["train"]["fired"].as_u64(), Some(positives as u64));
    assert_eq!(report["train"]["misclassified"].as_u64(), Some(0));
}

fn noise_file(dir: &Path, n: usize, p: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut csv: String = (0..p).map(|j| format!("f{j},")).collect();
    csv.push_str("label\n");
    for _ in 0..n {
        for _ in 0..p {
            csv.push_str(&format!("{},", rng.gen_range(0..1000)));
        }
        csv.push_str(if rng.gen_bool(0.5) { "a\n" } else { "b\n" });
    }
    let path = dir.join("noise.csv");
    std::fs::write(&path, csv).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn tiny_time_limit_returns_best_so_far() {
    let dir = tempfile::tempdir().unwrap();
    let csv = noise_file(dir.path(), 3000, 12);
    let report = json(&[
        "fit",
        "--data",
        &csv,
        "--target",
        "label",
        "--full",
        "--time-limit",
        "0.001",
        "--format",
        "json",
    ]);
    assert_eq!(report["status"], "time_limit");
    let i_max = report["i_max"]
        .as_f64()
        .expect("warm start gives an incumbent");
    assert!(report["upper_bound"].as_f64().unwrap() >= i_max);
    assert_eq!(report["train"]["vi"].as_f64(), Some(i_max));
}

#[test]
fn warmstart_and_priorities_do_not_change_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = planted_file(dir.path(), 80, 5, 3);
    let clinic = data("clinic.csv");
    let schema = data("clinic.schema");
    let clinic = clinic.to_str().unwrap();
    let schema = schema.to_str().unwrap();
    let cases: [Vec<&str>; 2] = [
        vec!["--data", &csv, "--target", "label"],
        vec![
            "--data",
            clinic,
            "--schema",
            schema,
            "--structure",
            "cat-num",
        ],
    ];
    for base in &cases {
        let mut seen = Vec::new();
        for (ws, pr) in [("on", "on"), ("off", "off"), ("on", "off"), ("off", "on")] {
            let mut args = vec!["fit"];
            args.extend(base);
            args.extend([
                "--weight",
                "4",
                "--warmstart",
                ws,
                "--priorities",
                pr,
                "--format",
                "json",
            ]);
            let r = json(&args);
            assert_eq!(r["status"], "optimal");
            seen.push(r["i_max"].as_f64().unwrap());
        }
        assert!(seen.windows(2).all(|w| w[0] == w[1]), "{seen:?}");
    }
}

#[test]
fn fit_then_eval_on_sensitivity_table() {
    let dir = tempfile::tempdir().unwrap();
    let rule = dir.path().join("w10.json");
    let csv = data("sensitivity.csv");
    let csv = csv.to_str().unwrap();
    let common = ["--data", csv, "--target", "label", "--depth", "1", "--full"];
    let mut fit = vec!["fit", "--weight", "10", "--out", rule.to_str().unwrap()];
    fit.extend(common);
    ok(&fit);
    assert!(rule.with_extension("trace").exists());

    let mut eval = vec!["eval", "--rule", rule.to_str().unwrap(), "--format", "json"];
    eval.extend(common);
    let r = json(&eval);
    assert_eq!(r["stats"]["correct"], 38);
    assert_eq!(r["stats"]["fired"], 38);
    assert_eq!(r["stats"]["total"], 64);
    assert_eq!(r["stats"]["precision"].as_f64(), Some(1.0));
    assert_eq!(r["stats"]["vi"].as_f64(), Some(38.0));

    let text = std::fs::read_to_string(&rule)
        .unwrap()
        .replace("\"x\"", "\"x_old\"");
    std::fs::write(&rule, text).unwrap();
    let out = run(&eval);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("x_old"));
}

#[test]
fn sweep_trades_precision_for_coverage() {
    let csv = data("sensitivity.csv");
    let csv = csv.to_str().unwrap();
    let r = json(&[
        "sweep",
        "--data",
        csv,
        "--target",
        "label",
        "--depth",
        "1",
        "--full",
        "--weights",
        "10,8,6,4,2",
        "--format",
        "json",
    ]);
    let rows = r["rows"].as_array().unwrap();
    let got: Vec<(u64, u64, f64)> = rows
        .iter()
        .map(|row| {
            let t = &row["train"];
            (
                t["correct"].as_u64().unwrap(),
                t["fired"].as_u64().unwrap(),
                row["i_max"].as_f64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        got,
        vec![
            (38, 38, 38.0),
            (45, 46, 38.0),
            (45, 46, 40.0),
            (48, 50, 42.0),
            (53, 59, 47.0)
        ]
    );

    let out = run(&[
        "sweep",
        "--data",
        csv,
        "--target",
        "label",
        "--weights",
        "2,0.5",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 1"));
}

#[test]
fn emit_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = planted_file(dir.path(), 40, 3, 4);
    let mut outputs = Vec::new();
    for format in ["lp", "mps"] {
        for i in 0..2 {
            let out = dir.path().join(format!("m{i}.{format}"));
            ok(&[
                "emit",
                "--data",
                &csv,
                "--target",
                "label",
                "--format",
                format,
                "--out",
                out.to_str().unwrap(),
            ]);
            outputs.push((
                std::fs::read(&out).unwrap(),
                std::fs::read(out.with_extension("start")).unwrap(),
                std::fs::read(out.with_extension("ord")).unwrap(),
            ));
        }
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[2], outputs[3]);
    assert!(String::from_utf8_lossy(&outputs[2].0).contains("OBJSENSE"));

    let bad = run(&[
        "emit", "--data", &csv, "--target", "label", "--format", "xml", "--out", "ignored",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("xml"));
}

#[test]
fn bench_single_split_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let csv = data("clinic.csv");
    let schema = data("clinic.schema");
    ok(&[
        "bench",
        "--data",
        csv.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
        "--splits",
        "1",
        "--methods",
        "bsccart",
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = BenchReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 1);
    let agg = &report.aggregates[0];
    for s in [
        agg.train_precision,
        agg.train_coverage,
        agg.train_vi,
        agg.test_vi,
    ] {
        assert_eq!((s.std, s.n), (0.0, 1));
    }
    assert_eq!(report.recompute_aggregates(), report.aggregates);
}

#[test]
fn bench_rejects_unknown_method() {
    let csv = data("clinic.csv");
    let out = run(&[
        "bench",
        "--data",
        csv.to_str().unwrap(),
        "--target",
        "outcome",
        "--methods",
        "ripper",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn groups_lists_one_hot_members() {
    let csv = data("clinic.csv");
    let schema = data("clinic.schema");
    let text = ok(&[
        "groups",
        "--data",
        csv.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
    ]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[1].starts_with("num (Numerical, 3): age, bmi, glucose"));
    assert!(lines[2].contains("smoker=yes"));
}

#[test]
fn bad_flag_values_are_usage_errors() {
    let csv = data("sensitivity.csv");
    let csv = csv.to_str().unwrap();
    assert_eq!(
        run(&[
            "fit",
            "--data",
            csv,
            "--target",
            "label",
            "--warmstart",
            "maybe"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["fit", "--data", csv, "--target", "label", "--format", "yaml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "fit",
            "--data",
            csv,
            "--target",
            "label",
            "--depth",
            "1",
            "--structure",
            "all-all"
        ])
        .status
        .code(),
        Some(1)
    );
}
