//! Every example must run to completion.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 9] = [
    "feature_groups",
    "planted_rule",
    "structures",
    "mip_export",
    "heuristics",
    "weight_sweep",
    "bench_splits",
    "rule_file",
    "oracle_check",
];

fn example_binary(name: &str) -> PathBuf {
    // target/<profile>/deps/<test> -> target/<profile>/examples/<name>
    let exe = std::env::current_exe().unwrap();
    let profile = exe.parent().and_then(|d| d.parent()).unwrap();
    profile
        .join("examples")
        .join(format!("{name}{}", std::env::consts::EXE_SUFFIX))
}

#[test]
fn examples_run() {
    for name in EXAMPLES {
        let bin = example_binary(name);
        let status = if bin.exists() {
            Command::new(&bin).output().expect("example starts")
        } else {
            Command::new(env!("CARGO"))
                .args(["run", "--quiet", "--example", name])
                .current_dir(env!("CARGO_MANIFEST_DIR"))
                .output()
                .expect("cargo runs")
        };
        assert!(
            status.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    }
}

#[test]
fn every_example_is_listed() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut found: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok()?.path().file_stem()?.to_str().map(str::to_string))
        .collect();
    found.sort();
    let mut listed: Vec<String> = EXAMPLES.iter().map(|s| s.to_string()).collect();
    listed.sort();
    assert_eq!(found, listed);
}
