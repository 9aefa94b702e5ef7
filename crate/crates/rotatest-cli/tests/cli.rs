//! End-to-end tests of the `rotatest` binary: determinism, exit codes,
//! manifest completeness, and configuration precedence.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn rotatest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotatest"))
        .args(args)
        .env_remove("ROTATEST_SEED")
        .output()
        .expect("binary runs")
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            let name = entry.file_name().into_string().unwrap();
            let bytes = std::fs::read(entry.path()).unwrap();
            (name, bytes)
        })
        .collect()
}

#[test]
fn experiment_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let result = rotatest(&[
            "experiment",
            "--experiment",
            "1",
            "--m",
            "1",
            "--reps",
            "10",
            "--perms",
            "200",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success(), "{result:?}");
    }
    let a = read_dir_bytes(&out1);
    let b = read_dir_bytes(&out2);
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>()
    );
    for (name, bytes) in &a {
        if name == "run_manifest.json" {
            continue; // timestamps differ by design
        }
        assert_eq!(bytes, &b[name], "{name} differs between runs");
    }
}

#[test]
fn manifest_references_existing_files() {
    let dir = tempfile::tempdir().unwrap();
    let result = rotatest(&[
        "experiment",
        "--experiment",
        "2",
        "--m",
        "1,2",
        "--reps",
        "6",
        "--perms",
        "100",
        "--seed",
        "1",
        "--svg",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config"]["experiment"], 2);

    let mut paths: Vec<String> = Vec::new();
    for cell in manifest["cells"].as_array().unwrap() {
        assert_eq!(cell["fitted"], "logistic");
        paths.push(cell["path"].as_str().unwrap().to_string());
    }
    assert_eq!(paths.len(), 8); // 4 generators x 2 group sizes
    for key in ["pvalue_csv", "pvalue_json", "model_curves"] {
        paths.push(manifest[key].as_str().unwrap().to_string());
    }
    for list in ["plot_files", "svg_files"] {
        for p in manifest[list].as_array().unwrap() {
            paths.push(p.as_str().unwrap().to_string());
        }
    }
    assert!(paths.iter().any(|p| p.ends_with(".svg")));
    for p in paths {
        assert!(dir.path().join(&p).exists(), "missing {p}");
    }
}

#[test]
fn bad_flags_exit_with_usage_error() {
    let result = rotatest(&["experiment", "--experiment", "3"]);
    assert_eq!(result.status.code(), Some(2));
    let result = rotatest(&["experiment", "--no-such-flag"]);
    assert_eq!(result.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let result = rotatest(&[
        "experiment",
        "--models",
        "logistic,cauchy",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn verify_passes_and_is_deterministic() {
    let run = || rotatest(&["verify", "--cases", "40", "--seed", "11"]);
    let first = run();
    assert!(first.status.success(), "{first:?}");
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("PASS"));
    assert!(text.contains("unitarity"));
    let second = run();
    assert_eq!(text, String::from_utf8(second.stdout).unwrap());
}

#[test]
fn verify_dump_writes_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("bundle.json");
    let result = rotatest(&[
        "verify",
        "--cases",
        "5",
        "--seed",
        "2",
        "--dump",
        dump.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let bundle: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(bundle["m"], 1);
    assert_eq!(bundle["u"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.conf");
    std::fs::write(&config_path, "seed = 9\nreps = 5\nm = 1\nperms = 50\n").unwrap();
    let out = dir.path().join("out");
    let result = rotatest(&[
        "experiment",
        "--config",
        config_path.to_str().unwrap(),
        "--reps",
        "6",
        "--models",
        "logistic,beta",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["master_seed"], 9); // from config
    assert_eq!(manifest["config"]["replications"], 6); // flag wins
    assert_eq!(manifest["config"]["models"][1], "beta");
}

#[test]
fn env_seed_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let result = Command::new(env!("CARGO_BIN_EXE_rotatest"))
        .args([
            "experiment",
            "--m",
            "1",
            "--reps",
            "4",
            "--perms",
            "50",
            "--models",
            "logistic",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("ROTATEST_SEED", "42")
        .output()
        .unwrap();
    assert!(result.status.success(), "{result:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["master_seed"], 42);
}

#[test]
fn plot_data_has_full_series_with_increasing_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let result = rotatest(&[
        "experiment",
        "--m",
        "2",
        "--reps",
        "8",
        "--perms",
        "60",
        "--seed",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let text = std::fs::read_to_string(dir.path().join("plot_exp1_m2.tsv")).unwrap();
    let mut rows_per_model: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut fields = line.split('\t');
        let model = fields.next().unwrap().to_string();
        let _ks: f64 = fields.next().unwrap().parse().unwrap();
        let prob: f64 = fields.next().unwrap().parse().unwrap();
        rows_per_model.entry(model).or_default().push(prob);
    }
    assert_eq!(rows_per_model.len(), 4);
    for (model, probs) in rows_per_model {
        assert_eq!(probs.len(), 8, "{model}");
        assert!(probs.windows(2).all(|w| w[0] < w[1]), "{model}");
        assert_eq!(*probs.last().unwrap(), 1.0, "{model}");
        assert_eq!(probs[0], 1.0 / 8.0, "{model}");
    }
}
