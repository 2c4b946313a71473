use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funcgnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(dir: &Path, args: &[&str]) -> Value {
    serde_json::from_str(&ok(dir, args)).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

/// Writes the first graph of dataset row `index` to `name`.
fn extract_graph(dir: &Path, data: &str, index: usize, name: &str) {
    let records: Value = serde_json::from_slice(&std::fs::read(dir.join(data)).unwrap()).unwrap();
    let g = &records[index]["graph_1"];
    std::fs::write(dir.join(name), g.to_string()).unwrap();
}

#[test]
fn gen_corpus_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = json(
        d,
        &[
            "gen-corpus",
            "--builtin",
            "--programs",
            "3",
            "--mutants",
            "4",
            "--out",
            "a.json",
            "--json",
        ],
    );
    assert_eq!(s["graphs"], 15);
    assert_eq!(s["pairs"], 225);
    let s = json(
        d,
        &[
            "gen-corpus",
            "--builtin",
            "--programs",
            "2",
            "--mutants",
            "0",
            "--out",
            "b.json",
            "--json",
        ],
    );
    assert_eq!(s["pairs"], 4);
    let keys: Vec<&str> = s.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        [
            "exact_pairs",
            "graphs",
            "lsap_pairs",
            "max_nodes",
            "mean_nodes",
            "min_nodes",
            "pairs",
            "similarity_histogram"
        ]
    );
}

#[test]
fn gen_corpus_parse_error_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    std::fs::create_dir(&src).unwrap();
    std::fs::write(src.join("ok.mini"), "int f(int a) { return a + 1; }").unwrap();
    std::fs::write(src.join("bad.mini"), "int f(int a) {\n  a = ;\n}").unwrap();
    let out = run(
        dir.path(),
        &["gen-corpus", "--src", "src", "--out", "x.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.mini") && err.contains("2:"), "{err}");
}

#[test]
fn ged_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-corpus",
            "--builtin",
            "--programs",
            "3",
            "--mutants",
            "1",
            "--out",
            "data.json",
        ],
    );
    // Rows 0 and 7 hold different programs as their first graph.
    extract_graph(d, "data.json", 0, "a.json");
    extract_graph(d, "data.json", 7, "b.json");
    for method in ["exact", "lsap", "hed"] {
        let v = json(
            d,
            &[
                "ged", "--g1", "a.json", "--g2", "a.json", "--method", method, "--json",
            ],
        );
        assert_eq!(v["distance"], 0.0);
        assert_eq!(v["similarity"], 1.0);
    }
    let hed = json(
        d,
        &[
            "ged", "--g1", "a.json", "--g2", "b.json", "--method", "hed", "--json",
        ],
    );
    let lsap = json(
        d,
        &[
            "ged", "--g1", "a.json", "--g2", "b.json", "--method", "lsap", "--json",
        ],
    );
    assert!(hed["distance"].as_f64().unwrap() <= lsap["distance"].as_f64().unwrap());
    assert_eq!(lsap["kind"], "upper_bound");
    assert_eq!(
        code(d, &["ged", "--g1", "a.json", "--g2", "missing.json"]),
        2
    );
    assert_eq!(
        code(
            d,
            &["ged", "--g1", "a.json", "--g2", "b.json", "--budget", "1"]
        ),
        3
    );
    assert_eq!(code(d, &["ged", "--g1", "a.json"]), 1);
    assert_eq!(
        code(
            d,
            &["ged", "--g1", "a.json", "--g2", "b.json", "--method", "qap"]
        ),
        1
    );
}

#[test]
fn train_eval_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-corpus",
            "--builtin",
            "--programs",
            "4",
            "--mutants",
            "2",
            "--out",
            "data.json",
        ],
    );
    let summary = json(
        d,
        &[
            "train",
            "--data",
            "data.json",
            "--out",
            "m.json",
            "--epochs",
            "60",
            "--json",
        ],
    );
    assert!(d.join("m.json").exists());
    assert!(d.join("m.json.loss.csv").exists());
    assert!(summary["best_test_mse"].as_f64().unwrap() >= 0.0);

    // A self-pair scores above a pair of unrelated programs.
    extract_graph(d, "data.json", 0, "g.json");
    extract_graph(d, "data.json", 143, "h.json");
    let predict = |a: &str, b: &str| {
        json(
            d,
            &[
                "predict",
                "--checkpoint",
                "m.json",
                "--g1",
                a,
                "--g2",
                b,
                "--json",
            ],
        )["similarity"]
            .as_f64()
            .unwrap()
    };
    let same = predict("g.json", "g.json");
    let apart = predict("g.json", "h.json");
    assert!(same > apart, "{same} vs {apart}");

    let novel =
        r#"{"labels": ["zz = q ^ r", "if zz", "return zz"], "edges": [[0, 1], [1, 2], [1, 0]]}"#;
    std::fs::write(d.join("novel.json"), novel).unwrap();
    let y = json(
        d,
        &[
            "predict",
            "--checkpoint",
            "m.json",
            "--g1",
            "novel.json",
            "--g2",
            "g.json",
            "--json",
        ],
    );
    let y = y["similarity"].as_f64().unwrap();
    assert!(y > 0.0 && y < 1.0);

    let table = ok(
        d,
        &[
            "eval",
            "--data",
            "data.json",
            "--checkpoint",
            "m.json",
            "--methods",
            "funcgnn,lsap",
        ],
    );
    let rows: Vec<Vec<&str>> = table
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|t| t.len() == 6 && t[1] == "1")
        .collect();
    assert_eq!(
        rows.iter().map(|t| t[0]).collect::<Vec<_>>(),
        ["funcgnn", "lsap"],
        "{table}"
    );

    let report = json(
        d,
        &[
            "eval",
            "--data",
            "data.json",
            "--checkpoint",
            "m.json",
            "--curve",
            "m.json.loss.csv",
            "--json",
        ],
    );
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    assert_eq!(
        report["loss_curve"].as_array().unwrap().len(),
        summary["epochs_run"].as_u64().unwrap() as usize + 1
    );

    assert_eq!(
        code(d, &["eval", "--data", "data.json", "--methods", "funcgnn"]),
        1
    );
    assert_eq!(
        code(
            d,
            &[
                "eval",
                "--data",
                "data.json",
                "--methods",
                "lsap",
                "--workers",
                "0"
            ]
        ),
        1
    );

    let mut ck: Value = serde_json::from_slice(&std::fs::read(d.join("m.json")).unwrap()).unwrap();
    ck["version"] = 7.into();
    std::fs::write(d.join("old.json"), ck.to_string()).unwrap();
    assert_eq!(
        code(
            d,
            &[
                "predict",
                "--checkpoint",
                "old.json",
                "--g1",
                "g.json",
                "--g2",
                "g.json"
            ]
        ),
        2
    );

    std::fs::write(d.join("cfg.json"), r#"{"version": 2}"#).unwrap();
    assert_eq!(
        code(
            d,
            &[
                "train",
                "--data",
                "data.json",
                "--out",
                "x.json",
                "--config",
                "cfg.json"
            ]
        ),
        2
    );
    std::fs::write(
        d.join("cfg.json"),
        r#"{"train": {"epochs": 1, "momentum": 0.9}}"#,
    )
    .unwrap();
    assert_eq!(
        code(
            d,
            &[
                "train",
                "--data",
                "data.json",
                "--out",
                "x.json",
                "--config",
                "cfg.json"
            ]
        ),
        2
    );
    std::fs::write(d.join("cfg.json"), r#"{"train": {"split_ratio": 1.5}}"#).unwrap();
    assert_eq!(
        code(
            d,
            &[
                "train",
                "--data",
                "data.json",
                "--out",
                "x.json",
                "--config",
                "cfg.json"
            ]
        ),
        1
    );

    let bench = json(
        d,
        &[
            "bench",
            "--data",
            "data.json",
            "--checkpoint",
            "m.json",
            "--subset",
            "all",
            "--repeats",
            "1",
            "--json",
        ],
    );
    assert_eq!(bench["pairs"], 144);
    assert!(bench["lsap_speedup"].as_f64().unwrap() > 0.0);
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(
            d,
            &[
                "gen-corpus",
                "--builtin",
                "--programs",
                "3",
                "--mutants",
                "2",
                "--seed",
                "4",
                "--out",
                "data.json",
                "--workers",
                "2",
            ],
        );
        ok(
            d,
            &[
                "train",
                "--data",
                "data.json",
                "--out",
                "m.json",
                "--epochs",
                "2",
                "--seed",
                "4",
            ],
        );
    }
    for f in ["data.json", "m.json", "m.json.loss.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
