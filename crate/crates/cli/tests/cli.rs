//! End-to-end runs of the `cilp` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cilp_core::lp::LpInstance;
use cilp_core::numerics::Mat;
use cilp_core::{Dataset, DecisionSample, ModelFile, Problem};
use serde_json::Value;

fn cilp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cilp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cilp(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn interpolating_data(dir: &Path) {
    ok(&[
        "generate",
        "--problem",
        "sp-grid",
        "--n",
        "5",
        "--degree",
        "1",
        "--noise",
        "0",
        "--seed",
        "3",
        "--out",
        p(dir),
    ]);
}

/// `(epoch, split, h)` per metrics row.
fn metrics(path: &Path) -> Vec<(usize, String, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "epoch",
            "split",
            "h",
            "estimate_loss",
            "decision_loss",
            "subopt_mean",
            "wall_ms"
        ]
    );
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[1].to_string(), rec[2].parse().unwrap())
        })
        .collect()
}

fn final_train_h(out: &Path) -> f64 {
    metrics(&out.join("metrics.csv"))
        .into_iter()
        .rfind(|r| r.1 == "train")
        .unwrap()
        .2
}

#[test]
fn generate_writes_three_identical_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&[
            "generate",
            "--problem",
            "sp-grid",
            "--n",
            "10",
            "--seed",
            "7",
            "--out",
            p(out),
        ]);
    }
    for name in ["train.json", "val.json", "test.json"] {
        let bytes = fs::read(a.join(name)).unwrap();
        assert_eq!(bytes, fs::read(b.join(name)).unwrap(), "{name}");
        let ds = Dataset::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(ds.len(), 10);
    }
}

#[test]
fn generate_every_family() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["sp-grid", "knapsack", "portfolio", "perfect-matching"] {
        let out = dir.path().join(kind);
        ok(&["generate", "--problem", kind, "--n", "3", "--out", p(&out)]);
        let text = fs::read_to_string(out.join("train.json")).unwrap();
        Dataset::from_json(&text).unwrap();
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    assert_eq!(
        code(&cilp(&[
            "generate",
            "--problem",
            "sp-grid",
            "--n",
            "0",
            "--out",
            p(&out)
        ])),
        2
    );
    assert_eq!(code(&cilp(&["generate", "--problem", "warcraft", "--out", p(&out)])), 2);
    assert_eq!(code(&cilp(&["generate", "--problem", "sp-grid"])), 2);
    assert_eq!(code(&cilp(&["train", "--data", p(&out), "--out", p(&out)])), 2);
    assert_eq!(code(&cilp(&["frobnicate"])), 2);
    interpolating_data(&out);
    let res = dir.path().join("r");
    let bad_step = cilp(&["train", "--data", p(&out), "--out", p(&res), "--step", "fast"]);
    assert_eq!(code(&bad_step), 2);
    let bad_epochs = cilp(&["train", "--data", p(&out), "--out", p(&res), "--epochs", "0"]);
    assert_eq!(code(&bad_epochs), 2);
}

#[test]
fn pocs_interpolates_and_logs_every_epoch_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let out = dir.path().join("r");
    interpolating_data(&data);
    ok(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--method",
        "pocs",
        "--epochs",
        "50",
    ]);
    let rows = metrics(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 50 * 3);
    assert!(final_train_h(&out) <= 1e-8);

    let model: ModelFile = serde_json::from_str(&fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(model.theta.len(), 6);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["echo"]["config"]["method"], "pocs");
    assert_eq!(report["echo"]["config"]["margin"], 1.0);
    assert_eq!(report["final"].as_array().unwrap().len(), 3);
    assert_eq!(report["rows"].as_array().unwrap().len(), 150);
}

#[test]
fn preconditioned_gd_with_unit_step_matches_pocs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    interpolating_data(&data);
    let run = |method: &str| {
        let out = dir.path().join(method);
        ok(&[
            "train",
            "--data",
            p(&data),
            "--out",
            p(&out),
            "--method",
            method,
            "--step",
            "constant:1",
            "--epochs",
            "10",
        ]);
        metrics(&out.join("metrics.csv"))
    };
    let pocs = run("pocs");
    let pgd = run("precond-gd");
    assert_eq!(pocs.len(), pgd.len());
    for (a, b) in pocs.iter().zip(&pgd) {
        assert_eq!((a.0, &a.1), (b.0, &b.1));
        assert!((a.2 - b.2).abs() <= 1e-8 * (1.0 + a.2.abs()));
    }
}

#[test]
fn sgd_seeds_differ_but_both_converge() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    interpolating_data(&data);
    let run = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        ok(&[
            "train",
            "--train",
            p(&data.join("train.json")),
            "--out",
            p(&out),
            "--method",
            "sgd",
            "--epochs",
            "200",
            "--seed",
            seed,
        ]);
        out
    };
    let a = run("1");
    let b = run("2");
    let a_rows = metrics(&a.join("metrics.csv"));
    let b_rows = metrics(&b.join("metrics.csv"));
    assert_ne!(a_rows, b_rows);
    assert!(final_train_h(&a) <= 1e-6);
    assert!(final_train_h(&b) <= 1e-6);

    let again = run("1");
    assert_eq!(metrics(&again.join("metrics.csv")).len(), a_rows.len());
    assert_eq!(
        fs::read(a.join("model.json")).unwrap(),
        fs::read(again.join("model.json")).unwrap()
    );
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    interpolating_data(&data);
    let out = dir.path().join("r");
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# training run\ndata = {}\nout = {}\nmethod = gd\nepochs = 4\n",
            p(&data),
            p(&out)
        ),
    )
    .unwrap();
    ok(&["--config", p(&cfg), "train"]);
    assert_eq!(metrics(&out.join("metrics.csv")).len(), 4 * 3);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["echo"]["config"]["method"], "gd");
    assert_eq!(report["echo"]["config"]["step"]["rule"], "armijo");

    ok(&["--config", p(&cfg), "train", "--epochs", "2"]);
    assert_eq!(metrics(&out.join("metrics.csv")).len(), 2 * 3);

    fs::write(&cfg, "epochs = 2\nlearning_rate = 3\n").unwrap();
    assert_eq!(
        code(&cilp(&[
            "--config",
            p(&cfg),
            "train",
            "--data",
            p(&data),
            "--out",
            p(&out)
        ])),
        2
    );
}

/// Noise-free linear costs on the simplex LP `x1 + x2 + x3 = 1`.
fn linear_dataset(with_costs: bool) -> (Dataset, ModelFile) {
    let inst = LpInstance::new(Mat::from_rows(&[[1.0, 1.0, 1.0]]).unwrap(), vec![1.0]).unwrap();
    let problem = Problem::Lp(inst);
    let theta = vec![vec![1.0, -1.0, 0.5], vec![-0.5, 0.8, -1.0]];
    let contexts = [[0.6, 0.2], [-0.3, 0.9], [0.1, -0.7], [-0.8, -0.1]];
    let samples = contexts
        .iter()
        .map(|z| {
            let c: Vec<f64> = (0..3).map(|j| z[0] * theta[0][j] + z[1] * theta[1][j]).collect();
            DecisionSample {
                z: z.to_vec(),
                x_star: problem.decide(&c).unwrap(),
                c_star: with_costs.then_some(c),
            }
        })
        .collect();
    let ds = Dataset {
        problem,
        samples,
        feature_scale: 1.0,
        split_sizes: vec![4],
        generator: None,
    };
    (
        ds,
        ModelFile {
            theta,
            feature_scale: 1.0,
        },
    )
}

#[test]
fn eval_prints_metrics_json() {
    let dir = tempfile::tempdir().unwrap();
    for with_costs in [true, false] {
        let (ds, model) = linear_dataset(with_costs);
        let data = dir.path().join(format!("data{with_costs}.json"));
        let model_path = dir.path().join("model.json");
        fs::write(&data, ds.to_json().unwrap()).unwrap();
        fs::write(&model_path, serde_json::to_string(&model).unwrap()).unwrap();
        let text = ok(&["eval", "--model", p(&model_path), "--data", p(&data), "--split", "val"]);
        let record: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(record["split"], "val");
        assert_eq!(record["decision_loss"], 0.0);
        if with_costs {
            assert_eq!(record["estimate_loss"], 0.0);
        } else {
            assert!(record["estimate_loss"].is_null());
        }
    }
}

#[test]
fn eval_rescales_to_the_model_feature_scale() {
    let dir = tempfile::tempdir().unwrap();
    let (mut ds, model) = linear_dataset(true);
    // same raw contexts stored against a scale of 2
    for s in &mut ds.samples {
        s.z.iter_mut().for_each(|v| *v /= 2.0);
    }
    ds.feature_scale = 2.0;
    let data = dir.path().join("data.json");
    let model_path = dir.path().join("model.json");
    fs::write(&data, ds.to_json().unwrap()).unwrap();
    fs::write(&model_path, serde_json::to_string(&model).unwrap()).unwrap();
    let record: Value = serde_json::from_str(&ok(&["eval", "--model", p(&model_path), "--data", p(&data)])).unwrap();
    assert_eq!(record["split"], "test");
    assert_eq!(record["decision_loss"], 0.0);
}

#[test]
fn numeric_failures_exit_with_three_and_name_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let inst = LpInstance::new(Mat::from_rows(&[[1.0, -1.0]]).unwrap(), vec![1.0]).unwrap();
    let ds = Dataset {
        problem: Problem::Lp(inst),
        samples: vec![
            DecisionSample {
                z: vec![1.0],
                x_star: vec![1.0, 0.0],
                c_star: None,
            };
            2
        ],
        feature_scale: 1.0,
        split_sizes: vec![2],
        generator: None,
    };
    let data = dir.path().join("data.json");
    let model_path = dir.path().join("model.json");
    fs::write(&data, ds.to_json().unwrap()).unwrap();
    let model = ModelFile {
        theta: vec![vec![-1.0, -1.0]],
        feature_scale: 1.0,
    };
    fs::write(&model_path, serde_json::to_string(&model).unwrap()).unwrap();
    let out = cilp(&["eval", "--model", p(&model_path), "--data", p(&data)]);
    assert_eq!(code(&out), 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sample 0") && stderr.contains("unbounded"), "{stderr}");
}

#[test]
fn project_prints_the_projection() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    fs::write(&inst, r#"{"kind": "generic", "a": [[1.0, 1.0]], "b": [1.0]}"#).unwrap();
    let run = |q: &str, extra: &[&str]| -> Value {
        let mut args = vec!["project", "--instance", p(&inst), "--x-star", "1,0", "--q", q];
        args.extend_from_slice(extra);
        serde_json::from_str(&ok(&args)).unwrap()
    };
    let r = run("0,0", &[]);
    assert!((r["distance_sq"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    let point: Vec<f64> = serde_json::from_value(r["point"].clone()).unwrap();
    assert!((point[0] + 0.5).abs() <= 1e-9 && (point[1] - 0.5).abs() <= 1e-9);

    let inside = run("-1,1", &[]);
    assert!(inside["distance_sq"].as_f64().unwrap() <= 1e-12);
    let explicit = run("0,0", &["--margin", "1"]);
    assert_eq!(explicit["distance_sq"], r["distance_sq"]);
    let zero = run("0,0", &["--margin", "0"]);
    assert!(zero["distance_sq"].as_f64().unwrap() <= 1e-12);

    let bad = cilp(&["project", "--instance", p(&inst), "--x-star", "0.5,0.2", "--q", "0,0"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn project_reads_the_problem_of_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = linear_dataset(true);
    let data = dir.path().join("data.json");
    fs::write(&data, ds.to_json().unwrap()).unwrap();
    let x = ds.samples[0]
        .x_star
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let r: Value = serde_json::from_str(&ok(&[
        "project",
        "--instance",
        p(&data),
        "--x-star",
        &x,
        "--q",
        "0,0,0",
    ]))
    .unwrap();
    assert!(r["distance_sq"].as_f64().unwrap() > 0.0);
    assert_eq!(r["lambda"].as_array().unwrap().len(), 3);
}
