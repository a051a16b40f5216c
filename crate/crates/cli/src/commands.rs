//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cilp_core::data::{generate_splits, load_dataset, save_dataset, Family, GeneratorConfig};
use cilp_core::metrics::evaluate;
use cilp_core::training::{run_trainer, Armijo, Method, StepRule, TrainConfig};
use cilp_core::{Dataset, ModelFile, PreparedSet, Problem, ProblemSpec, Split};
use serde::Serialize;

use crate::args::{EvalArgs, GenerateArgs, MethodArg, ProblemKind, ProjectArgs, SplitArg, TrainArgs};
use crate::config::FileConfig;
use crate::error::CliError;
use crate::report::{write_metrics_csv, RunReport, TrainEcho};

pub const SPLIT_FILES: [&str; 3] = ["train.json", "val.json", "test.json"];

fn required<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{name}")))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("dataset {} does not exist", path.display())));
    }
    Ok(load_dataset(path)?)
}

fn problem_kind(s: &str) -> Result<ProblemKind, CliError> {
    <ProblemKind as clap::ValueEnum>::from_str(s, true).map_err(|_| CliError::Usage(format!("unknown problem `{s}`")))
}

fn method_arg(s: &str) -> Result<MethodArg, CliError> {
    <MethodArg as clap::ValueEnum>::from_str(s, true).map_err(|_| CliError::Usage(format!("unknown method `{s}`")))
}

fn split_arg(s: &str) -> Result<SplitArg, CliError> {
    <SplitArg as clap::ValueEnum>::from_str(s, true).map_err(|_| CliError::Usage(format!("unknown split `{s}`")))
}

pub fn generate(args: GenerateArgs, cfg: &FileConfig) -> Result<(), CliError> {
    cfg.restrict(&["problem", "n", "seed", "out", "features", "degree", "noise"])?;
    let kind = match args.problem {
        Some(k) => k,
        None => problem_kind(required(cfg.raw("problem"), "problem")?)?,
    };
    let seed = cfg.merge(args.seed, "seed")?.unwrap_or(0);
    let out = required(args.out.or_else(|| cfg.path("out")), "out")?;
    let mut gen = match kind {
        ProblemKind::SpGrid => GeneratorConfig::sp_synth(seed),
        ProblemKind::Knapsack => GeneratorConfig::knapsack(seed),
        ProblemKind::Portfolio => GeneratorConfig::portfolio(seed),
        ProblemKind::PerfectMatching => GeneratorConfig::perfect_matching(seed),
    };
    let default_n = if matches!(gen.family, Family::Portfolio { .. }) {
        200
    } else {
        100
    };
    let n = cfg.merge(args.n, "n")?.unwrap_or(default_n);
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if let Some(d) = cfg.merge(args.features, "features")? {
        gen.features = d;
    }
    if let Some(deg) = cfg.merge(args.degree, "degree")? {
        gen.degree = deg;
    }
    if let Some(noise) = cfg.merge(args.noise, "noise")? {
        gen.noise = noise;
    }

    let splits = generate_splits(&gen, &[n, n, n])?;
    create_dir(&out)?;
    for (ds, name) in splits.iter().zip(SPLIT_FILES) {
        save_dataset(ds, out.join(name))?;
    }
    println!("wrote {} samples per split to {}", n, out.display());
    Ok(())
}

/// `constant:ETA`, `armijo` or `inverse-t:MU`.
pub fn parse_step(s: &str) -> Result<StepRule, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "invalid step `{s}` (expected constant:ETA, armijo or inverse-t:MU)"
        ))
    };
    let (name, value) = match s.split_once(':') {
        Some((n, v)) => (n, Some(v.parse::<f64>().map_err(|_| bad())?)),
        None => (s, None),
    };
    match (name, value) {
        ("constant", Some(eta)) => Ok(StepRule::Constant { eta }),
        ("armijo", None) => Ok(StepRule::Armijo(Armijo::default())),
        ("inverse-t", Some(mu)) => Ok(StepRule::InverseT { mu }),
        _ => Err(bad()),
    }
}

/// Rescales contexts stored against `ds.feature_scale` to `scale`.
fn rescale_features(ds: &mut Dataset, scale: f64) {
    let factor = ds.feature_scale / scale;
    if factor != 1.0 {
        for s in &mut ds.samples {
            s.z.iter_mut().for_each(|v| *v *= factor);
        }
        ds.feature_scale = scale;
    }
}

fn split_path(flag: Option<PathBuf>, cfg: &FileConfig, key: &str, data: Option<&Path>, file: &str) -> Option<PathBuf> {
    flag.or_else(|| cfg.path(key))
        .or_else(|| data.map(|d| d.join(file)).filter(|p| p.is_file()))
}

pub fn train(args: TrainArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let started = Instant::now();
    cfg.restrict(&[
        "data",
        "train",
        "val",
        "test",
        "out",
        "method",
        "step",
        "epochs",
        "margin",
        "seed",
        "no-shuffle",
    ])?;
    let data = args.data.or_else(|| cfg.path("data"));
    let train_path = args
        .train
        .or_else(|| cfg.path("train"))
        .or_else(|| data.as_ref().map(|d| d.join(SPLIT_FILES[0])));
    let train_path = required(train_path, "train (or --data)")?;
    let val_path = split_path(args.val, cfg, "val", data.as_deref(), SPLIT_FILES[1]);
    let test_path = split_path(args.test, cfg, "test", data.as_deref(), SPLIT_FILES[2]);
    let out = required(args.out.or_else(|| cfg.path("out")), "out")?;

    let method = match args.method {
        Some(m) => m,
        None => cfg
            .raw("method")
            .map(method_arg)
            .transpose()?
            .unwrap_or(MethodArg::Pocs),
    };
    let method = match method {
        MethodArg::Pocs => Method::Pocs,
        MethodArg::Gd => Method::Gd,
        MethodArg::Sgd => Method::Sgd,
        MethodArg::PrecondGd => Method::PrecondGd,
    };
    let step = match args.step.or_else(|| cfg.raw("step").map(str::to_string)) {
        Some(s) => parse_step(&s)?,
        None if method == Method::Gd => StepRule::Armijo(Armijo::default()),
        None => StepRule::Constant { eta: 1.0 },
    };
    let no_shuffle = args.no_shuffle || cfg.get::<bool>("no-shuffle")?.unwrap_or(false);

    let train_ds = read_dataset(&train_path)?;
    let scale = train_ds.feature_scale;
    let mut others = Vec::new();
    for (split, path) in [(Split::Val, &val_path), (Split::Test, &test_path)] {
        if let Some(p) = path {
            let mut ds = read_dataset(p)?;
            if ds.problem != train_ds.problem {
                return Err(CliError::Usage(format!(
                    "{} has a different problem than the training set",
                    p.display()
                )));
            }
            rescale_features(&mut ds, scale);
            others.push((split, ds));
        }
    }

    let config = TrainConfig {
        method,
        step,
        epochs: cfg
            .merge(args.epochs, "epochs")?
            .unwrap_or(TrainConfig::default().epochs),
        margin: cfg
            .merge(args.margin, "margin")?
            .unwrap_or_else(|| train_ds.problem.default_margin()),
        seed: cfg.merge(args.seed, "seed")?.unwrap_or(0),
        shuffle: !no_shuffle,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let train_set = PreparedSet::new(&train_ds, config.margin)?;
    let other_sets = others
        .iter()
        .map(|(split, ds)| Ok((*split, PreparedSet::new(ds, config.margin)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut evals = vec![(Split::Train, &train_set)];
    evals.extend(other_sets.iter().map(|(s, set)| (*s, set)));

    let output = run_trainer(&train_set, &evals, &config)?;

    create_dir(&out)?;
    write_json(&out.join("model.json"), &ModelFile::new(&output.model, scale))?;
    write_metrics_csv(&out.join("metrics.csv"), &output.log.rows)?;
    let echo = TrainEcho {
        train: train_path,
        val: val_path,
        test: test_path,
        out: out.clone(),
        config,
    };
    let report = RunReport::new(echo, output.log, started.elapsed().as_secs_f64() * 1e3);
    for r in &report.final_metrics {
        println!(
            "{:<5} h {:.6e}  decision loss {:.6}  estimate loss {}",
            r.split.as_str(),
            r.h,
            r.decision_loss,
            r.estimate_loss.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
        );
    }
    write_json(&out.join("report.json"), &report)?;
    Ok(())
}

pub fn eval(args: EvalArgs, cfg: &FileConfig) -> Result<(), CliError> {
    cfg.restrict(&["model", "data", "margin", "split"])?;
    let model_path = required(args.model.or_else(|| cfg.path("model")), "model")?;
    let data_path = required(args.data.or_else(|| cfg.path("data")), "data")?;
    let split = match args.split {
        Some(s) => s,
        None => cfg.raw("split").map(split_arg).transpose()?.unwrap_or(SplitArg::Test),
    };
    let split = match split {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    };

    let text = fs::read_to_string(&model_path).map_err(|e| CliError::io(&model_path, e))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if !(file.feature_scale > 0.0 && file.feature_scale.is_finite()) {
        return Err(CliError::Usage("model feature_scale must be positive".into()));
    }
    let model = file.model()?;
    let mut ds = read_dataset(&data_path)?;
    rescale_features(&mut ds, file.feature_scale);
    let margin = cfg
        .merge(args.margin, "margin")?
        .unwrap_or_else(|| ds.problem.default_margin());
    let set = PreparedSet::new(&ds, margin)?;
    let record = evaluate(&set, &model, split)?;
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

#[derive(Serialize)]
struct ProjectionOutput {
    point: Vec<f64>,
    distance_sq: f64,
    lambda: Vec<f64>,
    nu: Vec<f64>,
}

fn parse_vector(s: &str, name: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--{name}: cannot parse `{}` as a number", t.trim())))
        })
        .collect()
}

/// Reads a problem JSON, or the `problem` field of a dataset file.
fn read_problem(path: &Path) -> Result<Problem, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("kind").is_none() {
        if let Some(p) = value.get_mut("problem") {
            value = p.take();
        }
    }
    let spec: ProblemSpec = serde_json::from_value(value)?;
    Ok(Problem::from_spec(&spec)?)
}

pub fn project(args: ProjectArgs, cfg: &FileConfig) -> Result<(), CliError> {
    cfg.restrict(&["instance", "x-star", "q", "margin"])?;
    let instance = required(args.instance.or_else(|| cfg.path("instance")), "instance")?;
    let x_star = required(args.x_star.or_else(|| cfg.raw("x-star").map(str::to_string)), "x-star")?;
    let q = required(args.q.or_else(|| cfg.raw("q").map(str::to_string)), "q")?;
    let margin = cfg.merge(args.margin, "margin")?.unwrap_or(1.0);

    let problem = read_problem(&instance)?;
    let x_star = parse_vector(&x_star, "x-star")?;
    let q = parse_vector(&q, "q")?;
    let projection = problem.projector(&x_star, margin)?.project(&q)?;
    let out = ProjectionOutput {
        point: projection.point,
        distance_sq: projection.distance_sq,
        lambda: projection.lambda,
        nu: projection.nu,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_rules_parse() {
        assert_eq!(parse_step("constant:0.5").unwrap(), StepRule::Constant { eta: 0.5 });
        assert_eq!(parse_step("armijo").unwrap(), StepRule::Armijo(Armijo::default()));
        assert_eq!(parse_step("inverse-t:2").unwrap(), StepRule::InverseT { mu: 2.0 });
        for bad in ["constant", "armijo:1", "fast", "inverse-t:x"] {
            assert!(parse_step(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn vectors_parse() {
        assert_eq!(parse_vector("1, -0.5,2", "q").unwrap(), vec![1.0, -0.5, 2.0]);
        assert!(parse_vector("1,,2", "q").is_err());
    }
}
