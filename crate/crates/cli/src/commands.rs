use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use gabp_core::data::{
    evaluate, load_bundle, parse_csv_with_header, parse_libsvm, parse_system, save_bundle, split, Dataset,
    LabelMapping, MinMaxScaler, ModelBundle, RunReport,
};
use gabp_core::dist::{solve_distributed, train_distributed, ExecutionMode};
use gabp_core::gabp::{residual, run_broadcast, solve as gabp_solve};
use gabp_core::svm::{predict_with, train as svm_train, TrainedModel};
use gabp_core::synth::{dominant_spd, uniform_vector};
use gabp_core::{Error, GabpProblem, GabpSolution, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::settings::{Defaults, Settings, SettingsArgs};
use crate::{DataArgs, DataFormat};

pub struct Output {
    pub document: Value,
    pub converged: bool,
}

fn load_dataset(args: &DataArgs, positive_class: Option<&str>) -> anyhow::Result<Dataset> {
    let path = &args.data;
    let format = args.format.unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            DataFormat::Csv
        } else {
            DataFormat::Libsvm
        }
    });
    let ctx = || format!("reading {}", path.display());
    let mut ds = match format {
        DataFormat::Libsvm => {
            let mapping = positive_class.map_or(LabelMapping::Sign, |c| LabelMapping::PositiveClass(c.into()));
            parse_libsvm(BufReader::new(File::open(path).with_context(ctx)?), &mapping).with_context(ctx)?
        }
        DataFormat::Csv => {
            let Some(positive) = positive_class else {
                bail!("CSV input needs --positive-class");
            };
            let text = std::fs::read_to_string(path).with_context(ctx)?;
            let column = match args.label_column {
                Some(c) => c,
                None => {
                    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
                    first.split(',').count().saturating_sub(1)
                }
            };
            parse_csv_with_header(text.as_bytes(), column, positive, args.header).with_context(ctx)?
        }
    };
    ds.source = path.display().to_string();
    Ok(ds)
}

fn not_converged(command: &str, solution: &GabpSolution, settings: &Settings) -> Output {
    Output {
        document: json!({
            "command": command,
            "converged": false,
            "iterations_used": solution.iterations_used,
            "final_delta": solution.final_delta,
            "config": settings.echo(),
        }),
        converged: false,
    }
}

pub fn solve(system: &Path, args: &SettingsArgs) -> anyhow::Result<Output> {
    let settings = args.resolve(Defaults::SOLVE)?;
    let ctx = || format!("reading {}", system.display());
    let (w, b) = parse_system(BufReader::new(File::open(system).with_context(ctx)?)).with_context(ctx)?;
    let problem = GabpProblem::new(w, b)?
        .with_epsilon(settings.epsilon)
        .with_max_iters(settings.max_iters)
        .with_schedule(settings.schedule())
        .with_variant(settings.variant());
    let start = Instant::now();
    let (solution, rounds) = if settings.workers > 1 {
        let run = solve_distributed(&problem, settings.workers, ExecutionMode::Threaded)?;
        let scalars = run.telemetry.first().map_or(0, |t| t.reduced_scalars);
        (run.solution, Some(scalars))
    } else {
        (gabp_solve(&problem)?, None)
    };
    let wall = start.elapsed().as_secs_f64();
    let res = if solution.means.iter().all(|v| v.is_finite()) {
        Some(residual(&problem.matrix, &problem.rhs, &solution.means)?)
    } else {
        None
    };
    let mut doc = json!({
        "command": "solve",
        "means": solution.means,
        "precisions": solution.precisions,
        "residual": res,
        "iterations_used": solution.iterations_used,
        "converged": solution.converged,
        "final_delta": solution.final_delta,
        "wall_time_seconds": wall,
        "config": settings.echo(),
    });
    if let Some(scalars) = rounds {
        doc["reduced_scalars_per_round"] = json!(scalars);
    }
    Ok(Output {
        document: doc,
        converged: solution.converged,
    })
}

fn report_json(mut report: RunReport, settings: &Settings, data: &str) -> Value {
    report.config = json!({ "settings": settings.echo(), "data": data });
    serde_json::to_value(report).expect("report serializes")
}

pub fn train(data: &DataArgs, model_path: &Path, holdout: Option<f64>, args: &SettingsArgs) -> anyhow::Result<Output> {
    let settings = args.resolve(Defaults::TRAIN)?;
    let start = Instant::now();
    let full = load_dataset(data, settings.positive_class.as_deref())?;
    let (raw_train, raw_test) = match holdout {
        Some(f) => {
            let (a, b) = split(&full, 1.0 - f, settings.seed)?;
            (a, Some(b))
        }
        None => (full, None),
    };
    let scaler = settings.scale.then(|| MinMaxScaler::fit(&raw_train));
    let scaled = |d: &Dataset| -> gabp_core::Result<Dataset> {
        match &scaler {
            Some(s) => s.apply(d),
            None => Ok(d.clone()),
        }
    };
    let train_set = scaled(&raw_train)?;
    let config = settings.train_config(train_set.len())?;
    let trained = if settings.workers > 1 {
        train_distributed(&train_set.points, &config, settings.workers, ExecutionMode::Threaded)
            .map(|(m, run)| (m, run.telemetry.first().map(|t| t.reduced_scalars)))
    } else {
        svm_train(&train_set.points, &config).map(|m| (m, None))
    };
    let (model, scalars): (TrainedModel, Option<usize>) = match trained {
        Ok(t) => t,
        Err(Error::GabpNotConverged(solution)) => return Ok(not_converged("train", &solution, &settings)),
        Err(e) => return Err(e.into()),
    };
    let bundle = ModelBundle {
        model,
        scaler: scaler.clone(),
        positive_class: settings.positive_class.clone(),
    };
    let file = File::create(model_path).with_context(|| format!("creating {}", model_path.display()))?;
    let mut out = BufWriter::new(file);
    save_bundle(&bundle, &mut out)?;
    out.flush()?;
    let mut report = evaluate(&bundle.model, &train_set)?;
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    let source = data.data.display().to_string();
    let mut doc = json!({
        "command": "train",
        "model": model_path.display().to_string(),
        "n_train": train_set.len(),
        "support_vectors": bundle.model.support_indices.len(),
        "diagnostics": bundle.model.diagnostics,
        "report": report_json(report, &settings, &source),
    });
    if let Some(test) = raw_test {
        let holdout_report = evaluate(&bundle.model, &scaled(&test)?)?;
        doc["holdout_report"] = report_json(holdout_report, &settings, &source);
    }
    if let Some(s) = scalars {
        doc["reduced_scalars_per_round"] = json!(s);
    }
    Ok(Output {
        document: doc,
        converged: true,
    })
}

pub fn predict(data: &DataArgs, model_path: &Path, labels_out: Option<&Path>, support_only: bool) -> anyhow::Result<Output> {
    let start = Instant::now();
    let ctx = || format!("reading model {}", model_path.display());
    let bundle = load_bundle(BufReader::new(File::open(model_path).with_context(ctx)?)).with_context(ctx)?;
    let mut ds = load_dataset(data, bundle.positive_class.as_deref())?;
    if let Some(s) = &bundle.scaler {
        ds = s.apply(&ds)?;
    }
    let prediction = predict_with(&bundle.model, &ds.points, support_only)?;
    if let Some(path) = labels_out {
        let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        for l in &prediction.labels {
            writeln!(out, "{}", if *l > 0.0 { "+1" } else { "-1" })?;
        }
        out.flush()?;
    }
    let report = RunReport {
        error_rate: prediction.error_rate.unwrap_or(0.0),
        iterations_used: bundle.model.diagnostics.iterations_used,
        converged: bundle.model.diagnostics.converged,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        n_points: ds.len(),
        config: json!({
            "model": model_path.display().to_string(),
            "data": data.data.display().to_string(),
            "kernel": bundle.model.kernel,
            "cost_c": bundle.model.diagnostics.cost_c,
            "loading": bundle.model.diagnostics.loading,
            "scaled": bundle.scaler.is_some(),
            "support_only": support_only,
        }),
    };
    Ok(Output {
        document: json!({
            "command": "predict",
            "labels": prediction.labels,
            "report": report,
        }),
        converged: true,
    })
}

pub fn bench(n: usize, density: f64, workers: &[usize], seed: u64, epsilon: f64) -> anyhow::Result<Output> {
    if !(0.0..=1.0).contains(&density) {
        bail!("--density must be in [0, 1]");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = dominant_spd(&mut rng, n, density, 0.05..0.5);
    let b = uniform_vector(&mut rng, n, 1.0);
    let problem = GabpProblem::new(w, b)?
        .with_epsilon(epsilon)
        .with_variant(Variant::Broadcast);
    let start = Instant::now();
    let reference = run_broadcast(&problem)?;
    let reference_time = start.elapsed().as_secs_f64();
    let mut runs = Vec::new();
    let mut all_identical = true;
    for &p in workers {
        let start = Instant::now();
        let run = solve_distributed(&problem, p, ExecutionMode::Threaded)?;
        let wall = start.elapsed().as_secs_f64();
        let identical = run.solution == reference;
        all_identical &= identical;
        let max_diff = run
            .solution
            .means
            .iter()
            .zip(&reference.means)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        runs.push(json!({
            "workers": p,
            "wall_time_seconds": wall,
            "iterations_used": run.solution.iterations_used,
            "identical_to_single_process": identical,
            "max_abs_mean_difference": max_diff,
            "reduced_scalars_per_round": run.telemetry.first().map(|t| t.reduced_scalars),
        }));
    }
    Ok(Output {
        document: json!({
            "command": "bench",
            "n": n,
            "density": density,
            "seed": seed,
            "epsilon": epsilon,
            "single_process": {
                "wall_time_seconds": reference_time,
                "iterations_used": reference.iterations_used,
                "converged": reference.converged,
            },
            "runs": runs,
            "all_identical": all_identical,
        }),
        converged: reference.converged,
    })
}
