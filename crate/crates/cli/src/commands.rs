use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use treequad::engine::{pack_interactions, AttributionResult, Explanation, QuadratureExplainer};
use treequad::harness::{
    run_scaling, run_stability, uniform_samples, HarnessError, StabilityConfig, Timing, MAX_STABILITY_DEPTH,
};
use treequad::methods::{AttributionMethod, MethodConfig, MethodError, MethodRegistry};
use treequad::model::{
    emit_canonical, generate_random_ensemble, parse_canonical, NodeKind, RandomTreeConfig, TreeEnsemble,
};
use treequad::oracle::{extract_path_games, sii_exact_all};
use treequad::{gauss_legendre, min_points};

use crate::data::{load_feature_map, load_model, load_samples, FeatureMap, ModelSource};
use crate::failure::Failure;
use crate::{EngineArgs, ExplainArgs, Format, InteractionArgs, ModelArgs, ScalingArgs, StabilityArgs, ValidateArgs};

const EFFICIENCY_TOLERANCE: f64 = 1e-6;
const SPOT_CHECK_TOLERANCE: f64 = 1e-10;
const SPOT_CHECK_MAX_DEPTH: usize = 12;
const SPOT_CHECK_MAX_NODES: usize = 512;

fn feature_map(args: &ModelArgs) -> Result<Option<FeatureMap>, Failure> {
    args.feature_map.as_deref().map(load_feature_map).transpose()
}

fn model(args: &ModelArgs, map: Option<&FeatureMap>) -> Result<TreeEnsemble, Failure> {
    load_model(&ModelSource {
        path: &args.model,
        xgboost_dump: args.import_xgboost_dump,
        base_score: args.base_score,
        num_features: args.num_features,
        num_groups: args.num_groups,
        group: args.group,
        feature_map: map,
    })
}

fn inputs(args: &ModelArgs, data: &Path) -> Result<(TreeEnsemble, Vec<Vec<f64>>), Failure> {
    let map = feature_map(args)?;
    let ensemble = model(args, map.as_ref())?;
    let samples = load_samples(data, ensemble.num_features(), map.as_ref())?;
    Ok((ensemble, samples))
}

fn method(args: &EngineArgs) -> Result<Box<dyn AttributionMethod>, Failure> {
    let config = MethodConfig { points: args.points as usize, threads: args.threads };
    MethodRegistry::with_builtins().create(&args.method, &config).map_err(method_failure)
}

fn method_failure(err: MethodError) -> Failure {
    match err {
        MethodError::Unknown { .. } => Failure::input(err.to_string()),
        other => Failure::precondition(other.to_string()),
    }
}

fn run(method: &dyn AttributionMethod, ensemble: &TreeEnsemble, samples: &[Vec<f64>], order: usize) -> Result<Explanation, Failure> {
    let out = method.explain(ensemble, samples, order).map_err(method_failure)?;
    if out.inexact_rule {
        eprintln!(
            "warning: {} points are below the {} needed for exact order-{order} results on this model",
            out.points,
            out.required_points.unwrap_or(0)
        );
    }
    Ok(out)
}

fn check_order(ensemble: &TreeEnsemble, order: usize) -> Result<(), Failure> {
    let depth = ensemble.stats().max_unique_features;
    if order > 1 && order > depth {
        return Err(Failure::precondition(format!("order {order} exceeds unique-feature depth {depth}")));
    }
    Ok(())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn dense_first_order(num_features: usize, result: &AttributionResult) -> Vec<f64> {
    let mut row = vec![0.0; num_features + 1];
    for (key, &v) in &result.values {
        row[key[0]] = v;
    }
    row[num_features] = result.bias;
    row
}

fn write_sparse(out: Box<dyn Write>, format: Format, results: &[AttributionResult]) -> Result<(), Failure> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["sample", "features", "value"])?;
            for (i, r) in results.iter().enumerate() {
                for (key, v) in r.values.iter().filter(|(_, v)| **v != 0.0) {
                    let features = key.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
                    w.write_record([i.to_string(), features, v.to_string()])?;
                }
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = out;
            for (i, r) in results.iter().enumerate() {
                for (key, v) in r.values.iter().filter(|(_, v)| **v != 0.0) {
                    writeln!(out, "{}", json!({ "sample": i, "features": key, "value": v }))?;
                }
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn explain(args: &ExplainArgs) -> Result<(), Failure> {
    let (ensemble, samples) = inputs(&args.model, &args.data)?;
    let order = args.order as usize;
    check_order(&ensemble, order)?;
    if args.check_efficiency && order != 1 {
        return Err(Failure::precondition("--check-efficiency requires order 1"));
    }
    let method = method(&args.engine)?;
    let explanation = run(method.as_ref(), &ensemble, &samples, order)?;
    let out = open_output(args.output.output.as_deref())?;
    if order > 1 {
        return write_sparse(out, args.output.format, &explanation.results);
    }

    let f = ensemble.num_features();
    let rows: Vec<Vec<f64>> = explanation.results.iter().map(|r| dense_first_order(f, r)).collect();
    let residuals: Vec<f64> = rows
        .iter()
        .zip(&samples)
        .map(|(row, sample)| row.iter().sum::<f64>() - ensemble.predict(sample))
        .collect();
    match args.output.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<String> = (0..f).map(|i| format!("f{i}")).collect();
            header.push("bias".into());
            if args.check_efficiency {
                header.push("efficiency_residual".into());
            }
            w.write_record(&header)?;
            for (row, residual) in rows.iter().zip(&residuals) {
                let mut cells: Vec<String> = row.iter().map(f64::to_string).collect();
                if args.check_efficiency {
                    cells.push(residual.to_string());
                }
                w.write_record(&cells)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = out;
            for (i, (row, residual)) in rows.iter().zip(&residuals).enumerate() {
                let mut record = json!({ "sample": i, "values": &row[..f], "bias": row[f] });
                if args.check_efficiency {
                    record["efficiency_residual"] = json!(residual);
                }
                writeln!(out, "{record}")?;
            }
            out.flush()?;
        }
    }

    if args.check_efficiency {
        if let Some((row, r)) = residuals.iter().enumerate().find(|(_, r)| r.abs() > EFFICIENCY_TOLERANCE) {
            return Err(Failure::validation(format!(
                "efficiency check failed: row {} residual {r:e} exceeds {EFFICIENCY_TOLERANCE:e}",
                row + 1
            )));
        }
    }
    Ok(())
}

pub fn interactions(args: &InteractionArgs) -> Result<(), Failure> {
    let order = args.order as usize;
    if order < 2 {
        return Err(Failure::precondition("interactions need order 2 or more; use `explain` for order 1"));
    }
    let (ensemble, samples) = inputs(&args.model, &args.data)?;
    check_order(&ensemble, order)?;
    let method = method(&args.engine)?;
    let out = open_output(args.output.output.as_deref())?;
    if order > 2 {
        let explanation = run(method.as_ref(), &ensemble, &samples, order)?;
        return write_sparse(out, args.output.format, &explanation.results);
    }

    let first = run(method.as_ref(), &ensemble, &samples, 1)?;
    let pairs = run(method.as_ref(), &ensemble, &samples, 2)?;
    let f = ensemble.num_features();
    let matrices = first.results.iter().zip(&pairs.results).map(|(a, b)| pack_interactions(f, a, b));
    match args.output.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<String> = (0..f).flat_map(|i| (0..f).map(move |j| format!("m{i}_{j}"))).collect();
            header.push("bias".into());
            w.write_record(&header)?;
            for m in matrices {
                let mut cells: Vec<String> = m.values.iter().map(f64::to_string).collect();
                cells.push(m.bias.to_string());
                w.write_record(&cells)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = out;
            for (i, m) in matrices.enumerate() {
                let rows: Vec<&[f64]> = m.values.chunks(f).collect();
                writeln!(out, "{}", json!({ "sample": i, "matrix": rows, "bias": m.bias }))?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn harness_failure(err: HarnessError) -> Failure {
    Failure::precondition(err.to_string())
}

pub fn stability(args: &StabilityArgs) -> Result<(), Failure> {
    if args.depths.is_empty() || args.rule_sizes.is_empty() {
        return Err(Failure::precondition("need at least one depth and one rule size"));
    }
    if let Some(d) = args.depths.iter().find(|&&d| d > MAX_STABILITY_DEPTH) {
        return Err(Failure::precondition(format!("depth {d} exceeds {MAX_STABILITY_DEPTH}")));
    }
    if !(0.0..=1.0).contains(&args.repeat_prob) || args.features == 0 {
        return Err(Failure::precondition("need --features >= 1 and --repeat-prob in [0, 1]"));
    }
    let config = StabilityConfig {
        depths: args.depths.clone(),
        rule_sizes: args.rule_sizes.clone(),
        num_features: args.features,
        samples_per_depth: args.samples,
        trees: args.trees,
        repeat_prob: args.repeat_prob,
        max_leaves: args.max_leaves,
        seed: args.seed,
        threads: args.threads,
        timing: Timing::default(),
    };
    let report = run_stability(&config).map_err(harness_failure)?;
    let mut out = open_output(args.output.as_deref())?;
    out.write_all(report.to_csv(true).as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn scaling(args: &ScalingArgs) -> Result<(), Failure> {
    let (ensemble, sample) = match &args.model {
        Some(path) => {
            let model_args = ModelArgs {
                model: path.clone(),
                import_xgboost_dump: false,
                base_score: None,
                num_features: None,
                num_groups: 1,
                group: 0,
                feature_map: None,
            };
            let ensemble = model(&model_args, None)?;
            let sample = match &args.data {
                Some(data) => load_samples(data, ensemble.num_features(), None)?
                    .into_iter()
                    .next()
                    .ok_or_else(|| Failure::input("dataset has no rows"))?,
                None => uniform_samples(ensemble.num_features(), 1, args.seed).remove(0),
            };
            (ensemble, sample)
        }
        None => {
            if args.features == 0 || args.trees == 0 {
                return Err(Failure::precondition("need --features >= 1 and --trees >= 1"));
            }
            let config = RandomTreeConfig::new(args.depth, args.features, 0.0, args.seed);
            let ensemble = generate_random_ensemble(&config, args.trees);
            let sample = uniform_samples(args.features, 1, args.seed ^ 0x5eed).remove(0);
            (ensemble, sample)
        }
    };
    let rule = gauss_legendre(args.points as usize).map_err(|e| Failure::precondition(e.to_string()))?;
    let report = run_scaling(&args.orders, &ensemble, &sample, &rule, args.threads, Timing::default())
        .map_err(harness_failure)?;
    let mut out = open_output(args.output.as_deref())?;
    out.write_all(report.to_csv(true).as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Samples that straddle the model's thresholds, with some missing values.
fn probe_samples(ensemble: &TreeEnsemble, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut thresholds: Vec<Vec<f64>> = vec![Vec::new(); ensemble.num_features()];
    for tree in ensemble.trees() {
        for node in tree.nodes() {
            if let NodeKind::Internal(split) = &node.kind {
                thresholds[split.feature].push(split.threshold);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            thresholds
                .iter()
                .map(|ts| {
                    if rng.gen_bool(0.1) {
                        f64::NAN
                    } else if ts.is_empty() {
                        0.0
                    } else {
                        let t = ts[rng.gen_range(0..ts.len())];
                        t + rng.gen_range(-1.0..1.0) * t.abs().max(1.0) * 1e-3
                    }
                })
                .collect()
        })
        .collect()
}

/// Largest engine-vs-enumeration gap, relative to the larger of the exact
/// value and the sum of per-leaf magnitudes.
fn spot_check(ensemble: &TreeEnsemble, samples: &[Vec<f64>], threads: usize) -> Result<(f64, usize), Failure> {
    let depth = ensemble.stats().max_unique_features;
    let mut worst = 0.0f64;
    let mut keys = 0;
    for order in 1..=depth.min(3) {
        let rule = gauss_legendre(min_points(depth, order).expect("order <= depth")).expect("valid size");
        let engine = QuadratureExplainer::new(rule).with_threads(threads);
        let out = engine.explain(ensemble, samples, order).map_err(|e| Failure::validation(e.to_string()))?;
        for (sample, result) in samples.iter().zip(&out.results) {
            let games = extract_path_games(ensemble, sample).map_err(|e| Failure::validation(e.to_string()))?;
            let exact = sii_exact_all(&games, order).map_err(|e| Failure::precondition(e.to_string()))?;
            keys += exact.len();
            let engine_values: &BTreeMap<Vec<usize>, f64> = &result.values;
            for (key, e) in &exact {
                let got = engine_values.get(key).copied().unwrap_or(0.0);
                let scale = e.value.abs().max(e.abs_leaf_sum);
                if scale > 0.0 || got != 0.0 {
                    worst = worst.max((got - e.value).abs() / scale.max(f64::MIN_POSITIVE));
                }
            }
            if engine_values.iter().any(|(k, v)| *v != 0.0 && !exact.contains_key(k)) {
                worst = f64::INFINITY;
            }
        }
    }
    Ok((worst, keys))
}

pub fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    let map = feature_map(&args.model)?;
    let ensemble = match model(&args.model, map.as_ref()) {
        Ok(ensemble) => ensemble,
        Err(failure) => {
            if failure.class == crate::failure::Class::Validation {
                println!("invariants: FAIL ({})", failure.message);
            }
            return Err(failure);
        }
    };
    let stats = ensemble.stats();
    let largest = ensemble.trees().iter().map(|t| t.len()).max().unwrap_or(0);
    println!(
        "model: {} trees, {} features, max depth {}, unique-feature depth {}, largest tree {} nodes",
        ensemble.trees().len(),
        ensemble.num_features(),
        stats.max_depth,
        stats.max_unique_features,
        largest
    );
    println!("invariants: PASS");

    let mut failed = Vec::new();
    let samples = probe_samples(&ensemble, args.samples, args.seed);

    let round_trip = parse_canonical(&emit_canonical(&ensemble))?;
    if samples.iter().all(|s| round_trip.predict(s).to_bits() == ensemble.predict(s).to_bits()) {
        println!("canonical round trip: PASS");
    } else {
        println!("canonical round trip: FAIL");
        failed.push("canonical round trip");
    }

    let points = min_points(stats.max_unique_features.max(1), 1).expect("order 1").max(8);
    let engine = QuadratureExplainer::new(gauss_legendre(points).expect("valid size")).with_threads(args.threads);
    let residual = engine.efficiency_error(&ensemble, &samples).map_err(|e| Failure::validation(e.to_string()))?;
    if residual <= EFFICIENCY_TOLERANCE {
        println!("efficiency: PASS (max residual {residual:.2e} over {} samples, {points} points)", samples.len());
    } else {
        println!("efficiency: FAIL (max residual {residual:.2e} exceeds {EFFICIENCY_TOLERANCE:e})");
        failed.push("efficiency");
    }

    if stats.max_unique_features > SPOT_CHECK_MAX_DEPTH || largest > SPOT_CHECK_MAX_NODES {
        println!("oracle spot-check: SKIPPED (size)");
    } else {
        let (gap, keys) = spot_check(&ensemble, &samples, args.threads)?;
        if gap <= SPOT_CHECK_TOLERANCE {
            println!("oracle spot-check: PASS (max relative gap {gap:.2e} over {keys} keys)");
        } else {
            println!("oracle spot-check: FAIL (max relative gap {gap:.2e} exceeds {SPOT_CHECK_TOLERANCE:e})");
            failed.push("oracle spot-check");
        }
    }

    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::validation(format!("validation failed: {}", failed.join(", "))))
    }
}

pub fn methods() -> Result<(), Failure> {
    for (name, description) in MethodRegistry::with_builtins().describe() {
        println!("{name:<12} {description}");
    }
    Ok(())
}
