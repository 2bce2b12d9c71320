//! End-to-end acceptance criteria. Each prints one PASS/FAIL line; the
//! process exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{max_relative_gap, samples_with_missing, small_ensemble};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treequad::engine::QuadratureExplainer;
use treequad::harness::{run_scaling, run_stability, uniform_samples, StabilityConfig, Timing};
use treequad::model::{generate_random_ensemble, RandomTreeConfig, TreeEnsemble};
use treequad::oracle::{
    banzhaf_poly, discrete_derivative, discrete_derivative_closed, extract_path_games, leaf_sii_exact,
    sii_exact_all, weighted_banzhaf_exact, PathGame,
};
use treequad::{gauss_legendre, min_points};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn explainer(points: usize) -> QuadratureExplainer {
    QuadratureExplainer::new(gauss_legendre(points).unwrap())
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut keys = 0usize;
    let mut zero_multipliers = 0usize;
    let mut max_nodes = 0usize;
    let mut max_depth = 0usize;
    for seed in 0..200u64 {
        let ens = small_ensemble(seed, 12);
        let stats = ens.stats();
        max_depth = max_depth.max(stats.max_unique_features);
        max_nodes = max_nodes.max(ens.trees().iter().map(|t| t.len()).max().unwrap());
        let d = stats.max_unique_features;
        let samples = samples_with_missing(ens.num_features(), 3, seed + 10_000);
        let games: Vec<_> = samples.iter().map(|s| extract_path_games(&ens, s).unwrap()).collect();
        zero_multipliers += games
            .iter()
            .flatten()
            .flat_map(|g| g.players().iter())
            .filter(|(_, q)| *q == 0.0)
            .count();
        for order in 1..=3.min(d) {
            let out = explainer(min_points(d, order).unwrap()).explain(&ens, &samples, order).unwrap();
            for (result, g) in out.results.iter().zip(&games) {
                let exact = sii_exact_all(g, order).unwrap();
                keys += exact.len();
                worst = worst.max(max_relative_gap(&result.values, &exact));
            }
        }
    }
    outcome(
        worst <= 1e-10 && zero_multipliers > 0 && max_nodes <= 256 && max_depth <= 12,
        format!(
            "max relative gap {worst:.2e} over {keys} keys (200 ensembles, N<={max_nodes}, d<={max_depth}, \
             {zero_multipliers} zero multipliers)"
        ),
    )
}

/// Largest single-term magnitude in the subset expansions of a game.
fn term_scale(game: &PathGame) -> f64 {
    game.players().iter().fold(game.r_empty.abs(), |acc, &(_, q)| acc * q.max(1.0)).max(1e-300)
}

/// Random leaf games taken from generated trees.
fn tree_games(count: usize, seed: u64) -> Vec<PathGame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count {
        let ens = small_ensemble(seed * 1000 + k, 10);
        k += 1;
        let sample = samples_with_missing(ens.num_features(), 1, k).remove(0);
        let games: Vec<_> = extract_path_games(&ens, &sample)
            .unwrap()
            .into_iter()
            .filter(|g| !g.players().is_empty())
            .collect();
        for _ in 0..3 {
            out.push(games[rng.gen_range(0..games.len())].clone());
        }
    }
    out.truncate(count);
    out
}

fn identity_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let rule = gauss_legendre(64).unwrap();
    let games = tree_games(400, 7);
    let (mut derivative, mut banzhaf, mut integral) = (0.0f64, 0.0f64, 0.0f64);
    let mut counts = [0usize; 3];
    for g in &games {
        let scale = term_scale(g);
        let features = g.features();
        let nulls = [100, 101, 102];
        let universe: Vec<usize> = features.iter().chain(&nulls).copied().collect();

        let s: Vec<usize> = universe.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
        let t: Vec<usize> = universe.iter().copied().filter(|x| !s.contains(x) && rng.gen_bool(0.5)).collect();
        let a = discrete_derivative(g, &s, &t).unwrap();
        let b = discrete_derivative_closed(g, &s, &t).unwrap();
        derivative = derivative.max((a - b).abs() / scale);
        counts[0] += 1;

        let s: Vec<usize> = features.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        let p = rng.gen_range(0.0..=1.0);
        let a = weighted_banzhaf_exact(g, &s, p).unwrap();
        let b = banzhaf_poly(g, &s, p);
        banzhaf = banzhaf.max((a - b).abs() / scale);
        counts[1] += 1;

        let size = rng.gen_range(1..=features.len().min(3));
        let mut s = features.clone();
        for i in 0..size {
            let j = rng.gen_range(i..s.len());
            s.swap(i, j);
        }
        s.truncate(size);
        s.sort_unstable();
        let exact = leaf_sii_exact(g, &s).unwrap();
        let quad = rule.integrate(|p| banzhaf_poly(g, &s, p));
        integral = integral.max((exact - quad).abs() / scale);
        counts[2] += 1;
    }
    outcome(
        derivative <= 1e-12 && banzhaf <= 1e-12 && integral <= 1e-11 && counts.iter().all(|&c| c >= 300),
        format!(
            "derivative {derivative:.2e}, banzhaf {banzhaf:.2e}, integral {integral:.2e} \
             ({} instances each, relative to the largest expansion term)",
            counts[0]
        ),
    )
}

fn exactness() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..60u64 {
        let ens = small_ensemble(seed + 50_000, 12);
        let d = ens.stats().max_unique_features;
        let samples = samples_with_missing(ens.num_features(), 2, seed);
        let games: Vec<_> = samples.iter().map(|s| extract_path_games(&ens, s).unwrap()).collect();
        for order in 1..=3.min(d) {
            let small = explainer(min_points(d, order).unwrap()).explain(&ens, &samples, order).unwrap();
            let large = explainer(64).explain(&ens, &samples, order).unwrap();
            for ((a, b), g) in small.results.iter().zip(&large.results).zip(&games) {
                let exact = sii_exact_all(g, order).unwrap();
                for (key, v) in &b.values {
                    let got = a.values.get(key).copied().unwrap_or(0.0);
                    let scale = v.abs().max(exact[key].abs_leaf_sum).max(1e-300);
                    worst = worst.max((got - v).abs() / scale);
                }
                if a.values.keys().any(|k| !b.values.contains_key(k)) {
                    worst = f64::INFINITY;
                }
            }
        }
    }
    let m3 = min_points(10, 3).unwrap();
    let m1 = min_points(10, 1).unwrap();
    outcome(
        worst <= 1e-11 && m3 == 4 && m1 == 5,
        format!("min_points vs 64 points: {worst:.2e} relative; min_points(10,3)={m3}, min_points(10,1)={m1}"),
    )
}

fn quadrature_rules() -> Outcome {
    let (mut mono, mut sum, mut sym) = (0.0f64, 0.0f64, 0.0f64);
    let mut remainder = 0.0f64;
    for n in 1..=16 {
        let rule = gauss_legendre(n).unwrap();
        for k in 0..2 * n {
            let approx = rule.integrate(|x| x.powi(k as i32));
            mono = mono.max((approx - 1.0 / (k + 1) as f64).abs());
        }
        sum = sum.max((rule.weights().iter().sum::<f64>() - 1.0).abs());
        for i in 0..n {
            let j = n - 1 - i;
            sym = sym.max((rule.nodes()[i] + rule.nodes()[j] - 1.0).abs());
            sym = sym.max((rule.weights()[i] - rule.weights()[j]).abs());
        }
        // Degree 2n is not integrated exactly; the shortfall is (n!)^4 / ((2n+1) ((2n)!)^2).
        if n <= 6 {
            let fact = |m: usize| (1..=m).map(|x| x as f64).product::<f64>();
            let predicted = fact(n).powi(4) / ((2 * n + 1) as f64 * fact(2 * n).powi(2));
            let observed = 1.0 / (2 * n + 1) as f64 - rule.integrate(|x| x.powi(2 * n as i32));
            remainder = remainder.max((observed - predicted).abs() / predicted);
        }
    }
    outcome(
        mono <= 1e-13 && sum <= 1e-14 && sym <= 1e-14 && remainder <= 1e-6,
        format!(
            "n=1..16: monomial {mono:.2e}, weight sum {sum:.2e}, symmetry {sym:.2e}; \
             degree-2n remainder matches its closed form to {remainder:.2e}"
        ),
    )
}

fn stability() -> Outcome {
    let config = StabilityConfig {
        rule_sizes: vec![6, 8],
        timing: Timing { warmups: 0, repetitions: 1 },
        threads: 0,
        ..StabilityConfig::default()
    };
    let report = run_stability(&config).unwrap();
    let eight: Vec<f64> = report.series(8).iter().map(|r| r.max_error).collect();
    let six: Vec<f64> = report.series(6).iter().map(|r| r.max_error).collect();
    let bounded = eight.iter().all(|&e| e <= 1e-6);
    // Monotone blow-up: strictly increasing at every depth step and ending above the bound.
    let blow_up = eight.windows(2).all(|w| w[1] > w[0]) && eight.last().is_some_and(|&e| e > 1e-6);
    // Ratios below the rounding floor carry no information.
    let floor = 1e-14;
    let ratios: Vec<f64> = six.iter().zip(&eight).map(|(a, b)| a / b.max(floor)).collect();
    let six_close = ratios.iter().all(|&r| r <= 10.0);
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(" ");
    println!("        depths {:?}", config.depths);
    println!("        n=8 max error {}", fmt(&eight));
    println!("        n=6 max error {}", fmt(&six));
    println!("        n=6 / n=8     {}", ratios.iter().map(|r| format!("{r:.0}")).collect::<Vec<_>>().join(" "));
    println!(
        "        note: n=6 max error stays <= 1e-5 at every depth: {}",
        six.iter().all(|&e| e <= 1e-5)
    );
    outcome(
        bounded && !blow_up && six_close,
        format!(
            "n=8 bounded by 1e-6: {bounded}; monotone blow-up: {blow_up}; n=6 within 10x of n=8: {six_close} \
             (worst ratio {:.0})",
            ratios.iter().fold(0.0f64, |m, &r| m.max(r))
        ),
    )
}

fn efficiency_and_packing() -> Outcome {
    let (mut eff, mut pack) = (0.0f64, 0.0f64);
    let mut explained = 0usize;
    let mut check = |ens: &TreeEnsemble, samples: &[Vec<f64>]| {
        let e = explainer(8).with_threads(0);
        eff = eff.max(e.efficiency_error(ens, samples).unwrap());
        for (m, s) in e.explain_interactions_matrix(ens, samples).unwrap().iter().zip(samples) {
            pack = pack.max((m.sum() - (ens.predict(s) - m.bias)).abs());
        }
        explained += samples.len();
    };
    for seed in 0..200u64 {
        let ens = small_ensemble(seed, 12);
        check(&ens, &samples_with_missing(ens.num_features(), 5, seed));
    }
    for depth in [16, 32, 48] {
        let config = RandomTreeConfig::new(depth, 784, 0.05, depth as u64);
        let ens = generate_random_ensemble(&config, 2);
        check(&ens, &uniform_samples(784, 20, depth as u64));
    }
    outcome(
        eff <= 1e-8 && pack <= 1e-8,
        format!("efficiency {eff:.2e}, packed matrix {pack:.2e} over {explained} samples"),
    )
}

fn complexity_shape() -> Outcome {
    let config = RandomTreeConfig::new(18, 200, 0.0, 18);
    let ens = generate_random_ensemble(&config, 4);
    let d = ens.stats().max_unique_features;
    let sample = uniform_samples(200, 1, 18).remove(0);
    let report = run_scaling(
        &[2, 3, 4, 5, 6],
        &ens,
        &sample,
        &gauss_legendre(8).unwrap(),
        1,
        Timing { warmups: 1, repetitions: 5 },
    )
    .unwrap();
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("scaling.csv");
    std::fs::write(&path, report.to_csv(true)).unwrap();
    let times: Vec<f64> = report.rows.iter().map(|r| r.wall_time_s).collect();
    let ratios: Vec<f64> = times.windows(2).map(|w| w[1] / w[0]).collect();
    let grows = ratios.iter().all(|&r| r > 1.0);
    let bounded = ratios.iter().all(|&r| r <= 4.0 * d as f64);
    outcome(
        d == 18 && grows && bounded,
        format!(
            "d={d}, times {} s, step ratios {} (bound {}); CSV at {}",
            times.iter().map(|t| format!("{t:.2e}")).collect::<Vec<_>>().join(" "),
            ratios.iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>().join(" "),
            4 * d,
            path.display()
        ),
    )
}

fn determinism() -> Outcome {
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    let bits = |values: &BTreeMap<Vec<usize>, f64>| -> Vec<(Vec<usize>, u64)> {
        values.iter().map(|(k, v)| (k.clone(), v.to_bits())).collect()
    };
    let mut ensembles: Vec<(TreeEnsemble, usize)> = (0..10).map(|s| (small_ensemble(s + 7_000, 12), 3)).collect();
    ensembles.push((generate_random_ensemble(&RandomTreeConfig::new(40, 784, 0.05, 1), 16), 2));
    for (ens, max_order) in &ensembles {
        let samples = samples_with_missing(ens.num_features(), 40, 5);
        for order in 1..=(*max_order).min(ens.stats().max_unique_features) {
            let reference: Vec<_> =
                explainer(8).explain(ens, &samples, order).unwrap().results.iter().map(|r| bits(&r.values)).collect();
            for threads in [1, 1, 1, 4, 4, 4] {
                let run: Vec<_> = explainer(8)
                    .with_threads(threads)
                    .explain(ens, &samples, order)
                    .unwrap()
                    .results
                    .iter()
                    .map(|r| bits(&r.values))
                    .collect();
                compared += 1;
                mismatches += usize::from(run != reference);
            }
        }
    }
    outcome(mismatches == 0, format!("{compared} repeated runs over threads {{1, 4}}, {mismatches} differ bitwise"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("identity suite", identity_suite),
        ("minimal rule exactness", exactness),
        ("quadrature rules", quadrature_rules),
        ("depth stability", stability),
        ("efficiency and packing", efficiency_and_packing),
        ("complexity shape", complexity_shape),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let status = if result.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {}. {name}: {} [{:.1}s]",
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.passed {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: {} of {} criteria failed: {failed:?}", failed.len(), criteria.len());
        std::process::exit(1);
    }
}
