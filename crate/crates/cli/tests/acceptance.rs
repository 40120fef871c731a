//! Acceptance gate: eight criteria, one pass/fail line each.
//!
//! Every numeric expectation here is checked against an oracle computed
//! inside this file (independent subgradient descent, exhaustive pair
//! enumeration, hand-built instances), never against the library's own
//! output recorded earlier.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use placerec_cli::commands::{cmd_match, cmd_train};
use placerec_cli::config::RunConfig;
use placerec_cli::model_file::ModelFile;
use placerec_cli::synth::{generate, DisparityProfile, SynthOptions};
use placerec_core::eval::{default_thresholds, modality_report, pr_curve};
use placerec_core::features::{DescriptorConfig, NormStats};
use placerec_core::geo::GroundTruth;
use placerec_core::matching::{extract_weights, score};
use placerec_core::model::{loss, m_norm, objective, s_norm, LossVariant};
use placerec_core::solver::{smooth_gradient, solve, Backend, SolverConfig};
use placerec_core::{FeatureMatrix, Hyperparams, ModalityLayout, ScenarioLabels, WeightMatrix};

fn report(criterion: usize, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion} {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

// Deterministic xorshift generator for instance construction.
struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(seed.wrapping_mul(0x9E3779B97F4A7C15) | 1)
    }

    fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn next_usize(&mut self, lo: usize, hi: usize) -> usize {
        lo + ((self.next_f64() + 1.0) / 2.0 * (hi - lo) as f64) as usize % (hi - lo)
    }
}

struct Instance {
    a: FeatureMatrix,
    b: ScenarioLabels,
    h: Hyperparams,
}

/// Random small instance: 2 sensors x 2 features, p <= 12, n <= 20, c <= 3.
fn random_instance(seed: u64) -> Instance {
    let mut rng = Rng::new(seed);
    let dims: Vec<usize> = (0..4).map(|_| rng.next_usize(1, 4)).collect();
    let layout = ModalityLayout::from_spec(&[
        ("intensity", &[("f0", dims[0]), ("f1", dims[1])]),
        ("disparity", &[("f0", dims[2]), ("f1", dims[3])]),
    ])
    .unwrap();
    let p = layout.total_dim();
    let c = rng.next_usize(1, 4);
    let n = rng.next_usize(c.max(4), 21);
    let a = FeatureMatrix::new(
        layout,
        DMatrix::from_fn(p, n, |_, _| rng.next_f64()),
        (0..n).map(|i| format!("img{i}")).collect(),
    )
    .unwrap();
    let assignments: Vec<usize> = (0..n).map(|i| i % c).collect();
    let b = ScenarioLabels::from_assignments(&assignments, (0..c).map(|i| format!("s{i}")).collect())
        .unwrap();
    Instance { a, b, h: Hyperparams::default() }
}

/// Objective computed from first principles, independent of the library.
fn oracle_objective(inst: &Instance, w: &DMatrix<f64>) -> f64 {
    let r = inst.a.values.transpose() * w - &inst.b.values;
    let mut f = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    for (_, _, range) in inst.a.layout.feature_blocks() {
        let norm: f64 = w
            .rows(range.start, range.len())
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        f += inst.h.lambda1 * norm;
    }
    for (_, range) in inst.a.layout.sensor_blocks() {
        let norm: f64 = w
            .rows(range.start, range.len())
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        f += inst.h.lambda2 * norm;
    }
    f
}

/// Projected-subgradient oracle: normalized diminishing steps from zero,
/// tracking the best objective visited.
fn subgradient_oracle(inst: &Instance, iters: usize) -> f64 {
    let p = inst.a.values.nrows();
    let c = inst.b.values.ncols();
    let mut w = DMatrix::zeros(p, c);
    let mut best = oracle_objective(inst, &w);
    for t in 1..=iters {
        let r = inst.a.values.transpose() * &w - &inst.b.values;
        let mut g = &inst.a.values * r;
        for (_, _, range) in inst.a.layout.feature_blocks() {
            let block = w.rows(range.start, range.len());
            let norm: f64 = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for j in 0..c {
                    for i in range.clone() {
                        g[(i, j)] += inst.h.lambda1 * w[(i, j)] / norm;
                    }
                }
            }
        }
        for (_, range) in inst.a.layout.sensor_blocks() {
            let block = w.rows(range.start, range.len());
            let norm: f64 = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for j in 0..c {
                    for i in range.clone() {
                        g[(i, j)] += inst.h.lambda2 * w[(i, j)] / norm;
                    }
                }
            }
        }
        let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let step = 0.5 / (t as f64).sqrt();
        w -= g * (step / gnorm);
        let f = oracle_objective(inst, &w);
        if f < best {
            best = f;
        }
    }
    best
}

fn solver_config(backend: Backend) -> SolverConfig {
    SolverConfig { max_iters: 20000, tol: 1e-12, epsilon: 1e-10, backend }
}

#[test]
fn criterion_1_solver_matches_subgradient_oracle() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..25u64 {
        let inst = random_instance(seed + 100);
        let res = solve(&inst.a, &inst.b, &inst.h, &solver_config(Backend::Irls)).unwrap();
        let f_solver = oracle_objective(&inst, &res.w.values);
        let f_oracle = subgradient_oracle(&inst, 120_000);
        let rel = (f_solver - f_oracle).abs() / f_oracle.abs().max(1.0);
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= 1e-4 && elapsed < 5.0,
        &format!("25 instances, worst relative objective gap {worst:.2e}, {elapsed:.2}s (< 5s)"),
    );
}

#[test]
fn criterion_2_backends_agree() {
    let mut worst: f64 = 0.0;
    for seed in 0..25u64 {
        let inst = random_instance(seed + 100);
        let f_irls = objective(
            &inst.a,
            &inst.b,
            &solve(&inst.a, &inst.b, &inst.h, &solver_config(Backend::Irls)).unwrap().w,
            &inst.h,
        )
        .unwrap();
        let f_prox = objective(
            &inst.a,
            &inst.b,
            &solve(&inst.a, &inst.b, &inst.h, &solver_config(Backend::ProxGrad)).unwrap().w,
            &inst.h,
        )
        .unwrap();
        let rel = (f_irls - f_prox).abs() / f_irls.abs().max(1.0);
        worst = worst.max(rel);
    }
    report(2, worst <= 1e-5, &format!("irls vs prox_grad, worst relative gap {worst:.2e}"));
}

#[test]
fn criterion_3_gradient_matches_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let inst = random_instance(seed + 500);
        let mut rng = Rng::new(seed + 900);
        let p = inst.a.values.nrows();
        let c = inst.b.values.ncols();
        let w = WeightMatrix::new(
            inst.a.layout.clone(),
            DMatrix::from_fn(p, c, |_, _| rng.next_f64()),
        )
        .unwrap();
        let grad = smooth_gradient(&inst.a, &inst.b, &w, &inst.h).unwrap();
        let eps = 1e-6;
        for i in 0..p {
            for j in 0..c {
                let mut wp = w.clone();
                wp.values[(i, j)] += eps;
                let mut wm = w.clone();
                wm.values[(i, j)] -= eps;
                let fp = loss(&inst.a, &inst.b, &wp, LossVariant::Squared).unwrap();
                let fm = loss(&inst.a, &inst.b, &wm, LossVariant::Squared).unwrap();
                let fd = (fp - fm) / (2.0 * eps);
                let rel = (grad[(i, j)] - fd).abs() / fd.abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    report(3, worst <= 1e-5, &format!("10 instances, worst relative gradient error {worst:.2e}"));
}

#[test]
fn criterion_4_documented_constants_round_trip() {
    let cfg = RunConfig::default();
    let round = RunConfig::from_text(&cfg.to_text()).unwrap();
    let pass = round == cfg
        && round.lambda1 == 0.1
        && round.lambda2 == 0.01
        && round.radius_m == 50.0
        && (round.downsample_width, round.downsample_height) == (752, 120);
    report(
        4,
        pass,
        &format!(
            "defaults lambda1={} lambda2={} radius_m={} downsample={}x{} survive config round-trip",
            round.lambda1,
            round.lambda2,
            round.radius_m,
            round.downsample_height,
            round.downsample_width
        ),
    );
}

fn bench_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("placerec-acceptance-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn synth_benchmark(dir: &PathBuf, flip: bool) -> Vec<PathBuf> {
    let opts = SynthOptions {
        seed: 42,
        places: 20,
        scenarios: 3,
        profile: DisparityProfile::Noise,
        flip,
        width: 256,
        height: 64,
    };
    generate(&opts, dir).unwrap()
}

fn sensor_shares(model: &ModelFile) -> Vec<f64> {
    let total: f64 = model
        .layout()
        .sensor_blocks()
        .iter()
        .map(|(q, _)| {
            model
                .weights
                .block_view(*q, None)
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    model
        .layout()
        .sensor_blocks()
        .iter()
        .map(|(q, _)| {
            100.0
                * model
                    .weights
                    .block_view(*q, None)
                    .unwrap()
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
                / total
        })
        .collect()
}

#[test]
fn criterion_5_noise_disparity_benchmark() {
    let start = Instant::now();
    let dir = bench_dir("noise");
    let manifests = synth_benchmark(&dir, false);
    let cfg = RunConfig::default();
    let trained = cmd_train(&manifests, &[], None, &cfg, &dir.join("train")).unwrap();
    let shares = sensor_shares(&trained.model);
    let (intensity_share, disparity_share) = (shares[0], shares[1]);
    let outcome = cmd_match(
        &trained.model_path,
        &manifests[0],
        &manifests[1],
        &[],
        None,
        cfg.threshold,
        cfg.radius_m,
        &dir.join("match"),
    )
    .unwrap();
    let margin = outcome.weighted.auc - outcome.baseline.auc;
    let elapsed = start.elapsed().as_secs_f64();
    report(
        5,
        disparity_share < 5.0 && intensity_share > 95.0 && margin >= 0.05 && elapsed < 60.0,
        &format!(
            "disparity share {disparity_share:.3}% (< 5%), intensity {intensity_share:.3}% (> 95%), weighted AUC {:.4} vs baseline {:.4} (margin {margin:.4} >= 0.05), {elapsed:.1}s (< 60s)",
            outcome.weighted.auc, outcome.baseline.auc
        ),
    );
}

#[test]
fn criterion_6_bidirectional_benchmark() {
    let start = Instant::now();
    let dir = bench_dir("bidirectional");
    let manifests = synth_benchmark(&dir, true);
    // scenario-major, forward before backward: [s0 fwd, s0 bwd, s1 fwd, ...]
    let forward_s0 = manifests[0].clone();
    let backward_s0 = manifests[1].clone();
    let forward_s1 = manifests[2].clone();
    let cfg = RunConfig::default();
    let trained =
        cmd_train(&[forward_s0.clone(), forward_s1], &[], None, &cfg, &dir.join("train")).unwrap();
    let outcome = cmd_match(
        &trained.model_path,
        &forward_s0,
        &backward_s0,
        &[],
        None,
        cfg.threshold,
        cfg.radius_m,
        &dir.join("match"),
    )
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    report(
        6,
        outcome.weighted.auc >= outcome.baseline.auc
            && outcome.top1_recall >= 0.9
            && elapsed < 60.0,
        &format!(
            "weighted AUC {:.4} >= baseline {:.4}, top-1 recall {:.3} (>= 0.9) at 50 m, {elapsed:.1}s (< 60s)",
            outcome.weighted.auc, outcome.baseline.auc, outcome.top1_recall
        ),
    );
}

#[test]
fn criterion_7_pr_counts_match_exhaustive_enumeration() {
    let mut rng = Rng::new(7777);
    let mut checked = 0usize;
    let mut pass = true;
    'trials: for _ in 0..100 {
        let nq = rng.next_usize(1, 11);
        let nt = rng.next_usize(1, 11);
        let scores: Vec<Vec<f64>> = (0..nq)
            .map(|_| (0..nt).map(|_| (rng.next_f64() + 1.0) / 2.0).collect())
            .collect();
        let mut gt_rows: Vec<Vec<bool>> =
            (0..nq).map(|_| (0..nt).map(|_| rng.next_f64() > 0.4).collect()).collect();
        if !gt_rows.iter().flatten().any(|&b| b) {
            gt_rows[0][0] = true; // PR needs at least one positive pair
        }
        let gt = GroundTruth { same_place: gt_rows.clone(), radius_m: 50.0 };
        let curve = pr_curve(&scores, &gt, &default_thresholds()).unwrap();
        for point in &curve.points {
            let mut tp = 0;
            let mut fp = 0;
            let mut fn_ = 0;
            for i in 0..nq {
                for j in 0..nt {
                    match (scores[i][j] >= point.threshold, gt_rows[i][j]) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
            checked += 1;
            if (point.tp, point.fp, point.fn_) != (tp, fp, fn_) {
                pass = false;
                break 'trials;
            }
        }
    }
    report(7, pass, &format!("100 random trials, {checked} threshold points match exhaustive counts"));
}

#[test]
fn criterion_8_norm_properties_and_model_round_trip() {
    let mut pass = true;
    let mut notes = Vec::new();

    // norm axioms and convexity midpoint checks on random instances
    for seed in 0..20u64 {
        let inst = random_instance(seed + 2000);
        let mut rng = Rng::new(seed + 3000);
        let p = inst.a.values.nrows();
        let c = inst.b.values.ncols();
        let mk = |rng: &mut Rng| {
            WeightMatrix::new(
                inst.a.layout.clone(),
                DMatrix::from_fn(p, c, |_, _| rng.next_f64() * 3.0),
            )
            .unwrap()
        };
        let w1 = mk(&mut rng);
        let w2 = mk(&mut rng);
        let alpha = rng.next_f64() * 4.0;
        for norm in [m_norm, s_norm] {
            let scaled =
                WeightMatrix::new(inst.a.layout.clone(), &w1.values * alpha).unwrap();
            if (norm(&scaled) - alpha.abs() * norm(&w1)).abs() > 1e-9 * (1.0 + norm(&w1)) {
                pass = false;
                notes.push("homogeneity".to_string());
            }
            let sum = WeightMatrix::new(inst.a.layout.clone(), &w1.values + &w2.values).unwrap();
            if norm(&sum) > norm(&w1) + norm(&w2) + 1e-9 {
                pass = false;
                notes.push("triangle".to_string());
            }
        }
        let zero = WeightMatrix::zeros(inst.a.layout.clone(), c);
        if m_norm(&zero) != 0.0 || s_norm(&zero) != 0.0 {
            pass = false;
            notes.push("zero".to_string());
        }
        // convexity at the midpoint
        let mid =
            WeightMatrix::new(inst.a.layout.clone(), (&w1.values + &w2.values) * 0.5).unwrap();
        let fm = objective(&inst.a, &inst.b, &mid, &inst.h).unwrap();
        let f1 = objective(&inst.a, &inst.b, &w1, &inst.h).unwrap();
        let f2 = objective(&inst.a, &inst.b, &w2, &inst.h).unwrap();
        if fm > 0.5 * f1 + 0.5 * f2 + 1e-9 * (1.0 + f1.abs() + f2.abs()) {
            pass = false;
            notes.push("convexity".to_string());
        }

        // weight-scale invariance of scores and modality percentages
        let weights = extract_weights(&w1).unwrap();
        let scaled_w =
            WeightMatrix::new(inst.a.layout.clone(), &w1.values * 7.5).unwrap();
        let weights_scaled = extract_weights(&scaled_w).unwrap();
        let x: Vec<f64> = (0..p).map(|_| rng.next_f64()).collect();
        let y: Vec<f64> = (0..p).map(|_| rng.next_f64()).collect();
        let s1 = score(&x, &y, &weights).unwrap();
        let s2 = score(&x, &y, &weights_scaled).unwrap();
        if (s1 - s2).abs() > 1e-9 {
            pass = false;
            notes.push("score-scale".to_string());
        }
        let r1 = modality_report(&weights).unwrap();
        let r2 = modality_report(&weights_scaled).unwrap();
        if r1
            .iter()
            .zip(&r2)
            .any(|(a, b)| a.name != b.name || (a.percent - b.percent).abs() > 1e-9)
        {
            pass = false;
            notes.push("report-scale".to_string());
        }
    }

    // model-file round-trip bit identity
    let inst = random_instance(4242);
    let res = solve(&inst.a, &inst.b, &inst.h, &solver_config(Backend::Irls)).unwrap();
    let model = ModelFile {
        config: RunConfig::default(),
        descriptor: DescriptorConfig::default(),
        scenario_names: inst.b.scenario_names.clone(),
        stats: NormStats {
            per_block: inst
                .a
                .layout
                .feature_blocks()
                .iter()
                .map(|(q, k, _)| ((*q as f64 + 0.1) / 3.0, (*k as f64 + 1.7) / 7.0))
                .collect(),
        },
        weights: res.w,
        iterations: res.iterations,
        converged: res.converged,
        final_objective: *res.objective_trace.last().unwrap(),
    };
    let text = model.to_text();
    let loaded = ModelFile::from_text(&text).unwrap();
    let bits_equal = model
        .weights
        .values
        .iter()
        .zip(loaded.weights.values.iter())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && model
            .stats
            .per_block
            .iter()
            .zip(&loaded.stats.per_block)
            .all(|(a, b)| a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits())
        && loaded.to_text() == text;
    if !(loaded == model && bits_equal) {
        pass = false;
        notes.push("model-round-trip".to_string());
    }

    report(
        8,
        pass,
        &if notes.is_empty() {
            "norm axioms, convexity midpoints, scale invariance, model round-trip bit identity"
                .to_string()
        } else {
            format!("failed checks: {}", notes.join(", "))
        },
    );
}
