//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 3 5`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mixval::config::GenerateConfig;
use mixval::evalharness::{
    evaluate_method, spearman, time_method, train_ground_truth, GroundTruth, TimingOptions, TrainingConfig,
};
use mixval::longtail::{make_contributors, make_test_set, Contributor, Sample};
use mixval::mmd::{mmd, Estimator, MultiKernelSpec, DEFAULT_BANDWIDTH_MULTIPLIERS};
use mixval::ntk::{ntk_gram, Activation, MlpSpec, Model, OutputMap};
use mixval::rng;
use mixval::scaling::{ErrorModel, ScalingParams};
use mixval::special::upper_incomplete_gamma;
use mixval::valuation::{
    fit_weights, loss_discrepancy_target, shapley_exact, ValuationConfig, ValuationScore, ValuationWeights, Valuator,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mixval")
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

fn write_json(path: &Path, v: &Value) -> PathBuf {
    fs::write(path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    path.to_path_buf()
}

fn run_cli(args: &[&str]) {
    let out = Command::new(bin()).args(args).output().expect("spawn mixval");
    assert!(
        out.status.success(),
        "mixval {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn fixture(cfg: &Value) -> (Vec<Contributor>, Vec<Sample>) {
    let cfg: GenerateConfig = serde_json::from_value(cfg.clone()).expect("generate config");
    let mix = cfg.mixture().unwrap();
    let space = cfg.feature_space().unwrap();
    let cs = make_contributors(&cfg.plan_pairs(), &mix, &space, &cfg.shift, cfg.seed).unwrap();
    let test = make_test_set(&mix.real_dist, cfg.test_size, &space, cfg.seed).unwrap();
    (cs, test)
}

/// Ten contributors of `14·scale` samples whose real share steps from 9/14
/// down to 0; synthetic samples are shifted in feature space and carry
/// random labels.
fn schedule_fixture(seed: u64, scale: usize, rows: &[usize], test_size: usize) -> Value {
    let plan: Vec<Value> = rows
        .iter()
        .map(|&r| json!({"real": r * scale, "synth": (14 - r) * scale}))
        .collect();
    json!({
        "seed": seed,
        "feature_seed": 99,
        "dim": 8,
        "beta": 1.2,
        "cutoff": 10,
        "support_max": 200,
        "noise_sigma": 0.3,
        "shift": {"feature_shift": 0.8, "label_flip": 0.5},
        "plan": plan,
        "test_size": test_size,
    })
}

// real samples per 14, contributor by contributor
const REAL_SHARES: [usize; 10] = [9, 8, 7, 6, 5, 4, 3, 2, 1, 0];

fn scores_of(valuator: &Valuator<'_>, cs: &[Contributor]) -> Vec<ValuationScore> {
    valuator.score_all(cs).into_iter().map(|r| r.expect("score")).collect()
}

fn column(scores: &[ValuationScore], f: impl Fn(&ValuationScore) -> f64) -> Vec<(String, f64)> {
    scores.iter().map(|s| (s.contributor_id.clone(), f(s))).collect()
}

fn abs_spearman(scores: &[(String, f64)], truth: &[GroundTruth]) -> f64 {
    evaluate_method(scores, truth).expect("evaluation").as_is.spearman.abs()
}

// --- 1 -------------------------------------------------------------------

fn three_phases() -> Outcome {
    let dir = scratch();
    let cfg = write_json(&dir.path().join("simulate.json"), &json!({}));
    let out = dir.path().join("out");
    let started = Instant::now();
    run_cli(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let secs = started.elapsed().as_secs_f64();

    // monotonicity straight from the curve file
    let mut curves: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let csv = fs::read_to_string(out.join("curves.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        curves.entry(f[0].to_string()).or_default().push(f[2].parse().unwrap());
    }
    let monotone = curves.values().all(|e| e.windows(2).all(|w| w[1] <= w[0]));

    let summary: Vec<Value> = serde_json::from_slice(&fs::read(out.join("simulate.json")).unwrap()).unwrap();
    let mut plateau_ok = true;
    let mut breaks_ok = true;
    let mut parts = Vec::new();
    for s in &summary {
        let pi = s["pi"].as_f64().unwrap();
        let b = &s["breakpoints"];
        let ratio = |d: &Value, p: &Value| {
            d.as_f64()
                .map(|d| (d / p.as_f64().unwrap()).max(p.as_f64().unwrap() / d))
        };
        let r1 = ratio(&b["detected_first"], &b["predicted_first"]);
        let r2 = ratio(&b["detected_second"], &b["predicted_second"]);
        let holds = s["plateau_holds"].as_bool().unwrap_or(false);
        plateau_ok &= holds;
        breaks_ok &= r1.is_some_and(|r| r <= 3.0) && r2.is_some_and(|r| r <= 3.0);
        parts.push(format!(
            "π={pi}: plateau {} (in {:.3} vs {:.3}/{:.3}), first {} ×{:.2}, second {} ×{:.2}",
            if holds { "ok" } else { "no" },
            s["plateau"]["inside"].as_f64().unwrap_or(f64::NAN),
            s["plateau"]["before"].as_f64().unwrap_or(f64::NAN),
            s["plateau"]["after"].as_f64().unwrap_or(f64::NAN),
            b["detected_first"],
            r1.unwrap_or(f64::NAN),
            b["detected_second"],
            r2.unwrap_or(f64::NAN),
        ));
    }
    let fast = secs < 60.0;
    outcome(
        monotone && plateau_ok && breaks_ok && fast,
        format!(
            "(a) monotone {monotone}; (b) plateau {plateau_ok}; (c) breakpoints within 3× {breaks_ok}; {secs:.1}s; {}",
            parts.join("; ")
        ),
    )
}

// --- 2 -------------------------------------------------------------------

fn phase_exponents() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for pi in [0.1, 0.25, 0.5] {
        let params = ScalingParams::reference(pi);
        let model = ErrorModel::new(&params).unwrap();
        let slopes = |lo: f64, hi: f64| {
            let ns = common::geom(lo, hi, 21);
            let b: Vec<_> = ns.iter().map(|&n| model.breakdown(n.round() as u64)).collect();
            let r: Vec<f64> = b.iter().map(|x| x.unseen_rho).collect();
            let g: Vec<f64> = b.iter().map(|x| x.unseen_gamma).collect();
            (common::log_log_slope(&ns, &r), common::log_log_slope(&ns, &g))
        };
        let scale = 0.1 / pi;
        let (r1, g1) = slopes(10.0, 100.0);
        let (r3, g3) = slopes(1e5 * scale, 1e6 * scale);
        let (ea, eb) = (params.rho_exponent(), params.gamma_exponent());
        for d in [r1 - ea, g1 - eb, r3 - ea, g3 - eb] {
            worst = worst.max(d.abs());
        }
        parts.push(format!("π={pi}: early {r1:.3}/{g1:.3}, late {r3:.3}/{g3:.3}"));
    }
    outcome(
        worst <= 0.1,
        format!(
            "exponents −0.667/−1.000; max deviation {worst:.3}; {}",
            parts.join("; ")
        ),
    )
}

// --- 3 -------------------------------------------------------------------

fn special_function() -> Outcome {
    let ss = common::geom(0.1, 10.0, 20);
    let mut xs = vec![0.0];
    xs.extend(common::geom(0.01, 50.0, 19));
    let mut worst: f64 = 0.0;
    for &s in &ss {
        for &x in &xs {
            let got = upper_incomplete_gamma(s, x).unwrap();
            let want = common::upper_gamma_quadrature(s, x);
            worst = worst.max(((got - want) / want).abs());
        }
    }
    let mut worst_exp: f64 = 0.0;
    for x in (0..=100).map(|i| i as f64 * 0.5) {
        let got = upper_incomplete_gamma(1.0, x).unwrap();
        worst_exp = worst_exp.max(((got - (-x).exp()) / (-x).exp()).abs());
    }
    outcome(
        worst <= 1e-10 && worst_exp <= 1e-14,
        format!("max rel. error vs quadrature {worst:.1e} (20×20 grid); Γ(1,x) vs e^−x {worst_exp:.1e}"),
    )
}

// --- 4 -------------------------------------------------------------------

fn unit_inputs(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, 3);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / norm).collect()
        })
        .collect()
}

fn ntk_correctness() -> Outcome {
    let mut r = rng::stream(4, 0);
    let mut worst_grad: f64 = 0.0;
    for case in 0..30u64 {
        let depth = r.random_range(1..=3);
        let width = [4usize, 16, 64][r.random_range(0..3)];
        let mut widths = vec![5];
        widths.extend(std::iter::repeat_n(width, depth - 1));
        widths.push(1);
        let mut spec = MlpSpec::new(widths, Activation::Tanh, case).unwrap();
        if r.random::<bool>() {
            spec.output = OutputMap::Identity;
        }
        let model = Model::initialized(spec).unwrap();
        let x = &unit_inputs(1, 5, 500 + case)[0];
        let (_, g) = model.forward_with_gradient(x).unwrap();
        let h = 1e-5;
        let (mut diff, mut norm) = (0.0, 0.0);
        for c in 0..model.params.len() {
            let eval = |delta: f64| {
                let mut m = model.clone();
                m.params.values[c] += delta;
                m.forward(x).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            diff += (fd - g[c]).powi(2);
            norm += g[c].powi(2);
        }
        worst_grad = worst_grad.max((diff / norm).sqrt());
    }

    let mut worst_sym: f64 = 0.0;
    let mut psd = true;
    let mut worst_brute: f64 = 0.0;
    for (n, seed) in [(5usize, 1u64), (5, 2), (5, 3), (50, 4), (200, 5)] {
        let model = Model::initialized(MlpSpec::new(vec![6, 24, 24, 1], Activation::Tanh, seed).unwrap()).unwrap();
        let xs = unit_inputs(n, 6, seed);
        let gram = ntk_gram(&model, &xs).unwrap();
        worst_sym = worst_sym.max((&gram.matrix - gram.matrix.transpose()).abs().max());
        psd &= gram.min_eigenvalue() >= -1e-8 * gram.trace() / n as f64;
        if n == 5 {
            let grads: Vec<Vec<f64>> = xs.iter().map(|x| model.per_example_gradient(x).unwrap()).collect();
            for i in 0..n {
                for j in 0..n {
                    let want: f64 = grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum();
                    worst_brute = worst_brute.max((gram.matrix[(i, j)] - want).abs() / want.abs().max(1.0));
                }
            }
        }
    }
    outcome(
        worst_grad <= 1e-4 && worst_sym == 0.0 && psd && worst_brute <= 1e-10,
        format!(
            "finite differences max rel. {worst_grad:.1e} over 30 cases; asymmetry {worst_sym:.1e}; PSD {psd}; brute Jacobian max dev. {worst_brute:.1e}"
        ),
    )
}

// --- 5 -------------------------------------------------------------------

fn cloud(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, 0);
    (0..n)
        .map(|_| (0..3).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect()
}

fn mmd_correctness() -> Outcome {
    let bank = MultiKernelSpec::scaled_bank(1.0, &DEFAULT_BANDWIDTH_MULTIPLIERS).unwrap();
    let x = cloud(100, 1);
    let self_mmd = mmd(&x, &x, &bank, Estimator::Biased).unwrap().value;

    let trials = 200;
    let vals: Vec<f64> = (0..trials)
        .map(|t| {
            mmd(
                &cloud(100, 1000 + 2 * t),
                &cloud(100, 1001 + 2 * t),
                &bank,
                Estimator::Unbiased,
            )
            .unwrap()
            .squared
        })
        .collect();
    let m = vals.iter().sum::<f64>() / trials as f64;
    let se = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (trials - 1) as f64 / trials as f64).sqrt();

    let a = vec![vec![0.0], vec![1.0]];
    let b = vec![vec![0.0], vec![2.0]];
    let hand = mmd(&a, &b, &MultiKernelSpec::single(1.0).unwrap(), Estimator::Biased)
        .unwrap()
        .squared;
    let hand_err = (hand - (1.0 - (-0.5f64).exp()) / 2.0).abs();
    outcome(
        self_mmd == 0.0 && m.abs() <= 3.0 * se && hand_err <= 1e-12,
        format!(
            "MMD(X,X) = {self_mmd}; unbiased mean {m:.2e} ± {se:.2e} (200 trials); 2+2 fixture error {hand_err:.1e}"
        ),
    )
}

// --- 6 -------------------------------------------------------------------

fn shapley_axioms() -> Outcome {
    let started = Instant::now();
    let mut cfg = schedule_fixture(6, 2, &[9, 9, 5, 3, 1], 100);
    cfg["feature_seed"] = json!(6);
    let (mut cs, test) = fixture(&cfg);
    // contributor 2 holds exactly contributor 1's data
    cs[1].real_samples = cs[0].real_samples.clone();
    cs[1].synth_samples = cs[0].synth_samples.clone();
    let model = Model::initialized(MlpSpec::new(vec![8, 16, 1], Activation::Tanh, 1).unwrap()).unwrap();
    let v = Valuator::new(&model, &test, ValuationConfig::new(6)).unwrap();
    // contributor 5's data never enters a coalition, making it a dummy
    let game = |members: &[usize]| {
        let kept: Vec<usize> = members.iter().copied().filter(|&i| i != 4).collect();
        v.coalition_value(&cs, &kept)
    };
    let r = shapley_exact(5, game).unwrap();
    let efficiency = (r.values.iter().sum::<f64>() - (r.grand_value - r.empty_value)).abs();
    let symmetry = (r.values[0] - r.values[1]).abs();
    let dummy = r.values[4].abs();
    let secs = started.elapsed().as_secs_f64();
    outcome(
        efficiency <= 1e-9 && symmetry <= 1e-9 && dummy <= 1e-9 && secs < 120.0,
        format!("efficiency gap {efficiency:.1e}; symmetry gap {symmetry:.1e}; dummy value {dummy:.1e}; {secs:.1}s"),
    )
}

// --- 7 -------------------------------------------------------------------

fn valuation_vs_ground_truth() -> Outcome {
    let started = Instant::now();
    let (cs, test) = fixture(&schedule_fixture(1, 50, &REAL_SHARES, 2000));
    let spec = MlpSpec::new(vec![8, 32, 1], Activation::Tanh, 11).unwrap();
    let model = Model::initialized(spec.clone()).unwrap();
    let valuator = Valuator::new(&model, &test, ValuationConfig::new(5)).unwrap();
    let raw = scores_of(&valuator, &cs);

    let terms: Vec<[f64; 4]> = raw.iter().map(ValuationScore::terms).collect();
    let fit = fit_weights(
        &terms,
        &loss_discrepancy_target(&raw),
        mixval::valuation::DEFAULT_FIT_RIDGE,
    )
    .unwrap();
    let fitted: Vec<ValuationScore> = raw.iter().map(|s| s.reweighted(&fit.weights)).collect();
    let loss_only: Vec<ValuationScore> = raw
        .iter()
        .map(|s| s.reweighted(&ValuationWeights::loss_only()))
        .collect();

    // a tighter tolerance than the default: the looser one stops some runs
    // on an early plateau and the ranking then reflects where they stalled
    let training = TrainingConfig {
        tol: 1e-8,
        max_epochs: 3000,
        ..TrainingConfig::default()
    };
    let truth = train_ground_truth(&cs, &spec, &training, &test).unwrap();
    let ours = abs_spearman(&column(&fitted, |s| s.total), &truth);
    let base = abs_spearman(&column(&loss_only, |s| s.total), &truth);
    let secs = started.elapsed().as_secs_f64();
    let w = fit.weights.as_array();
    outcome(
        ours >= 0.7 && ours > base && secs < 600.0,
        format!(
            "|Spearman| fitted {ours:.3} vs loss-only {base:.3}; weights ({:.3}, {:.3}, {:.3}, {:.3}); {secs:.1}s",
            w[0], w[1], w[2], w[3]
        ),
    )
}

// --- 8 -------------------------------------------------------------------

fn subsampling_stability() -> Outcome {
    let (cs, test) = fixture(&schedule_fixture(8, 300, &[9, 7, 5, 3, 1], 2000));
    let model = Model::initialized(MlpSpec::new(vec![8, 512, 1], Activation::Tanh, 11).unwrap()).unwrap();
    let at = |cap: usize| {
        let mut cfg = ValuationConfig::new(5);
        cfg.ntk_cap = cap;
        cfg.mmd_cap = Some(cap);
        scores_of(&Valuator::new(&model, &test, cfg).unwrap(), &cs)
    };
    let (small, large) = (at(100), at(4000));
    let rho = |f: fn(&ValuationScore) -> f64| {
        let a: Vec<f64> = small.iter().map(f).collect();
        let b: Vec<f64> = large.iter().map(f).collect();
        spearman(&a, &b).unwrap()
    };
    let mmd_rho = rho(|s| s.discrepancy_term);
    let ntk_rho = rho(|s| s.ntk_term);
    outcome(
        mmd_rho >= 0.9 && ntk_rho >= 0.9,
        format!("Spearman between caps 100 and 4000: MMD term {mmd_rho:.3}, NTK term {ntk_rho:.3}"),
    )
}

// --- 9 -------------------------------------------------------------------

fn efficiency() -> Outcome {
    let rows: Vec<usize> = (0..100).map(|j| REAL_SHARES[j % 10]).collect();
    let (cs, test) = fixture(&schedule_fixture(9, 10, &rows, 500));
    let spec = MlpSpec::new(vec![8, 32, 1], Activation::Tanh, 11).unwrap();
    let model = Model::initialized(spec.clone()).unwrap();
    let valuation = time_method(cs.len(), TimingOptions::default(), || {
        let v = Valuator::new(&model, &test, ValuationConfig::new(5)).unwrap();
        scores_of(&v, &cs)
    });
    // one cold pass: retraining a hundred models twice buys nothing
    let retrain = time_method(
        cs.len(),
        TimingOptions {
            warmup_runs: 0,
            timed_runs: 1,
        },
        || train_ground_truth(&cs, &spec, &TrainingConfig::default(), &test).unwrap(),
    );
    let speedup = retrain.total_seconds / valuation.total_seconds;
    outcome(
        speedup >= 10.0,
        format!(
            "valuation {:.2}s vs retraining {:.2}s for 100 contributors: {speedup:.0}×",
            valuation.total_seconds, retrain.total_seconds
        ),
    )
}

// --- 10 ------------------------------------------------------------------

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn reproducibility() -> Outcome {
    let dir = scratch();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_str().unwrap().to_string();
    let model = json!({"layer_widths": [8, 16, 1], "init_seed": 3});
    write_json(
        &d.join("sim.json"),
        &json!({"pis": [0.2], "n_min": 100, "n_max": 100000, "points_per_decade": 10}),
    );
    write_json(&d.join("gen.json"), &schedule_fixture(10, 3, &[9, 6, 3, 0], 60));
    write_json(&d.join("disc.json"), &json!({}));
    write_json(&d.join("gram.json"), &json!({"model": model}));
    write_json(
        &d.join("value.json"),
        &json!({"model": model, "valuation": {"seed": 4, "ntk_cap": 20, "mmd_cap": 20}, "fit": {}}),
    );
    write_json(
        &d.join("marginal.json"),
        &json!({"model": model, "valuation": {"seed": 4}}),
    );
    write_json(
        &d.join("gt.json"),
        &json!({"model": model, "training": {"max_epochs": 200}}),
    );
    run_cli(&["generate", "--config", &p("gen.json"), "--out", &p("data")]);
    let (contribs, test) = (p("data/contributors"), p("data/test.csv"));
    let x = p("data/contributors/S01.csv");

    let runs: Vec<(&str, Vec<String>)> = vec![
        ("simulate", vec!["--config".into(), p("sim.json")]),
        ("generate", vec!["--config".into(), p("gen.json")]),
        (
            "discrepancy",
            vec![
                "--config".into(),
                p("disc.json"),
                "--x".into(),
                x.clone(),
                "--y".into(),
                test.clone(),
            ],
        ),
        (
            "gram",
            vec!["--config".into(), p("gram.json"), "--samples".into(), x.clone()],
        ),
        (
            "groundtruth",
            vec![
                "--config".into(),
                p("gt.json"),
                "--contributors".into(),
                contribs.clone(),
                "--test".into(),
                test.clone(),
            ],
        ),
        (
            "value",
            vec![
                "--config".into(),
                p("value.json"),
                "--contributors".into(),
                contribs.clone(),
                "--test".into(),
                test.clone(),
            ],
        ),
        (
            "marginal",
            vec![
                "--config".into(),
                p("marginal.json"),
                "--contributors".into(),
                contribs.clone(),
                "--test".into(),
                test.clone(),
            ],
        ),
    ];
    let mut differing = Vec::new();
    let mut checked = 0;
    let mut outputs = BTreeMap::new();
    for (cmd, args) in &runs {
        let mut snaps = Vec::new();
        for rep in 0..2 {
            let out = p(&format!("{cmd}-{rep}"));
            let mut full = vec![*cmd];
            full.extend(args.iter().map(String::as_str));
            full.extend(["--out", out.as_str()]);
            run_cli(&full);
            snaps.push(snapshot(Path::new(&out)));
        }
        checked += snaps[0].len();
        if snaps[0] != snaps[1] || snaps[0].is_empty() {
            differing.push(*cmd);
        }
        outputs.insert(*cmd, p(&format!("{cmd}-0")));
    }
    for rep in 0..2 {
        let out = p(&format!("evaluate-{rep}"));
        run_cli(&[
            "evaluate",
            "--scores",
            &format!("{}/scores.csv", outputs["value"]),
            "--ground-truth",
            &format!("{}/groundtruth.csv", outputs["groundtruth"]),
            "--out",
            &out,
        ]);
    }
    let (e0, e1) = (snapshot(&d.join("evaluate-0")), snapshot(&d.join("evaluate-1")));
    checked += e0.len();
    if e0 != e1 {
        differing.push("evaluate");
    }
    outcome(
        differing.is_empty(),
        format!(
            "{checked} output files across {} subcommands (bench excluded: it records wall-clock time); differing: {differing:?}",
            runs.len() + 1
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "three-phase reproduction", three_phases),
        (2, "phase-exponent agreement", phase_exponents),
        (3, "special function", special_function),
        (4, "NTK correctness", ntk_correctness),
        (5, "MMD correctness", mmd_correctness),
        (6, "Shapley properties", shapley_axioms),
        (7, "valuation vs ground truth", valuation_vs_ground_truth),
        (8, "subsampling stability", subsampling_stability),
        (9, "efficiency", efficiency),
        (10, "reproducibility", reproducibility),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {tag} [{:.1}s] {name}: {}",
            started.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
