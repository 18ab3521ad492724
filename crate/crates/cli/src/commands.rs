use std::path::Path;

use serde::Serialize;

use mixval::config::{
    self, BenchConfig, DiscrepancyConfig, GenerateConfig, GramConfig, GroundTruthConfig, MarginalConfig,
    SimulateConfig, ValueConfig,
};
use mixval::evalharness::{self, MethodEvaluation, RuntimeReport};
use mixval::io;
use mixval::longtail::{make_contributors, make_test_set, Contributor, Sample};
use mixval::mmd::{self, DiscrepancyEstimate, MultiKernelSpec};
use mixval::ntk::{self, Model};
use mixval::numeric::log_grid;
use mixval::scaling::{self, BreakpointReport, PlateauReport};
use mixval::valuation::{self, CoalitionWeighting, KernelBank, ValuationScore, ValuationWeights, Valuator, WeightFit};
use mixval::{Error, Result};

use crate::output::Run;
use crate::{Command, ScoreColumn, WeightingKind};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common } => simulate(&common.config, &common.out),
        Command::Generate { common } => generate(&common.config, &common.out),
        Command::Discrepancy { common, x, y } => discrepancy(&common.config, &x, &y, &common.out),
        Command::Gram { common, samples } => gram(&common.config, &samples, &common.out),
        Command::Value {
            common,
            data,
            ground_truth,
        } => value(
            &common.config,
            &data.contributors,
            &data.test,
            ground_truth.as_deref(),
            &common.out,
        ),
        Command::Marginal {
            common,
            data,
            weighting,
            permutations,
        } => marginal(
            &common.config,
            &data.contributors,
            &data.test,
            weighting,
            permutations,
            &common.out,
        ),
        Command::Groundtruth { common, data } => {
            groundtruth(&common.config, &data.contributors, &data.test, &common.out)
        }
        Command::Evaluate {
            scores,
            ground_truth,
            column,
            out,
        } => evaluate(&scores, &ground_truth, column, &out),
        Command::Bench { common, data } => bench(&common.config, &data.contributors, &data.test, &common.out),
    }
}

fn read_config<T: serde::de::DeserializeOwned + config::Validate>(run: &mut Run, path: &Path) -> Result<T> {
    let bytes = run.read(path)?;
    config::parse(&bytes).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn read_contributors(run: &mut Run, dir: &Path) -> Result<Vec<Contributor>> {
    let files = io::contributor_files(dir)?
        .iter()
        .map(|p| Ok((io::contributor_id(p)?, run.read(p)?)))
        .collect::<Result<Vec<_>>>()?;
    io::parse_contributors(&files)
}

fn read_samples(run: &mut Run, path: &Path) -> Result<Vec<Sample>> {
    let bytes = run.read(path)?;
    io::parse_sample_set(&bytes).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct CurveSummary {
    pi: f64,
    breakpoints: BreakpointReport,
    plateau: Option<PlateauReport>,
    plateau_holds: Option<bool>,
    monotone_non_increasing: bool,
}

fn simulate(config: &Path, out: &Path) -> Result<()> {
    let mut run = Run::new("simulate");
    let cfg: SimulateConfig = read_config(&mut run, config)?;
    let grid = log_grid(cfg.n_min, cfg.n_max, cfg.points_per_decade);
    let mut curves = Vec::new();
    let mut summaries = Vec::new();
    for &pi in &cfg.pis {
        let curve = scaling::sweep(&cfg.params(pi), &grid)?;
        let breakpoints = scaling::detect_breakpoints(&curve, &cfg.breakpoints)?;
        let plateau = curve.plateau_report().ok();
        summaries.push(CurveSummary {
            pi,
            breakpoints,
            plateau,
            plateau_holds: plateau.map(|p| p.holds()),
            monotone_non_increasing: curve.errors.windows(2).all(|w| w[1] <= w[0]),
        });
        curves.push(curve);
    }
    let mut buf = Vec::new();
    for (i, curve) in curves.iter().enumerate() {
        let mut part = Vec::new();
        io::write_curve(&mut part, curve, &cfg.phase_constants)?;
        // keep a single header
        let skip = if i == 0 {
            0
        } else {
            part.iter().position(|&b| b == b'\n').map_or(0, |p| p + 1)
        };
        buf.extend_from_slice(&part[skip..]);
    }
    run.stage("curves.csv", buf);
    run.stage_json("simulate.json", &summaries);
    run.commit(out)
}

fn generate(config: &Path, out: &Path) -> Result<()> {
    let mut run = Run::new("generate");
    let cfg: GenerateConfig = read_config(&mut run, config)?;
    run.seed = Some(cfg.seed);
    let mix = cfg.mixture()?;
    let space = cfg.feature_space()?;
    let contributors = make_contributors(&cfg.plan_pairs(), &mix, &space, &cfg.shift, cfg.seed)?;
    let test = make_test_set(&mix.real_dist, cfg.test_size, &space, cfg.seed)?;
    for c in &contributors {
        let bytes = csv_bytes(|b| io::write_contributor(b, c))?;
        run.stage(Path::new("contributors").join(format!("{}.csv", c.id)), bytes);
    }
    let rows: Vec<(&Sample, bool)> = test.iter().map(|s| (s, true)).collect();
    let bytes = csv_bytes(|b| io::write_samples(b, &rows))?;
    run.stage("test.csv", bytes);
    run.commit(out)
}

#[derive(Serialize)]
struct DiscrepancyReport {
    #[serde(flatten)]
    estimate: DiscrepancyEstimate,
    kernel_bank: MultiKernelSpec,
    x_count: usize,
    y_count: usize,
}

fn discrepancy(config: &Path, x: &Path, y: &Path, out: &Path) -> Result<()> {
    let mut run = Run::new("discrepancy");
    let cfg: DiscrepancyConfig = read_config(&mut run, config)?;
    let xs: Vec<Vec<f64>> = read_samples(&mut run, x)?.into_iter().map(|s| s.features).collect();
    let ys: Vec<Vec<f64>> = read_samples(&mut run, y)?.into_iter().map(|s| s.features).collect();
    let bank = match &cfg.kernel_bank {
        KernelBank::Fixed(spec) => spec.clone(),
        KernelBank::Median { multipliers } => {
            MultiKernelSpec::scaled_bank(mmd::median_heuristic(&xs, &ys)?, multipliers)?
        }
    };
    let estimate = mmd::mmd(&xs, &ys, &bank, cfg.estimator)?;
    run.stage_json(
        "discrepancy.json",
        &DiscrepancyReport {
            estimate,
            kernel_bank: bank,
            x_count: xs.len(),
            y_count: ys.len(),
        },
    );
    run.commit(out)
}

#[derive(Serialize)]
struct GramReport {
    n: usize,
    trace: f64,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    gradient_norm_bound: f64,
    ridge: f64,
    bound_term: f64,
}

fn gram(config: &Path, samples: &Path, out: &Path) -> Result<()> {
    let mut run = Run::new("gram");
    let cfg: GramConfig = read_config(&mut run, config)?;
    run.seed = Some(cfg.model.init_seed);
    let data = read_samples(&mut run, samples)?;
    let model = Model::initialized(cfg.model.clone())?;
    let xs: Vec<&[f64]> = data.iter().map(|s| s.features.as_slice()).collect();
    let g = ntk::ntk_gram(&model, &xs)?;
    let residuals = data
        .iter()
        .map(|s| Ok(s.label - model.forward(&s.features)?))
        .collect::<Result<Vec<_>>>()?;
    let ridge = cfg.ridge.unwrap_or_else(|| g.default_ridge());
    let bound_term = ntk::bound_term(&g, &residuals, ridge)?;
    let mut matrix = String::new();
    for i in 0..g.dim() {
        let row: Vec<String> = (0..g.dim()).map(|j| format!("{:?}", g.matrix[(i, j)])).collect();
        matrix.push_str(&row.join(","));
        matrix.push('\n');
    }
    run.stage("gram.csv", matrix.into_bytes());
    run.stage_json(
        "gram.json",
        &GramReport {
            n: g.dim(),
            trace: g.trace(),
            min_eigenvalue: g.min_eigenvalue(),
            max_eigenvalue: g.max_eigenvalue(),
            gradient_norm_bound: g.gradient_norm_bound,
            ridge,
            bound_term,
        },
    );
    run.commit(out)
}

#[derive(Serialize)]
struct Failure {
    contributor_id: String,
    error: String,
}

#[derive(Serialize)]
struct ValueReport {
    configured_weights: ValuationWeights,
    weights: ValuationWeights,
    fit: Option<WeightFit>,
    fit_target: Option<&'static str>,
    kernel_bank: MultiKernelSpec,
    scored: usize,
    failures: Vec<Failure>,
}

fn value(config: &Path, contributors: &Path, test: &Path, ground_truth: Option<&Path>, out: &Path) -> Result<()> {
    let mut run = Run::new("value");
    let cfg: ValueConfig = read_config(&mut run, config)?;
    run.seed = Some(cfg.valuation.seed);
    let contributors = read_contributors(&mut run, contributors)?;
    let test = read_samples(&mut run, test)?;
    let truth = ground_truth
        .map(|p| run.read(p).and_then(|b| io::parse_ground_truth(&b)))
        .transpose()?;
    let model = Model::initialized(cfg.model.clone())?;
    let valuator = Valuator::new(&model, &test, cfg.valuation.clone())?;
    let mut scores = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (c, r) in contributors.iter().zip(valuator.score_all(&contributors)) {
        match r {
            Ok(s) => scores.push(s),
            Err(e) => {
                eprintln!("warning: {e}");
                failures.push(Failure {
                    contributor_id: c.id.clone(),
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    let mut weights = cfg.valuation.weights;
    let mut fit = None;
    let mut fit_target = None;
    if let Some(f) = cfg.fit {
        let terms: Vec<[f64; 4]> = scores.iter().map(ValuationScore::terms).collect();
        let (targets, label) = match &truth {
            Some(gt) => (supervised_targets(&scores, gt)?, "ground_truth"),
            None => (valuation::loss_discrepancy_target(&scores), "mean_loss_discrepancy"),
        };
        let result = valuation::fit_weights(&terms, &targets, f.ridge)?;
        if result.rank_deficient {
            eprintln!("warning: term matrix is rank deficient; the ridge keeps the fit bounded");
        }
        weights = result.weights;
        scores = scores.iter().map(|s| s.reweighted(&weights)).collect();
        fit = Some(result);
        fit_target = Some(label);
    }
    run.stage("scores.csv", csv_bytes(|b| io::write_scores(b, &scores))?);
    run.stage_json(
        "value.json",
        &ValueReport {
            configured_weights: cfg.valuation.weights,
            weights,
            fit,
            fit_target,
            kernel_bank: valuator.kernel_bank().clone(),
            scored: scores.len(),
            failures,
        },
    );
    run.commit(out)?;
    first_error.map_or(Ok(()), Err)
}

fn supervised_targets(scores: &[ValuationScore], gt: &[evalharness::GroundTruth]) -> Result<Vec<f64>> {
    scores
        .iter()
        .map(|s| {
            gt.iter()
                .find(|g| g.contributor_id == s.contributor_id && !g.diverged)
                .map(|g| g.test_metric)
                .ok_or_else(|| Error::Domain(format!("no usable ground truth for `{}`", s.contributor_id)))
        })
        .collect()
}

#[derive(Serialize)]
struct MarginalSummary {
    weighting: CoalitionWeighting,
    grand_value: f64,
    empty_value: f64,
    kernel_bank: MultiKernelSpec,
}

fn marginal(
    config: &Path,
    contributors: &Path,
    test: &Path,
    weighting: Option<WeightingKind>,
    permutations: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut run = Run::new("marginal");
    let cfg: MarginalConfig = read_config(&mut run, config)?;
    run.seed = Some(cfg.valuation.seed);
    let contributors = read_contributors(&mut run, contributors)?;
    let test = read_samples(&mut run, test)?;
    let mut kind = cfg.weighting;
    match weighting {
        Some(WeightingKind::Loo) => kind = CoalitionWeighting::Loo,
        Some(WeightingKind::Shapley) => kind = CoalitionWeighting::Shapley { permutations },
        None => {
            if let (CoalitionWeighting::Shapley { .. }, Some(_)) = (kind, permutations) {
                kind = CoalitionWeighting::Shapley { permutations };
            }
        }
    }
    if permutations == Some(0) {
        return Err(Error::Domain("--permutations must be ≥ 1".into()));
    }
    let model = Model::initialized(cfg.model.clone())?;
    let valuator = Valuator::new(&model, &test, cfg.valuation.clone())?;
    let report = valuation::marginal_values(&contributors, kind, &valuator)?;
    let mut csv = String::from("contributor_id,value,std_error\n");
    for (i, c) in contributors.iter().enumerate() {
        let se = report
            .std_errors
            .as_ref()
            .map(|s| format!("{:?}", s[i]))
            .unwrap_or_default();
        csv.push_str(&format!("{},{:?},{se}\n", c.id, report.values[i]));
    }
    run.stage("marginal.csv", csv.into_bytes());
    run.stage_json(
        "marginal.json",
        &MarginalSummary {
            weighting: kind,
            grand_value: report.grand_value,
            empty_value: report.empty_value,
            kernel_bank: valuator.kernel_bank().clone(),
        },
    );
    run.commit(out)
}

fn groundtruth(config: &Path, contributors: &Path, test: &Path, out: &Path) -> Result<()> {
    let mut run = Run::new("groundtruth");
    let cfg: GroundTruthConfig = read_config(&mut run, config)?;
    run.seed = Some(cfg.model.init_seed);
    let contributors = read_contributors(&mut run, contributors)?;
    let test = read_samples(&mut run, test)?;
    let rows = evalharness::train_ground_truth(&contributors, &cfg.model, &cfg.training, &test)?;
    for r in rows.iter().filter(|r| r.diverged) {
        eprintln!(
            "warning: training diverged for `{}`; it will be excluded from correlations",
            r.contributor_id
        );
    }
    run.stage("groundtruth.csv", csv_bytes(|b| io::write_ground_truth(b, &rows))?);
    run.commit(out)
}

fn evaluate(scores: &Path, ground_truth: &Path, column: ScoreColumn, out: &Path) -> Result<()> {
    let mut run = Run::new("evaluate");
    let scores = io::parse_scores(&run.read(scores)?)?;
    let truth = io::parse_ground_truth(&run.read(ground_truth)?)?;
    let pairs: Vec<(String, f64)> = scores
        .iter()
        .map(|s| {
            let v = match column {
                ScoreColumn::Total => s.total,
                ScoreColumn::LossTerm => s.loss_term,
                ScoreColumn::DiscrepancyTerm => s.discrepancy_term,
                ScoreColumn::NtkTerm => s.ntk_term,
                ScoreColumn::CompositionTerm => s.composition_term,
            };
            (s.contributor_id.clone(), v)
        })
        .collect();
    let report: MethodEvaluation = evalharness::evaluate_method(&pairs, &truth)?;
    for id in &report.excluded {
        eprintln!("warning: `{id}` excluded (training diverged)");
    }
    run.stage_json("evaluation.json", &report);
    run.commit(out)
}

#[derive(Serialize)]
struct BenchReport {
    contributors: usize,
    valuation: RuntimeReport,
    retraining: RuntimeReport,
    speedup: f64,
}

fn bench(config: &Path, contributors: &Path, test: &Path, out: &Path) -> Result<()> {
    let mut run = Run::new("bench");
    let cfg: BenchConfig = read_config(&mut run, config)?;
    run.seed = Some(cfg.valuation.seed);
    let contributors = read_contributors(&mut run, contributors)?;
    let test = read_samples(&mut run, test)?;
    let model = Model::initialized(cfg.model.clone())?;
    let k = contributors.len();
    let valuation = evalharness::time_method(k, cfg.timing, || {
        Valuator::new(&model, &test, cfg.valuation.clone()).map(|v| v.score_all(&contributors))
    });
    let retraining = evalharness::time_method(k, cfg.timing, || {
        evalharness::train_ground_truth(&contributors, &cfg.model, &cfg.training, &test)
    });
    run.stage_json(
        "bench.json",
        &BenchReport {
            contributors: k,
            speedup: retraining.total_seconds / valuation.total_seconds,
            valuation,
            retraining,
        },
    );
    run.commit(out)
}
