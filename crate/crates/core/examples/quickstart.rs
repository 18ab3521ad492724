use mixval::longtail::{make_contributors, make_test_set, FeatureSpace, MixtureSpec, SyntheticShift};
use mixval::ntk::{Activation, MlpSpec, Model};
use mixval::scaling::{detect_breakpoints, sweep, BreakpointOptions, ScalingParams};
use mixval::valuation::{ValuationConfig, Valuator};

fn main() -> mixval::Result<()> {
    // exact error curve and its breakpoints
    let params = ScalingParams {
        a: 1.0,
        alpha: 0.5,
        b: 1.0,
        lambda: 1.0,
        beta: 1.5,
        k: 100,
        pi: 0.1,
        support_max: 10_000,
    };
    let grid: Vec<u64> = (0..=80)
        .map(|j| (100.0 * 10f64.powf(j as f64 / 20.0)).round() as u64)
        .collect();
    let curve = sweep(&params, &grid)?;
    let report = detect_breakpoints(&curve, &BreakpointOptions::default())?;
    println!("breakpoints {:?} / {:?}", report.detected_first, report.detected_second);

    // score three contributors against a clean test set
    let mix = MixtureSpec::new(1.0, 1.5, 100, 10_000)?;
    let space = FeatureSpace::new(8, 0.1, 7)?;
    let plan = [(900, 500), (500, 900), (100, 1300)];
    let contributors = make_contributors(&plan, &mix, &space, &SyntheticShift::default(), 1)?;
    let test = make_test_set(&mix.real_dist, 1000, &space, 2)?;
    let model = Model::initialized(MlpSpec::new(vec![8, 32, 1], Activation::Tanh, 3)?)?;
    let valuator = Valuator::new(&model, &test, ValuationConfig::new(4))?;
    for c in &contributors {
        let s = valuator.score(c)?;
        println!(
            "{}: total {:.4} (loss {:.4}, mmd {:.4}, ntk {:.4})",
            c.id, s.total, s.loss_term, s.discrepancy_term, s.ntk_term
        );
    }
    Ok(())
}
