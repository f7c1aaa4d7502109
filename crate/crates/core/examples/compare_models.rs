//! Scores Cox and Aalen rate models against the Nelson-Aalen reference on
//! one simulated train/test split without a terminal event.

use recurrent_score::censoring::fit_censoring;
use recurrent_score::estimators::ModelSpec;
use recurrent_score::scoring::{mse_from_counts, score_from_curves, weighted_counts};
use recurrent_score::simulation::{simulate_rc_scenario, RcScenarioParams};

fn main() -> recurrent_score::Result<()> {
    let p = RcScenarioParams::default();
    let train = simulate_rc_scenario(200, &p, 1)?;
    let test = simulate_rc_scenario(1000, &p, 2)?;
    let g = fit_censoring(&train.union(&test)?)?;
    let times = [1.0, 2.0, 2.9];
    let wc = weighted_counts(&test, &g, &times)?;
    let reference = mse_from_counts(&test, &wc, ModelSpec::reference().fit(&train, &g)?.as_ref())?;
    println!("reference MSE at {times:?}: {:.2?}", reference.mse);
    for spec in ["cox:x1", "cox:x1+x2", "aalen:x1", "aalen:x1+x2"] {
        let m = spec.parse::<ModelSpec>()?.fit(&train, &g)?;
        let curve = score_from_curves(&mse_from_counts(&test, &wc, m.as_ref())?, &reference)?;
        println!("{spec:<12} score {:.2?}", curve.score.unwrap_or_default());
    }
    Ok(())
}
