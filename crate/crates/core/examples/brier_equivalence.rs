//! With one event per subject the recurrent-event criterion applied to
//! 1 - S(t|x) and the IPCW Brier score differ by a model-free offset, so
//! both rank survival models the same way.

use recurrent_score::censoring::fit_censoring;
use recurrent_score::estimators::{FailureProbability, SurvivalSpec};
use recurrent_score::scoring::{brier_score, mse_criterion};
use recurrent_score::simulation::{simulate_single_event, SingleEventParams};

fn main() -> recurrent_score::Result<()> {
    let p = SingleEventParams::default();
    let train = simulate_single_event(2000, &p, 5)?;
    let test = simulate_single_event(5000, &p, 6)?;
    let g = fit_censoring(&train.union(&test)?)?;
    let times = [1.0, 2.0];
    let counts = test.terminal_as_single_event();

    let mut rows = Vec::new();
    for spec in [SurvivalSpec::KaplanMeier, "cox:x1".parse()?, "cox:x1+x2".parse()?] {
        let s = spec.fit(&train)?;
        let brier = brier_score(&test, &g, &s, &times)?;
        let mse = mse_criterion(&counts, &g, &FailureProbability { survival: s.clone() }, &times)?;
        println!("{:<10} MSE' {:.4?}  Brier {:.4?}", s.label, mse.mse, brier.mse);
        rows.push((mse.mse, brier.mse));
    }
    for (k, t) in times.iter().enumerate() {
        let gap: Vec<f64> = rows.iter().map(|(m, b)| m[k] - b[k]).collect();
        println!("t = {t}: MSE' - Brier per model {gap:.4?}");
    }
    Ok(())
}
