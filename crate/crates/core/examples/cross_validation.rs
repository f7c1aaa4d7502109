//! Ten-fold cross-validated scores with 80% intervals, including the
//! multi-state Cox model with a prior-event-count covariate.

use recurrent_score::censoring::fit_censoring;
use recurrent_score::estimators::ModelSpec;
use recurrent_score::scoring::kfold_evaluate_many;
use recurrent_score::simulation::{simulate_terminal_scenario, TerminalScenarioParams};

fn main() -> recurrent_score::Result<()> {
    let d = simulate_terminal_scenario(600, &TerminalScenarioParams::default(), 8)?;
    let models: Vec<ModelSpec> = ["cox:x1/cox:x1", "cox:x1+x2/cox:x1", "aalen:x1+x2/cox:x1", "cox_msm:x2@x1/cox:x1"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let upper = fit_censoring(&d)?;
    let times = [1.0, 1.5, 2.0];
    println!("censoring support ends at {:.3}", recurrent_score::censoring::CensoringDistribution::support_end(&upper));
    for s in kfold_evaluate_many(&d, 10, &models, &ModelSpec::reference(), &times, 42)? {
        print!("{:<22}", s.model_label);
        for i in 0..s.times.len() {
            print!("  t={}: {:.2} [{:.2}, {:.2}]", s.times[i], s.mean_score[i], s.interval_low[i], s.interval_high[i]);
        }
        println!();
    }
    Ok(())
}
