//! Terminal-event scoring: plug-in predictions that combine a rate model
//! with a survival model, and models that wrongly treat death as censoring.

use recurrent_score::censoring::fit_censoring;
use recurrent_score::estimators::ModelSpec;
use recurrent_score::scoring::prediction_score;
use recurrent_score::simulation::{simulate_terminal_scenario, TerminalScenarioParams};

fn main() -> recurrent_score::Result<()> {
    let p = TerminalScenarioParams::default();
    let train = simulate_terminal_scenario(400, &p, 3)?;
    let test = simulate_terminal_scenario(1000, &p, 4)?;
    let g = fit_censoring(&train.union(&test)?)?;
    let reference = ModelSpec::reference().fit(&train, &g)?;
    let times = [1.0, 2.0, 2.5];
    for spec in ["cox:x1/cox:x1", "cox:x1+x2/cox:x1", "cox:x1+x2/cox:x1+x2", "cox:x1+x2/ignore", "nelson_aalen/ignore"] {
        let m = spec.parse::<ModelSpec>()?.fit(&train, &g)?;
        let c = prediction_score(&test, &g, m.as_ref(), reference.as_ref(), &times)?;
        println!("{spec:<22} score at {times:?}: {:.2?}", c.score.unwrap_or_default());
    }

    let x = [1.0, 0.0];
    let m = "cox:x1+x2/cox:x1+x2".parse::<ModelSpec>()?.fit(&train, &g)?;
    println!("predicted mean count for x = {x:?}: {:.3?}", m.predict_curve(&x, &times)?);
    Ok(())
}
