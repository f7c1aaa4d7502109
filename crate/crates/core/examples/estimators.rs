//! Low-level fits on counting-process rows: Cox partial likelihood with
//! Breslow baseline, Aalen additive model and the Nelson-Aalen estimator.

use recurrent_score::estimators::{fit_aalen, fit_cox, nelson_aalen_rows, CoxOptions, EventTarget};
use recurrent_score::simulation::{simulate_rc_scenario, RcScenarioParams};
use recurrent_score::types::expand_counting_rows;

fn main() -> recurrent_score::Result<()> {
    let d = simulate_rc_scenario(300, &RcScenarioParams::default(), 12)?;
    let rows = expand_counting_rows(&d, false)?;
    println!("{} subjects expanded to {} rows", d.len(), rows.len());

    let cox = fit_cox(&rows, EventTarget::Recurrent, &CoxOptions::default())?;
    println!("Cox beta {:.3?} (true {:.3?}) after {} iterations", cox.beta, [2f64.ln(), 0.5f64.ln()], cox.iterations);
    println!("log partial likelihood {:.2} vs {:.2} at beta = 0", cox.loglik, cox.loglik_null);

    let null = CoxOptions {
        fixed: vec![(0, 0.0), (1, 0.0)],
        ..CoxOptions::default()
    };
    let at_zero = fit_cox(&rows, EventTarget::Recurrent, &null)?;
    let na = nelson_aalen_rows(&rows, EventTarget::Recurrent);
    println!("baseline at beta = 0 equals Nelson-Aalen: {}", at_zero.baseline == na);

    let aalen = fit_aalen(&rows, EventTarget::Recurrent)?;
    let t = 2.0;
    let coefs: Vec<f64> = aalen.cum_coeffs.iter().map(|c| c.eval(t)).collect();
    println!("Aalen cumulative coefficients at t = {t}: {coefs:.3?}");
    Ok(())
}
