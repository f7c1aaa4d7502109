//! Ground truth for the simulation design: the true mean count, the
//! closed-form inseparability term and its Monte-Carlo counterpart.

use recurrent_score::oracle::{inseparability_a, inseparability_a_mc, true_mu_star, CovariateMoments, ScenarioParams};
use recurrent_score::simulation::{RcScenarioParams, TerminalScenarioParams};

fn main() -> recurrent_score::Result<()> {
    let rc = RcScenarioParams::default();
    let term = TerminalScenarioParams::default();
    let x = [1.0, 0.5];
    for t in [1.0, 2.0, 2.5] {
        println!(
            "t = {t}: mu*(t|x) = {:.3} without and {:.3} with a terminal event",
            true_mu_star(t, &x, &ScenarioParams::Rc(rc.clone())),
            true_mu_star(t, &x, &ScenarioParams::Terminal(term.clone()))
        );
    }
    let moments = CovariateMoments::exact(&rc.covariates, &rc.theta);
    for t in [1.0, 2.0, 2.5] {
        let a = inseparability_a(t, &rc, &moments)?;
        let mc = inseparability_a_mc(t, &rc, 200_000, 9)?;
        println!("A({t}) = {:.3} (A1 {:.3}, A2 {:.3}, A3 {:.3}); Monte Carlo {:.3} ± {:.3}", a.value(), a.a1, a.a2, a.a3, mc.mean, mc.se);
    }
    Ok(())
}
