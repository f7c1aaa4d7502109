//! Simulates the two recurrent-event designs and prints summary counts.

use recurrent_score::simulation::{simulate_rc_scenario, simulate_terminal_scenario, RcScenarioParams, TerminalScenarioParams};

fn main() -> recurrent_score::Result<()> {
    let n = 5000;
    let rc = simulate_rc_scenario(n, &RcScenarioParams::default(), 1)?;
    let at_most_one = rc.subjects.iter().filter(|s| s.event_times.len() <= 1).count();
    println!("right-censoring only, n = {n}");
    println!("  events per subject  {:.2}", rc.total_events() as f64 / n as f64);
    println!("  P(at most 1 event)  {:.3}", at_most_one as f64 / n as f64);

    let term = simulate_terminal_scenario(n, &TerminalScenarioParams::default(), 1)?;
    let censored = term.subjects.iter().filter(|s| !s.is_terminal()).count();
    println!("with a terminal event, n = {n}");
    println!("  events per subject  {:.2}", term.total_events() as f64 / n as f64);
    println!("  censored fraction   {:.3}", censored as f64 / n as f64);

    let s = &term.subjects[0];
    println!("first subject: x = {:?}, {} events, follow-up ends at {:.3} ({:?})", s.covariates, s.event_times.len(), s.follow_up_end, s.end_reason);
    Ok(())
}
