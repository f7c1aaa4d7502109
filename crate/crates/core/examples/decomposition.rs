//! Splits the criterion of the covariate-free reference into the
//! imprecision term and the closed-form inseparability term A(t).

use recurrent_score::experiments::decomposition;
use recurrent_score::simulation::RcScenarioParams;

fn main() -> recurrent_score::Result<()> {
    let times = [0.5, 1.0, 1.5, 2.0, 2.5];
    let d = decomposition(&RcScenarioParams::default(), 200, 1000, &times, 11, 200_000)?;
    println!("{:>5} {:>10} {:>12} {:>10} {:>8}", "t", "MSE", "imprecision", "A(t)", "A/MSE");
    for i in 0..d.times.len() {
        println!(
            "{:>5} {:>10.3} {:>12.3} {:>10.3} {:>8.3}",
            d.times[i],
            d.mse[i],
            d.imprecision[i],
            d.inseparability[i],
            d.inseparability[i] / d.mse[i]
        );
    }
    Ok(())
}
