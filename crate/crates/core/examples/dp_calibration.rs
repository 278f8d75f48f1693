//! Gaussian-mechanism noise for an average over ten incomes across a range
//! of privacy budgets.

use gaussi::metrics::{gaussian_mechanism_variance, DpParameters};

fn main() -> Result<(), gaussi::metrics::MetricError> {
    let (n, max, min) = (10.0, 520_000.0, 410_000.0);
    let sensitivity = (max - min) / n;
    let delta = 1.0 / (n * n);
    println!("sensitivity {sensitivity}, delta {delta}");
    for epsilon in [0.1, 0.5, 0.9, 1.0, 2.0] {
        let params = DpParameters::new(epsilon, delta, sensitivity)?;
        let var = gaussian_mechanism_variance(&params)?;
        println!("epsilon {epsilon:>4}: variance {var:>16.2}, sd {:>10.2}", var.sqrt());
    }
    Ok(())
}
