//! Released income averages: how much the attacker learns about one
//! individual, with and without the Gaussian mechanism.

use gaussi::casestudy::{run_case, CaseStudyConfig, Dataset, DEFAULT_EPSILON};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Dataset::bundled();
    println!("{:<10} {:>14} {:>12} {:>14} {:>12}", "scenario", "post. mean", "post. var", "KL (mixed)", "MI (bits)");
    for epsilon in [None, Some(DEFAULT_EPSILON)] {
        for case in 1..=3 {
            let out = run_case(&data, &CaseStudyConfig { case, epsilon, victim: 0 })?;
            let mi = out
                .leakage
                .mutual_information
                .map_or_else(|| "-".to_owned(), |v| format!("{v:.4e}"));
            println!(
                "{:<10} {:>14.4} {:>12.4} {:>14.6e} {:>12}",
                out.leakage.label,
                out.posterior_mean(),
                out.posterior_variance(),
                out.leakage.kl_prior_posterior,
                mi
            );
        }
    }
    Ok(())
}
