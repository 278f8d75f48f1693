//! Compares the engine with the noise-basis reference on random programs
//! and with rejection sampling on one of them.

use gaussi::run_program;
use gaussi_oracle::{abc_posterior, program_moments, random_program, random_source, relative_deviation, Bandwidth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let program = random_program(seed, 12, 3);
        let engine = run_program(&program)?;
        let (_, mean, cov) = program_moments(&program)?;
        let engine_cov: Vec<f64> = engine.cov.iter().copied().collect();
        let oracle_cov: Vec<f64> = cov.concat();
        let dev = relative_deviation(engine.mean.as_slice(), &mean).max(relative_deviation(&engine_cov, &oracle_cov));
        worst = worst.max(dev);
    }
    println!("max relative deviation over 200 programs: {worst:.3e}");

    let seed = 7;
    println!("\n{}", random_source(seed, 6, 1));
    let program = random_program(seed, 6, 1);
    let exact = run_program(&program)?;
    let abc = abc_posterior(&program, 400_000, Bandwidth::default(), 1)?;
    println!("accepted {} of {}", abc.accepted, abc.samples);
    for (i, name) in exact.names.iter().enumerate() {
        println!(
            "{name:<8} exact mean {:>10.4}  abc {:>10.4} (se {:.4})   exact var {:>9.4}  abc {:>9.4}",
            exact.mean[i],
            abc.mean[i],
            abc.mean_standard_error(i),
            exact.cov[(i, i)],
            abc.cov[i][i]
        );
    }
    Ok(())
}
