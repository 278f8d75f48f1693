//! Runs a program with an observation and queries the posterior.

use gaussi::interp::execute;
use gaussi::metrics::interval_probability;
use gaussi::parse;

const SOURCE: &str = "\
ages = [Normal(40, 25), Normal(50, 25), Normal(30, 100)]
total[0] = ages[0] + 0
for i in range(2):
    total[i + 1] = total[i] + ages[i + 1]
avg = total[2] / 3
condition(avg, 44)
return ages[0], ages[2]
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = parse(SOURCE)?;
    let run = execute(&program)?;
    let state = &run.state.gaussian;
    for name in ["ages_0", "ages_2"] {
        println!(
            "{name}: mean {:.4}, variance {:.4}, P(35 <= {name} <= 45) = {:.4}",
            state.mean_of(name)?,
            state.variance_of(name)?,
            interval_probability(state, name, 35.0, 45.0)?
        );
    }
    println!("covariance(ages_0, ages_2) = {:.4}", state.covariance_of("ages_0", "ages_2")?);
    println!("{} statements in {:?}", run.statement_count, run.elapsed);
    Ok(())
}
