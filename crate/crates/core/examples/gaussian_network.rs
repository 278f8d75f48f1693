//! Builds a three-node Gaussian Bayesian network directly on the state API,
//! then observes the last node.

use gaussi::GaussianState;

fn print_state(title: &str, s: &GaussianState) {
    println!("{title}");
    let cov = s.covariance_matrix();
    for (i, name) in s.names().iter().enumerate() {
        let row: Vec<String> = (0..s.len()).map(|j| format!("{:>8.4}", cov[(i, j)])).collect();
        println!("  {name:<3} mean {:>8.4}  cov {}", s.mean_vector()[i], row.join(" "));
    }
}

fn main() -> Result<(), gaussi::GaussianError> {
    let joint = GaussianState::new()
        .extend_independent("X1", 50.0, 2.0)?
        .extend_linear("X2", 2.0, "X1", -5.0, 1.0)?
        .extend_linear("X3", 1.0, "X2", -10.0, 4.0)?;
    print_state("joint", &joint);
    println!("X1 and X3 independent: {}", joint.is_independent("X1", "X3")?);

    let posterior = joint.condition("X3", 85.0)?;
    print_state("after X3 = 85", &posterior);
    Ok(())
}
