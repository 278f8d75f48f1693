//! Times the sum benchmark at a few sizes and fits the cost exponent.

use gaussi::bench::{fit_exponent, rows_to_csv, run_bench, BenchKind};

fn main() -> Result<(), gaussi::RuntimeError> {
    let sizes = [100, 300, 1000, 3000];
    for kind in [BenchKind::Sum, BenchKind::SumCond] {
        let rows = run_bench(kind, &sizes, 3, false)?;
        print!("{}", rows_to_csv(&rows));
        let points: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.mean_seconds)).collect();
        if let Some(k) = fit_exponent(&points) {
            println!("{kind}: time grows like n^{k:.2}\n");
        }
    }
    Ok(())
}
