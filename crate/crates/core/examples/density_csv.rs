//! Writes prior and posterior density curves of the case-study victim as
//! long-form CSV.

use gaussi::casestudy::{run_case, CaseStudyConfig, Dataset};
use gaussi::metrics::normal_density_curve;
use gaussi::report::{DensityCurve, Format};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = run_case(&Dataset::bundled(), &CaseStudyConfig { case: 3, ..Default::default() })?;
    let curve = |name: &str, mean: f64, var: f64| -> Result<DensityCurve, gaussi::metrics::MetricError> {
        let half = 4.0 * var.sqrt();
        Ok(DensityCurve {
            name: name.into(),
            points: normal_density_curve(mean, var, mean - half, mean + half, 41)?,
        })
    };
    let mut report = out.to_report();
    report.densities = vec![
        curve("prior", out.prior_mean, out.prior_variance)?,
        curve("posterior", out.posterior_mean(), out.posterior_variance())?,
    ];
    print!("{}", report.render(Format::Csv));
    Ok(())
}
