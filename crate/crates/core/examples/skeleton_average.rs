//! Random-offset averages of integrals over grid skeleta.

use flatchain::grid::skeleton_average_test;
use flatchain::BoxDomain;

fn main() -> flatchain::Result<()> {
    let region = BoxDomain::unit(3);
    let ramp = |x: &[f64]| 1.0 + x[0] + 2.0 * x[1] * x[2];
    for j in 0..=3 {
        let r = skeleton_average_test(&ramp, &region, j, 0.3, 400, 11)?;
        println!(
            "j = {j}: mean {:.4} +- {:.4}, expected {:.4} ({:.2} sigma)",
            r.estimate.mean, r.estimate.std_err, r.target, r.sigmas
        );
    }
    Ok(())
}
