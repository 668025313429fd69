//! Point defects of a sphere-valued map in three dimensions.

use flatchain::field::{extract_sgrid, Target};
use flatchain::grid::{deform, grid_avoiding};
use flatchain::stats::sample_rng;
use flatchain::synth::{hedgehog_field, Defect, DefectSpec};
use flatchain::BoxDomain;

fn main() -> flatchain::Result<()> {
    let spec = DefectSpec::new(
        Target::S2,
        BoxDomain::unit(3),
        vec![
            Defect { x: vec![0.3, 0.35, 0.4], charge: 1 },
            Defect { x: vec![0.7, 0.65, 0.6], charge: -1 },
        ],
        0.1,
    );
    let (u, truth) = hedgehog_field(&spec, 1.0 / 64.0)?;
    let points: Vec<Vec<f64>> = truth.atoms().iter().map(|a| a.x.clone()).collect();
    let mut rng = sample_rng(5, 0, 0);
    let g = grid_avoiding(0.1, &u.domain, &points, 2.0 * u.spacing, &mut rng)?;
    let s = extract_sgrid(&u, &g, 2)?;
    println!("grid offset {:.3?}", g.y);
    for (z, raw) in s.raw.iter().filter(|(_, d)| d.abs() > 0.5) {
        println!("cube {z:?}: degree sum {raw:.6}");
    }
    println!("matches the deformed truth: {}", s.chain == deform(&truth, &g)?);
    Ok(())
}
