//! Detects the vortices of a synthetic circle-valued map on random grids.

use flatchain::field::{dirichlet_energy, random_detection};
use flatchain::stats::sample_rng;
use flatchain::synth::{vortex_field, Defect, DefectSpec};
use flatchain::field::Target;
use flatchain::{flat_norm, BoxDomain, Mode};

fn main() -> flatchain::Result<()> {
    let spec = DefectSpec::new(
        Target::S1,
        BoxDomain::unit(2),
        vec![
            Defect { x: vec![0.25, 0.3], charge: 1 },
            Defect { x: vec![0.7, 0.35], charge: 2 },
            Defect { x: vec![0.5, 0.8], charge: -1 },
        ],
        0.1,
    );
    let (u, truth) = vortex_field(&spec, 0.1 / 16.0)?;
    println!("lattice {:?}, spacing {}", u.shape, u.spacing);
    println!("D_1(u) = {:.3}", dirichlet_energy(&u, 1, &spec.domain)?);

    for k in 0..3 {
        let mut rng = sample_rng(3, 0, k);
        let s = random_detection(&u, 0.1, Some(&truth), spec.group()?, &mut rng)?;
        let err = flat_norm(&truth.try_sub(&s.chain)?, Mode::Flat).value;
        println!("grid y = {:.3?}: {} atoms, F(S - S_grid) = {:.4}", s.y, s.chain.len(), err);
        for a in s.chain.atoms() {
            println!("  {:?} {}", a.x, a.c.value());
        }
    }
    Ok(())
}
