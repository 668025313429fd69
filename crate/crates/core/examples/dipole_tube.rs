//! A map whose energy concentrates on a tube joining two opposite defects.

use flatchain::field::{dirichlet_energy, extract_sgrid, Target};
use flatchain::grid::{deform, Grid};
use flatchain::synth::{dipole_cylinder_field, DipoleSpec};
use flatchain::{flat_norm, BoxDomain, Mode};

fn main() -> flatchain::Result<()> {
    for len in [0.2, 0.4, 0.8] {
        let spec = DipoleSpec {
            target: Target::S1,
            domain: BoxDomain::new(vec![0.0, 0.0], vec![1.5, 1.0])?,
            a: vec![0.3, 0.5],
            b: vec![0.3 + len, 0.5],
            sigma: 1,
            radius: 0.1,
            h: 0.1,
            background: None,
            scale: 1.0,
        };
        let (u, truth) = dipole_cylinder_field(&spec, 1.0 / 160.0)?;
        let g = Grid::new(0.1, vec![0.31, 0.27], spec.domain.clone())?;
        let s = extract_sgrid(&u, &g, 1)?.chain;
        println!(
            "length {len}: energy {:.3}, flat norm {:.3}, detected = deformed truth: {}",
            dirichlet_energy(&u, 1, &spec.domain)?,
            flat_norm(&truth, Mode::Flat).value,
            s == deform(&truth, &g)?
        );
    }
    Ok(())
}
