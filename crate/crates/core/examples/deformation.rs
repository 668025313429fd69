//! Pushes a chain onto cube centers and measures the expected flat distance.

use flatchain::grid::{deform, deformation_scaling_test, Grid};
use flatchain::{flat_norm, Atom, BoxDomain, Chain, GroupSpec, Mode};

fn main() -> flatchain::Result<()> {
    let s = Chain::new(
        BoxDomain::unit(2),
        GroupSpec::int_linear(1.0)?,
        vec![
            Atom::new(vec![0.13, 0.71], 2),
            Atom::new(vec![0.52, 0.48], -1),
            Atom::new(vec![0.87, 0.22], -1),
        ],
    );
    let g = Grid::new(0.25, vec![0.3, 0.6], BoxDomain::unit(2))?;
    let p = deform(&s, &g)?;
    for a in p.atoms() {
        println!("{:?} {}", a.x, a.c.value());
    }
    println!("F(S - P(S)) = {:.4}", flat_norm(&s.try_sub(&p)?, Mode::Flat).value);

    let family: Vec<(f64, usize)> = [0.2, 0.1, 0.05, 0.025].iter().map(|&h| (h, 200)).collect();
    let r = deformation_scaling_test(&s, &family, 7)?;
    println!("{:>6} {:>10} {:>10} {:>8} {:>8}", "h", "mean", "std_err", "ratio", "bound");
    for row in &r.rows {
        println!(
            "{:>6} {:>10.5} {:>10.5} {:>8.4} {:>8.4}",
            row.h, row.estimate.mean, row.estimate.std_err, row.ratio, row.bound
        );
    }
    println!("log-log slope {:.3}", r.slope);
    Ok(())
}
