//! Flat and flat-size norms of a small chain under three coefficient groups.

use flatchain::flat::{solve, Solver};
use flatchain::{flat_norm, Atom, BoxDomain, Chain, GroupSpec, Mode};

fn main() -> flatchain::Result<()> {
    let atoms = vec![
        Atom::new(vec![0.2, 0.2], 3),
        Atom::new(vec![0.3, 0.25], -2),
        Atom::new(vec![0.8, 0.7], -1),
    ];
    for group in [
        GroupSpec::int_linear(1.0)?,
        GroupSpec::int(1.0, 0.5)?,
        GroupSpec::cyclic(3, 1.0)?,
    ] {
        let s = Chain::new(BoxDomain::unit(2), group, atoms.clone());
        let f = flat_norm(&s, Mode::Flat);
        let fs = flat_norm(&s, Mode::FlatSize);
        println!("{:?}", s.group().header());
        println!("  mass {:.4}  flat {:.4}  flat-size {:.4}", s.mass(), f.value, fs.value);
        for d in &f.certificate.dipoles {
            println!("  dipole {:?} -> {:?} carrying {:?}", d.base, d.tip(), d.c.value());
        }
        for m in &f.certificate.monopoles {
            println!("  monopole at {:?} carrying {:?}", m.x, m.c.value());
        }
        if let Ok(o) = solve(&s, Mode::Flat, Solver::Oracle) {
            println!("  oracle agrees: {}", (o.value - f.value).abs() < 1e-12);
        }
    }
    Ok(())
}
