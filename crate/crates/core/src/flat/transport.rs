//! Exact flat norm for integer coefficients with a linear norm.
//!
//! Each atom is expanded into unit charges. A positive unit at `x` and a
//! negative unit at `y` cancel at price `alpha * min(|x - y|, b(x) + b(y))`,
//! where `b(z) = min(1, dist(z, boundary))`; a unit left alone pays
//! `alpha * b(z)` (escape to the boundary, or a monopole). The optimal
//! pairing is a square assignment problem with one dummy partner per unit.

use std::collections::BTreeMap;

use crate::chain::{dist, Chain, DipolarDecomposition, Dipole};
use crate::error::{Error, Result};
use crate::group::Coeff;

use super::{push_dipole, push_sink, MinCostFlow, NormResult, SinkRoute};

fn boundary_price(s: &Chain, x: &[f64]) -> f64 {
    s.domain().dist_to_boundary(x).min(1.0)
}

/// Transport solver; exact for `Z` with norm `alpha * |d|`.
pub fn flow(s: &Chain) -> Result<NormResult> {
    let g = s.group();
    if !g.is_linear_int() {
        return Err(Error::WrongGroup(format!("{g:?}")));
    }
    if s.is_empty() {
        return Ok(NormResult::zero());
    }
    let alpha = g.scale;
    let atoms = s.atoms();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        let v = a.c.value();
        let units = if v > 0 { &mut pos } else { &mut neg };
        for _ in 0..v.unsigned_abs() {
            units.push(i);
        }
    }
    let b: Vec<f64> = atoms.iter().map(|a| boundary_price(s, &a.x)).collect();
    let (p, q) = (pos.len(), neg.len());
    let k = p + q;

    // rows: positive units then dummies; columns: negative units then dummies
    let src = 2 * k;
    let sink = 2 * k + 1;
    let row = |r: usize| r;
    let col = |c: usize| k + c;
    let mut net = MinCostFlow::new(2 * k + 2);
    for r in 0..k {
        net.add_edge(src, row(r), 1, 0.0);
        net.add_edge(col(r), sink, 1, 0.0);
    }
    let mut pair_arcs = Vec::with_capacity(p * q);
    for (i, &ai) in pos.iter().enumerate() {
        for (j, &aj) in neg.iter().enumerate() {
            let c = dist(&atoms[ai].x, &atoms[aj].x).min(b[ai] + b[aj]);
            pair_arcs.push((net.add_edge(row(i), col(j), 1, alpha * c), i, j));
        }
    }
    let mut pos_alone = Vec::with_capacity(p);
    for (i, &ai) in pos.iter().enumerate() {
        pos_alone.push(net.add_edge(row(i), col(q + i), 1, alpha * b[ai]));
    }
    let mut neg_alone = Vec::with_capacity(q);
    for (j, &aj) in neg.iter().enumerate() {
        neg_alone.push(net.add_edge(row(p + j), col(j), 1, alpha * b[aj]));
    }
    for j in 0..q {
        for i in 0..p {
            net.add_edge(row(p + j), col(q + i), 1, 0.0);
        }
    }
    let (sent, value) = net.run(src, sink, k as i64);
    debug_assert_eq!(sent, k as i64);

    // Aggregate unit moves per atom pair / atom.
    let mut direct: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    let mut alone: BTreeMap<usize, i64> = BTreeMap::new();
    for &(arc, i, j) in &pair_arcs {
        if net.flow(arc) > 0 {
            let (ai, aj) = (pos[i], neg[j]);
            if dist(&atoms[ai].x, &atoms[aj].x) <= b[ai] + b[aj] {
                *direct.entry((ai, aj)).or_default() += 1;
            } else {
                *alone.entry(ai).or_default() += 1;
                *alone.entry(aj).or_default() -= 1;
            }
        }
    }
    for (i, &arc) in pos_alone.iter().enumerate() {
        if net.flow(arc) > 0 {
            *alone.entry(pos[i]).or_default() += 1;
        }
    }
    for (j, &arc) in neg_alone.iter().enumerate() {
        if net.flow(arc) > 0 {
            *alone.entry(neg[j]).or_default() -= 1;
        }
    }

    let mut certificate = DipolarDecomposition::default();
    for (&(ai, aj), &count) in &direct {
        push_dipole(
            &mut certificate,
            Dipole::transport(&atoms[ai].x, &atoms[aj].x, Coeff::scalar(count)),
            true,
        );
    }
    for (&ai, &count) in &alone {
        if count == 0 {
            continue;
        }
        let d = s.domain().dist_to_boundary(&atoms[ai].x);
        let route = if d < 1.0 { SinkRoute::Boundary } else { SinkRoute::Monopole };
        push_sink(&mut certificate, s, &atoms[ai].x, Coeff::scalar(count), route, true);
    }
    Ok(NormResult { value, certificate, exact: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Atom, BoxDomain};
    use crate::group::GroupSpec;

    #[test]
    fn far_pair_is_killed_as_monopoles() {
        let g = GroupSpec::int(2.0, 1.0).unwrap();
        let s = Chain::new(
            BoxDomain::centered(2, 100.0),
            g,
            vec![Atom::new(vec![0.0, 0.0], 1), Atom::new(vec![3.0, 0.0], -1)],
        );
        let r = flow(&s).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
        assert_eq!(r.certificate.monopoles.len(), 2);
    }

    #[test]
    fn clustered_balanced_chain_is_cheap() {
        let g = GroupSpec::int(1.0, 1.0).unwrap();
        let s = Chain::new(
            BoxDomain::unit(2),
            g,
            vec![
                Atom::new(vec![0.500, 0.500], 2),
                Atom::new(vec![0.505, 0.500], -1),
                Atom::new(vec![0.500, 0.508], -3),
                Atom::new(vec![0.507, 0.507], 2),
            ],
        );
        let units = 8.0;
        let r = flow(&s).unwrap();
        assert!(r.value <= 0.01 * units / 2.0);
        let back = r.certificate.assemble(s.domain(), *s.group()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn wrong_group_rejected() {
        let g = GroupSpec::int(1.0, 0.75).unwrap();
        let s = Chain::new(BoxDomain::unit(2), g, vec![Atom::new(vec![0.5, 0.5], 1)]);
        assert!(matches!(flow(&s), Err(Error::WrongGroup(_))));
        let g = GroupSpec::cyclic(3, 1.0).unwrap();
        let s = Chain::new(BoxDomain::unit(2), g, vec![Atom::new(vec![0.5, 0.5], 1)]);
        assert!(matches!(flow(&s), Err(Error::WrongGroup(_))));
    }
}
