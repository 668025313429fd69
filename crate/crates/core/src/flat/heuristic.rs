use crate::chain::{dist, Chain, DipolarDecomposition, Dipole};
use crate::group::{Coeff, NormedGroup};

use super::{pair_cost, push_dipole, push_sink, sink_cost, Mode, NormResult};

/// Greedy upper bound for chains too large for the oracle.
///
/// Repeatedly moves the whole coefficient of one atom onto another when that
/// lowers the total price (coefficients are never split), then disposes of
/// what is left by monopoles or boundary escapes. Opposite atoms that cancel
/// exactly gain the most and are merged first.
pub fn heuristic(s: &Chain, mode: Mode) -> NormResult {
    let g = s.group();
    let atoms = s.atoms();
    let m = atoms.len();
    let mut coeff: Vec<Coeff> = atoms.iter().map(|a| a.c).collect();
    let bdist: Vec<f64> = atoms.iter().map(|a| s.domain().dist_to_boundary(&a.x)).collect();
    let mut alive = vec![true; m];
    let mut certificate = DipolarDecomposition::default();
    let mut value = 0.0;

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..m {
            if !alive[i] {
                continue;
            }
            let base_i = sink_cost(g, mode, coeff[i], bdist[i]).0;
            for j in 0..m {
                if i == j || !alive[j] {
                    continue;
                }
                let base_j = sink_cost(g, mode, coeff[j], bdist[j]).0;
                let merged = g.add(coeff[i], coeff[j]);
                let after = sink_cost(g, mode, merged, bdist[j]).0
                    + pair_cost(g, mode, coeff[i], dist(&atoms[i].x, &atoms[j].x));
                let gain = base_i + base_j - after;
                if gain > 1e-12 && best.is_none_or(|(b, _, _)| gain > b) {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let len = dist(&atoms[i].x, &atoms[j].x);
        value += pair_cost(g, mode, coeff[i], len);
        push_dipole(&mut certificate, Dipole::transport(&atoms[i].x, &atoms[j].x, coeff[i]), true);
        coeff[j] = g.add(coeff[j], coeff[i]);
        coeff[i] = g.zero();
        alive[i] = false;
        if g.is_zero(coeff[j]) {
            alive[j] = false;
        }
    }

    for i in 0..m {
        if alive[i] && !g.is_zero(coeff[i]) {
            let (cost, route) = sink_cost(g, mode, coeff[i], bdist[i]);
            value += cost;
            push_sink(&mut certificate, s, &atoms[i].x, coeff[i], route, true);
        }
    }
    NormResult { value, certificate, exact: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Atom, BoxDomain};
    use crate::group::GroupSpec;

    #[test]
    fn certificate_reassembles() {
        let g = GroupSpec::cyclic(4, 1.0).unwrap();
        let atoms = (0..12)
            .map(|i| {
                let t = i as f64;
                Atom::new(vec![0.1 + 0.07 * t, 0.2 + 0.05 * (t * 1.7).sin().abs()], (i % 3) + 1)
            })
            .collect();
        let s = Chain::new(BoxDomain::unit(2), g, atoms);
        for mode in [Mode::Flat, Mode::FlatSize] {
            let r = heuristic(&s, mode);
            assert!(!r.exact);
            let back = r.certificate.assemble(s.domain(), g).unwrap();
            assert_eq!(back, s);
            let cost = r.certificate_cost(&g, mode).unwrap();
            assert!((cost - r.value).abs() < 1e-9);
            assert!(r.value <= s.mass() + 1e-12);
        }
    }
}
