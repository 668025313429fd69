//! The grid-based singular chain `S^grid(u, h, y)`.

use rand::Rng;
use rayon::prelude::*;

use super::invariants::{box_winding, sphere_degree};
pub use super::invariants::LatticeBox;
use super::{Field, Target};
use crate::chain::{Atom, Chain};
use crate::error::{Error, Result};
use crate::grid::{CubeIndex, Grid, MAX_RETRIES};
use crate::group::{Coeff, GroupSpec};
use crate::stats::pool;

/// Detected chain with the grid that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularChain {
    pub chain: Chain,
    pub h: f64,
    pub y: Vec<f64>,
    /// Raw invariant of every cube meeting the domain (the winding number,
    /// or the unrounded degree sum).
    pub raw: Vec<(CubeIndex, f64)>,
}

/// Lattice index of the grid face `h * (y_a + m - 1/2)` along `axis`.
///
/// Neighbouring cubes call this with the same `m` for their shared face, so
/// the lattice boxes of a grid tile the lattice without gaps or overlaps.
fn face_index(u: &Field, g: &Grid, axis: usize, m: i64) -> i64 {
    let x = g.h * (g.y[axis] + m as f64 - 0.5);
    ((x - u.origin[axis]) / u.spacing).round() as i64
}

/// Lattice box approximating cube `z` of `g`.
pub fn lattice_box(u: &Field, g: &Grid, z: &[i64]) -> Result<LatticeBox> {
    let n = u.dim();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for a in 0..n {
        let (k0, k1) = (face_index(u, g, a, z[a]), face_index(u, g, a, z[a] + 1));
        if k0 < 0 || k1 >= u.shape[a] as i64 {
            return Err(Error::InsufficientResolution {
                cube: Some(z.to_vec()),
                detail: "cube leaves the sampled lattice".into(),
            });
        }
        if k1 <= k0 {
            return Err(Error::InsufficientResolution {
                cube: Some(z.to_vec()),
                detail: "cube is thinner than one lattice spacing".into(),
            });
        }
        lo.push(k0 as usize);
        hi.push(k1 as usize);
    }
    Ok(LatticeBox { lo, hi })
}

fn attach(e: Error, z: &[i64]) -> Error {
    match e {
        Error::InsufficientResolution { detail, .. } => {
            Error::InsufficientResolution { cube: Some(z.to_vec()), detail }
        }
        Error::NonIntegral { raw, .. } => Error::NonIntegral { cube: Some(z.to_vec()), raw },
        other => other,
    }
}

fn cube_class(u: &Field, g: &Grid, z: &[i64]) -> Result<(i64, f64)> {
    let b = lattice_box(u, g, z)?;
    match u.target {
        Target::S1 => box_winding(u, &b).map(|d| (d, d as f64)),
        Target::S2 => sphere_degree(u, &b),
    }
    .map_err(|e| attach(e, z))
}

/// `S^grid(u, h, y)` with coefficients in the integers with norm `|d|`.
pub fn extract_sgrid(u: &Field, g: &Grid, p: usize) -> Result<SingularChain> {
    extract_sgrid_with(u, g, p, GroupSpec::int(1.0, 1.0)?)
}

/// `S^grid(u, h, y)` with coefficients in `group` (an integer group).
pub fn extract_sgrid_with(u: &Field, g: &Grid, p: usize, group: GroupSpec) -> Result<SingularChain> {
    let n = u.dim();
    if p + 1 != n || u.target.sphere_dim() != p {
        return Err(Error::InvalidInput(format!(
            "a {} field on a {n}-dimensional domain needs p = {}, got {p}",
            u.target,
            n - 1
        )));
    }
    if g.dim() != n {
        return Err(Error::InvalidInput("grid and field dimensions differ".into()));
    }
    let cubes = g.cubes();
    let classes = pool().install(|| {
        cubes.par_iter().map(|z| cube_class(u, g, z)).collect::<Result<Vec<(i64, f64)>>>()
    })?;
    let mut atoms = Vec::new();
    let mut raw = Vec::with_capacity(cubes.len());
    for (z, (d, r)) in cubes.into_iter().zip(classes) {
        if d != 0 {
            atoms.push(Atom { x: g.center(&z), c: Coeff::scalar(d) });
        }
        raw.push((z, r));
    }
    let chain = Chain::new(g.domain.clone(), group, atoms);
    Ok(SingularChain { chain, h: g.h, y: g.y.clone(), raw })
}

/// Grid whose faces keep at least two lattice spacings from every atom of `truth`.
pub fn admissible_for(g: &Grid, truth: &Chain, spacing: f64) -> bool {
    truth.atoms().iter().all(|a| g.skeleton_distance(&a.x) >= 2.0 * spacing)
}

/// Uniform random grid among those accepted by [`admissible_for`].
pub fn admissible_grid_for<R: Rng + ?Sized>(u: &Field, h: f64, truth: &Chain, rng: &mut R) -> Result<Grid> {
    let points: Vec<_> = truth.atoms().iter().map(|a| a.x.clone()).collect();
    crate::grid::grid_avoiding(h, &u.domain, &points, 2.0 * u.spacing, rng)
}

/// Detection on a random grid.
///
/// With a known singular chain the offset is drawn among admissible ones
/// and extraction errors are returned as is. Without it, offsets are redrawn
/// whenever the lattice cannot certify some cube.
pub fn random_detection<R: Rng + ?Sized>(
    u: &Field,
    h: f64,
    truth: Option<&Chain>,
    group: GroupSpec,
    rng: &mut R,
) -> Result<SingularChain> {
    let p = u.target.sphere_dim();
    if let Some(t) = truth {
        let g = admissible_grid_for(u, h, t, rng)?;
        return extract_sgrid_with(u, &g, p, group);
    }
    let mut last = None;
    for _ in 0..MAX_RETRIES {
        let g = Grid::random(h, u.domain.clone(), rng)?;
        match extract_sgrid_with(u, &g, p, group) {
            Ok(s) => return Ok(s),
            Err(e @ (Error::InsufficientResolution { .. } | Error::NonIntegral { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::BoxDomain;

    fn vortex_at(a: [f64; 2], d: i32) -> Field {
        Field::from_fn(&BoxDomain::unit(2), Target::S1, 1.0 / 160.0, 0.3, move |x, v| {
            let th = d as f64 * (x[1] - a[1]).atan2(x[0] - a[0]);
            v[0] = th.cos();
            v[1] = th.sin();
        })
        .unwrap()
    }

    #[test]
    fn boxes_tile_the_lattice() {
        let u = vortex_at([0.5, 0.5], 1);
        let g = Grid::new(0.1, vec![0.37, 0.81], BoxDomain::unit(2)).unwrap();
        let a = lattice_box(&u, &g, &[3, 4]).unwrap();
        let b = lattice_box(&u, &g, &[4, 4]).unwrap();
        let c = lattice_box(&u, &g, &[3, 5]).unwrap();
        assert_eq!(a.hi[0], b.lo[0]);
        assert_eq!(a.hi[1], c.lo[1]);
        assert_eq!(a.hi[0] - a.lo[0], 16);
    }

    #[test]
    fn single_vortex_lands_in_its_cube() {
        let a = [0.43, 0.58];
        let u = vortex_at(a, 1);
        let g = Grid::new(0.1, vec![0.25, 0.5], BoxDomain::unit(2)).unwrap();
        let s = extract_sgrid(&u, &g, 1).unwrap();
        let chain = &s.chain;
        assert_eq!(chain.len(), 1);
        let c: Vec<f64> = g.center(&g.cube_of(&a).unwrap()).into_iter().map(crate::chain::snap).collect();
        assert_eq!(chain.atoms()[0].x, c);
        assert_eq!(chain.atoms()[0].c, Coeff::scalar(1));
    }

    #[test]
    fn smooth_field_has_no_singularities() {
        let u = Field::from_fn(&BoxDomain::unit(2), Target::S1, 1.0 / 64.0, 0.2, |x, v| {
            v[0] = (3.0 * x[0]).cos();
            v[1] = (3.0 * x[0]).sin();
        })
        .unwrap();
        let g = Grid::new(0.1, vec![0.1, 0.2], BoxDomain::unit(2)).unwrap();
        assert!(extract_sgrid(&u, &g, 1).unwrap().chain.is_empty());
    }

    #[test]
    fn wrong_exponent_rejected() {
        let u = vortex_at([0.5, 0.5], 1);
        let g = Grid::new(0.1, vec![0.1, 0.2], BoxDomain::unit(2)).unwrap();
        assert!(extract_sgrid(&u, &g, 2).is_err());
    }
}
