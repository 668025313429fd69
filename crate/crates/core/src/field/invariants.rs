//! Winding numbers and degrees of sampled maps on lattice boundaries.

use std::f64::consts::PI;

use super::Field;
use crate::error::{Error, Result};

/// Angular margin for certifying a class from samples.
pub const ANGLE_TOL: f64 = 0.1;

/// Largest admissible distance from an integer for a degree sum.
pub const INTEGRALITY_TOL: f64 = 0.1;

/// Box of lattice vertices `lo..=hi` (inclusive on both ends).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticeBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl LatticeBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_proper(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(a, b)| a < b)
    }

    /// Counterclockwise boundary loop of a planar box, without repeating the start.
    pub fn boundary_loop(&self) -> Vec<Vec<usize>> {
        let (i0, j0, i1, j1) = (self.lo[0], self.lo[1], self.hi[0], self.hi[1]);
        let mut out = Vec::with_capacity(2 * (i1 - i0 + j1 - j0));
        for i in i0..i1 {
            out.push(vec![i, j0]);
        }
        for j in j0..j1 {
            out.push(vec![i1, j]);
        }
        for i in (i0 + 1..=i1).rev() {
            out.push(vec![i, j1]);
        }
        for j in (j0 + 1..=j1).rev() {
            out.push(vec![i0, j]);
        }
        out
    }
}

fn wrapped_angle(a: &[f64], b: &[f64]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
}

/// Winding number of an S^1 field along a closed vertex cycle.
pub fn winding_number(u: &Field, cycle: &[Vec<usize>]) -> Result<i64> {
    if cycle.is_empty() {
        return Ok(0);
    }
    let mut total = 0.0;
    for k in 0..cycle.len() {
        let a = u.at(&cycle[k]);
        let b = u.at(&cycle[(k + 1) % cycle.len()]);
        let d = wrapped_angle(a, b);
        if d.abs() >= PI - ANGLE_TOL {
            return Err(Error::InsufficientResolution {
                cube: None,
                detail: format!(
                    "angular gap {d:.3} between {:?} and {:?}",
                    cycle[k],
                    cycle[(k + 1) % cycle.len()]
                ),
            });
        }
        total += d;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Winding number along the boundary of a planar lattice box.
pub fn box_winding(u: &Field, b: &LatticeBox) -> Result<i64> {
    winding_number(u, &b.boundary_loop())
}

/// Oriented lattice triangle on the boundary of a box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangle {
    pub vertices: [[usize; 3]; 3],
    /// +1 when the vertex order agrees with the outward normal.
    pub sign: i8,
}

/// Triangulates the six faces of a box, splitting every square along the
/// diagonal that increases both in-face indices.
pub fn boundary_triangles(b: &LatticeBox) -> Vec<Triangle> {
    let mut out = Vec::new();
    for a in 0..3 {
        let (p, q) = match a {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        // (a, p, q) cyclic means e_p x e_q = +e_a
        let cyclic: i8 = if a == 1 { -1 } else { 1 };
        for (level, outward) in [(b.lo[a], -1i8), (b.hi[a], 1)] {
            let sign = cyclic * outward;
            for i in b.lo[p]..b.hi[p] {
                for j in b.lo[q]..b.hi[q] {
                    let at = |di: usize, dj: usize| {
                        let mut v = [0usize; 3];
                        v[a] = level;
                        v[p] = i + di;
                        v[q] = j + dj;
                        v
                    };
                    let (v00, v10, v11, v01) = (at(0, 0), at(1, 0), at(1, 1), at(0, 1));
                    out.push(Triangle { vertices: [v00, v10, v11], sign });
                    out.push(Triangle { vertices: [v00, v11, v01], sign });
                }
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn triple(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Signed solid angle of the spherical triangle `(a, b, c)`.
pub fn solid_angle(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    2.0 * triple(a, b, c).atan2(1.0 + dot(a, b) + dot(b, c) + dot(c, a))
}

/// Degree of an S^2 field on the boundary of a lattice box, with the raw sum.
pub fn sphere_degree(u: &Field, b: &LatticeBox) -> Result<(i64, f64)> {
    let max_edge = PI / 2.0 - ANGLE_TOL;
    let mut total = 0.0;
    for t in boundary_triangles(b) {
        let [a, bb, c] = t.vertices.map(|v| u.at(&v));
        for (x, y) in [(a, bb), (bb, c), (c, a)] {
            let ang = dot(x, y).clamp(-1.0, 1.0).acos();
            if ang >= max_edge {
                return Err(Error::InsufficientResolution {
                    cube: None,
                    detail: format!("spherical triangle at {:?} spans {ang:.3}", t.vertices[0]),
                });
            }
        }
        total += t.sign as f64 * solid_angle(a, bb, c);
    }
    let raw = total / (4.0 * PI);
    let d = raw.round();
    if (raw - d).abs() > INTEGRALITY_TOL {
        return Err(Error::NonIntegral { cube: None, raw });
    }
    Ok((d as i64, raw))
}

/// Integer degree of an S^2 field on a box boundary.
pub fn box_degree(u: &Field, b: &LatticeBox) -> Result<i64> {
    sphere_degree(u, b).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::BoxDomain;
    use crate::field::Target;

    fn vortex(d: i32) -> Field {
        Field::from_fn(&BoxDomain::centered(2, 1.0), Target::S1, 0.05, 0.0, move |x, v| {
            let th = d as f64 * x[1].atan2(x[0]);
            v[0] = th.cos();
            v[1] = th.sin();
        })
        .unwrap()
    }

    #[test]
    fn vortex_windings() {
        for d in -3..=3 {
            let u = vortex(d);
            // center vertex is at index 20; avoid it
            for r in [3, 7, 15] {
                let b = LatticeBox { lo: vec![20 - r, 20 - r + 1], hi: vec![20 + r, 20 + r] };
                assert_eq!(box_winding(&u, &b).unwrap(), d as i64);
            }
        }
        let u = vortex(1);
        let off = LatticeBox { lo: vec![25, 25], hi: vec![35, 35] };
        assert_eq!(box_winding(&u, &off).unwrap(), 0);
    }

    #[test]
    fn reversed_loop_negates() {
        let u = vortex(2);
        let b = LatticeBox { lo: vec![10, 11], hi: vec![30, 30] };
        let mut l = b.boundary_loop();
        assert_eq!(winding_number(&u, &l).unwrap(), 2);
        l.reverse();
        assert_eq!(winding_number(&u, &l).unwrap(), -2);
    }

    #[test]
    fn coarse_loop_is_rejected() {
        let u = vortex(3);
        let b = LatticeBox { lo: vec![19, 20], hi: vec![21, 21] };
        assert!(matches!(box_winding(&u, &b), Err(Error::InsufficientResolution { .. })));
    }

    fn hedgehog(mirror: bool) -> Field {
        Field::from_fn(&BoxDomain::centered(3, 0.5), Target::S2, 0.05, 0.0, move |x, v| {
            v[0] = if mirror { -(x[0] - 0.013) } else { x[0] - 0.013 };
            v[1] = x[1] + 0.021;
            v[2] = x[2] - 0.007;
        })
        .unwrap()
    }

    #[test]
    fn hedgehog_degrees() {
        let b = LatticeBox { lo: vec![4, 5, 3], hi: vec![15, 14, 16] };
        assert_eq!(box_degree(&hedgehog(false), &b).unwrap(), 1);
        assert_eq!(box_degree(&hedgehog(true), &b).unwrap(), -1);
        let away = LatticeBox { lo: vec![12, 12, 12], hi: vec![18, 18, 18] };
        assert_eq!(box_degree(&hedgehog(false), &away).unwrap(), 0);
        let (_, raw) = sphere_degree(&hedgehog(false), &b).unwrap();
        assert!((raw - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_map_has_degree_zero() {
        let u = Field::from_fn(&BoxDomain::unit(3), Target::S2, 0.1, 0.0, |_, v| {
            v.copy_from_slice(&[0.6, 0.0, 0.8])
        })
        .unwrap();
        let b = LatticeBox { lo: vec![1, 2, 3], hi: vec![8, 7, 9] };
        assert_eq!(box_degree(&u, &b).unwrap(), 0);
    }
}
