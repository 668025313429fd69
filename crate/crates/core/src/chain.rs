//! Polyhedral 0-chains relative to an axis-aligned box.
//!
//! A chain is a finite formal sum `sum_j s_j [x_j]` of points with group
//! coefficients. Chains are always stored canonically: distinct points,
//! nonzero coefficients, lexicographic order, and only points of the open
//! box. Two chains that differ outside the open box are the same chain.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Coeff, GroupHeader, GroupSpec, NormedGroup};

/// Coordinates are snapped to this lattice before comparisons.
pub const SNAP: f64 = 1e-12;

/// Relative tolerance (times the domain diameter) for boundary contact.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Dipole offsets longer than `1 + OFFSET_TOL` are rejected.
pub const OFFSET_TOL: f64 = 1e-12;

pub type Point = Vec<f64>;

pub fn snap(x: f64) -> f64 {
    let s = (x / SNAP).round() / 1e12;
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        match p.total_cmp(q) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Open axis-aligned box `prod_i (lo_i, hi_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidDomain(format!(
                "corner lengths differ or are empty: {} vs {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::InvalidDomain(format!("need lo < hi, got {lo:?} / {hi:?}")));
        }
        Ok(BoxDomain { lo, hi })
    }

    /// The unit cube `(0, 1)^n`.
    pub fn unit(n: usize) -> Self {
        BoxDomain { lo: vec![0.0; n], hi: vec![1.0; n] }
    }

    /// The cube `(-r, r)^n`.
    pub fn centered(n: usize, r: f64) -> Self {
        BoxDomain { lo: vec![-r; n], hi: vec![r; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diam(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Point {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(p, (a, b))| *a < *p && *p < *b)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(p, (a, b))| *a <= *p && *p <= *b)
    }

    /// Distance from an interior point to the boundary (0 outside).
    pub fn dist_to_boundary(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(p, (a, b))| (p - a).min(b - p))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Nearest point of the boundary to an interior point.
    pub fn nearest_boundary_point(&self, x: &[f64]) -> Point {
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for (i, p) in x.iter().enumerate() {
            let (a, b) = (self.lo[i], self.hi[i]);
            if p - a < best.0 {
                best = (p - a, i, a);
            }
            if b - p < best.0 {
                best = (b - p, i, b);
            }
        }
        let mut q = x.to_vec();
        q[best.1] = best.2;
        q
    }

    /// Box grown by `margin` on every side.
    pub fn padded(&self, margin: f64) -> BoxDomain {
        BoxDomain {
            lo: self.lo.iter().map(|a| a - margin).collect(),
            hi: self.hi.iter().map(|b| b + margin).collect(),
        }
    }

    pub fn translated(&self, y: &[f64]) -> BoxDomain {
        BoxDomain {
            lo: self.lo.iter().zip(y).map(|(a, t)| a + t).collect(),
            hi: self.hi.iter().zip(y).map(|(b, t)| b + t).collect(),
        }
    }

    /// Closed containment of `self` in `other`.
    pub fn within(&self, other: &BoxDomain) -> bool {
        self.dim() == other.dim()
            && self.lo.iter().zip(&other.lo).all(|(a, b)| a >= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a <= b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub x: Point,
    pub c: Coeff,
}

impl Atom {
    pub fn new(x: Point, c: impl Into<Coeff>) -> Self {
        Atom { x, c: c.into() }
    }
}

/// Canonical polyhedral 0-chain in an open box.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    domain: BoxDomain,
    group: GroupSpec,
    atoms: Vec<Atom>,
}

impl Chain {
    /// Canonicalizes `atoms`: snaps coordinates, merges coincident points,
    /// drops zero coefficients and points outside the open domain.
    pub fn new(domain: BoxDomain, group: GroupSpec, atoms: Vec<Atom>) -> Self {
        let n = domain.dim();
        let mut kept: Vec<Atom> = atoms
            .into_iter()
            .filter(|a| a.x.len() == n)
            .map(|a| Atom { x: a.x.iter().map(|&v| snap(v)).collect(), c: group.reduce(a.c) })
            .filter(|a| domain.contains_open(&a.x))
            .collect();
        kept.sort_by(|a, b| cmp_points(&a.x, &b.x));
        let mut merged: Vec<Atom> = Vec::with_capacity(kept.len());
        for a in kept {
            match merged.last_mut() {
                Some(last) if last.x == a.x => last.c = group.add(last.c, a.c),
                _ => merged.push(a),
            }
        }
        merged.retain(|a| !group.is_zero(a.c));
        Chain { domain, group, atoms: merged }
    }

    pub fn zero(domain: BoxDomain, group: GroupSpec) -> Self {
        Chain { domain, group, atoms: Vec::new() }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Same atoms viewed relative to another domain.
    pub fn with_domain(&self, domain: BoxDomain) -> Chain {
        Chain::new(domain, self.group, self.atoms.clone())
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| self.group.norm(a.c)).sum()
    }

    /// Sum of all coefficients.
    pub fn augmentation(&self) -> Coeff {
        self.atoms.iter().fold(self.group.zero(), |acc, a| self.group.add(acc, a.c))
    }

    /// Atoms strictly inside `v`, as a chain relative to `v`.
    pub fn restrict(&self, v: &BoxDomain) -> Chain {
        Chain::new(
            v.clone(),
            self.group,
            self.atoms.iter().filter(|a| v.contains_open(&a.x)).cloned().collect(),
        )
    }

    /// Augmentation of the restriction to `v`; requires the support to stay
    /// away from the boundary of `v`.
    pub fn intersection_index(&self, v: &BoxDomain) -> Result<Coeff> {
        if v.dim() != self.dim() {
            return Err(Error::InvalidDomain("index region has the wrong dimension".into()));
        }
        if !v.within(&self.domain) {
            return Err(Error::InvalidDomain(
                "index region must lie in the closure of the chain domain".into(),
            ));
        }
        let tol = BOUNDARY_TOL * self.domain.diam();
        for a in &self.atoms {
            if boundary_distance(v, &a.x) < tol {
                return Err(Error::BoundaryContact { point: a.x.clone(), tolerance: tol });
            }
        }
        Ok(self.restrict(v).augmentation())
    }

    fn check_compatible(&self, other: &Chain) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        if self.group != other.group {
            return Err(Error::GroupMismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Chain) -> Result<Chain> {
        self.check_compatible(other)?;
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Ok(Chain::new(self.domain.clone(), self.group, atoms))
    }

    pub fn try_sub(&self, other: &Chain) -> Result<Chain> {
        self.try_add(&other.neg())
    }

    pub fn neg(&self) -> Chain {
        Chain {
            domain: self.domain.clone(),
            group: self.group,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { x: a.x.clone(), c: self.group.neg(a.c) })
                .collect(),
        }
    }

    pub fn to_file(&self) -> ChainFile {
        let rank = self.group.rank();
        ChainFile {
            domain: self.domain.clone(),
            group: self.group.header(),
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomRecord {
                    x: a.x.clone(),
                    c: if rank == 1 {
                        CoeffRepr::Scalar(a.c.value())
                    } else {
                        CoeffRepr::List(a.c.0[..rank].to_vec())
                    },
                })
                .collect(),
            grid: None,
        }
    }

    pub fn from_file(file: &ChainFile) -> Result<Chain> {
        let domain = BoxDomain::new(file.domain.lo.clone(), file.domain.hi.clone())?;
        let group = GroupSpec::from_header(&file.group)?;
        let mut atoms = Vec::with_capacity(file.atoms.len());
        for a in &file.atoms {
            if a.x.len() != domain.dim() {
                return Err(Error::InvalidInput(format!(
                    "atom {:?} does not match domain dimension {}",
                    a.x,
                    domain.dim()
                )));
            }
            let c = match &a.c {
                CoeffRepr::Scalar(v) => Coeff::scalar(*v),
                CoeffRepr::List(v) => Coeff::from_slice(v)?,
            };
            atoms.push(Atom { x: a.x.clone(), c });
        }
        Ok(Chain::new(domain, group, atoms))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Chain> {
        Chain::from_file(&serde_json::from_str(s)?)
    }
}

/// Distance from `x` to the boundary of the box `v` (inside or outside).
fn boundary_distance(v: &BoxDomain, x: &[f64]) -> f64 {
    if v.contains_closed(x) {
        v.dist_to_boundary(x)
    } else {
        x.iter()
            .zip(v.lo.iter().zip(&v.hi))
            .map(|(p, (a, b))| {
                let d = (a - p).max(p - b).max(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// On-disk chain representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub domain: BoxDomain,
    pub group: GroupHeader,
    pub atoms: Vec<AtomRecord>,
    /// Grid that produced the chain, for detector output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridStamp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridStamp {
    pub h: f64,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub x: Vec<f64>,
    pub c: CoeffRepr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffRepr {
    Scalar(i64),
    List(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monopole {
    pub x: Point,
    pub c: Coeff,
}

/// `c [base + offset] - c [base]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dipole {
    pub base: Point,
    pub offset: Vec<f64>,
    pub c: Coeff,
}

impl Dipole {
    pub fn size(&self) -> f64 {
        norm(&self.offset)
    }

    pub fn tip(&self) -> Point {
        self.base.iter().zip(&self.offset).map(|(b, v)| b + v).collect()
    }

    /// Dipole carrying `c` from `from` to `to`: `c [from] - c [to]`.
    pub fn transport(from: &[f64], to: &[f64], c: Coeff) -> Dipole {
        Dipole {
            base: to.to_vec(),
            offset: from.iter().zip(to).map(|(f, t)| f - t).collect(),
            c,
        }
    }

    /// Splits into `ceil(|v|)` collinear pieces of length at most one.
    pub fn split_unit(&self) -> Vec<Dipole> {
        let len = self.size();
        if len <= 1.0 {
            return vec![self.clone()];
        }
        let k = len.ceil() as usize;
        (0..k)
            .map(|i| {
                let t = i as f64 / k as f64;
                Dipole {
                    base: self.base.iter().zip(&self.offset).map(|(b, v)| b + t * v).collect(),
                    offset: self.offset.iter().map(|v| v / k as f64).collect(),
                    c: self.c,
                }
            })
            .collect()
    }
}

/// Monopoles plus dipoles whose formal sum represents a chain in a domain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DipolarDecomposition {
    pub monopoles: Vec<Monopole>,
    pub dipoles: Vec<Dipole>,
}

impl DipolarDecomposition {
    pub fn is_empty(&self) -> bool {
        self.monopoles.is_empty() && self.dipoles.is_empty()
    }

    fn check_offsets(&self) -> Result<()> {
        for d in &self.dipoles {
            let len = d.size();
            if len > 1.0 + OFFSET_TOL {
                return Err(Error::OffsetTooLong { length: len });
            }
        }
        Ok(())
    }

    /// Formal sum of the pieces as a canonical chain in `domain`.
    pub fn assemble(&self, domain: &BoxDomain, group: GroupSpec) -> Result<Chain> {
        self.check_offsets()?;
        let mut atoms = Vec::new();
        for m in &self.monopoles {
            atoms.push(Atom { x: m.x.clone(), c: m.c });
        }
        for d in &self.dipoles {
            atoms.push(Atom { x: d.tip(), c: d.c });
            atoms.push(Atom { x: d.base.clone(), c: group.neg(d.c) });
        }
        Ok(Chain::new(domain.clone(), group, atoms))
    }

    /// Flat cost: monopole norms plus `|c| * |v|` per dipole.
    pub fn cost_flat(&self, group: &GroupSpec) -> Result<f64> {
        self.check_offsets()?;
        Ok(self.monopoles.iter().map(|m| group.norm(m.c)).sum::<f64>()
            + self.dipoles.iter().map(|d| group.norm(d.c) * d.size()).sum::<f64>())
    }

    /// Flat-size cost: monopole norms plus `alpha * |v|` per dipole.
    pub fn cost_flatsize(&self, group: &GroupSpec) -> Result<f64> {
        self.check_offsets()?;
        Ok(self.monopoles.iter().map(|m| group.norm(m.c)).sum::<f64>()
            + group.alpha() * self.dipoles.iter().map(|d| d.size()).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> GroupSpec {
        GroupSpec::int(1.0, 1.0).unwrap()
    }

    fn sq() -> BoxDomain {
        BoxDomain::unit(2)
    }

    #[test]
    fn canonicalize_merges_and_drops() {
        let x = vec![0.3, 0.4];
        let s = Chain::new(sq(), z(), vec![Atom::new(x.clone(), 1), Atom::new(x.clone(), 1)]);
        assert_eq!(s.atoms(), &[Atom::new(x.clone(), 2)]);

        let s = Chain::new(sq(), z(), vec![Atom::new(x.clone(), 1), Atom::new(x.clone(), -1)]);
        assert!(s.is_empty());

        let s = Chain::new(sq(), z(), vec![Atom::new(vec![0.0, 0.5], 3), Atom::new(vec![1.2, 0.5], 1)]);
        assert!(s.is_empty());
    }

    #[test]
    fn canonical_form_is_idempotent_and_sorted() {
        let s = Chain::new(
            sq(),
            z(),
            vec![
                Atom::new(vec![0.7, 0.1], 2),
                Atom::new(vec![0.2, 0.9], -1),
                Atom::new(vec![0.2, 0.3], 5),
            ],
        );
        let xs: Vec<_> = s.atoms().iter().map(|a| a.x.clone()).collect();
        assert_eq!(xs, vec![vec![0.2, 0.3], vec![0.2, 0.9], vec![0.7, 0.1]]);
        let again = Chain::new(sq(), z(), s.atoms().to_vec());
        assert_eq!(again, s);
    }

    #[test]
    fn mass_and_augmentation() {
        assert_eq!(Chain::zero(sq(), z()).mass(), 0.0);
        let s = Chain::new(sq(), z(), vec![Atom::new(vec![0.5, 0.5], 2)]);
        assert_eq!(s.mass(), 2.0);
        let g = GroupSpec::int(1.0, 0.75).unwrap();
        let s = Chain::new(sq(), g, vec![Atom::new(vec![0.5, 0.5], 3)]);
        assert!((s.mass() - 3f64.powf(0.75)).abs() < 1e-12);
        assert!((s.mass() - 2.2795).abs() < 1e-4);

        let s = Chain::new(sq(), z(), vec![Atom::new(vec![0.2, 0.2], 1), Atom::new(vec![0.6, 0.2], -1)]);
        assert_eq!(s.augmentation(), Coeff::ZERO);
        let s = Chain::new(sq(), z(), vec![Atom::new(vec![0.2, 0.2], 2), Atom::new(vec![0.6, 0.2], 3)]);
        assert_eq!(s.augmentation(), 5.into());
        let z4 = GroupSpec::cyclic(4, 1.0).unwrap();
        let s = Chain::new(sq(), z4, vec![Atom::new(vec![0.2, 0.2], 3), Atom::new(vec![0.6, 0.2], 3)]);
        assert_eq!(s.augmentation(), 2.into());
    }

    #[test]
    fn restriction_uses_strict_membership() {
        let v = BoxDomain::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let s = Chain::new(sq(), z(), vec![Atom::new(vec![0.25, 0.5], 1), Atom::new(vec![0.5, 0.5], 4)]);
        let r = s.restrict(&v);
        assert_eq!(r.atoms(), &[Atom::new(vec![0.25, 0.5], 1)]);
        assert!(r.mass() <= s.mass());
    }

    #[test]
    fn intersection_index_cases() {
        let v = BoxDomain::new(vec![0.2, 0.2], vec![0.6, 0.6]).unwrap();
        let s = Chain::new(sq(), z(), vec![Atom::new(vec![0.4, 0.4], 1)]);
        assert_eq!(s.intersection_index(&v).unwrap(), 1.into());

        let s = Chain::new(sq(), z(), vec![Atom::new(vec![0.5, 0.4], 3), Atom::new(vec![0.7, 0.4], -3)]);
        assert_eq!(s.intersection_index(&v).unwrap(), 3.into());

        let s = Chain::new(sq(), z(), vec![Atom::new(vec![0.6 + 1e-12, 0.4], 1)]);
        assert!(matches!(s.intersection_index(&v), Err(Error::BoundaryContact { .. })));
    }

    #[test]
    fn assemble_dipoles_and_monopoles() {
        let d = DipolarDecomposition {
            monopoles: vec![],
            dipoles: vec![Dipole { base: vec![0.5, 0.5], offset: vec![0.1, 0.0], c: 2.into() }],
        };
        let s = d.assemble(&sq(), z()).unwrap();
        assert_eq!(s.atoms(), &[Atom::new(vec![0.5, 0.5], -2), Atom::new(vec![0.6, 0.5], 2)]);

        let out = DipolarDecomposition {
            monopoles: vec![],
            dipoles: vec![Dipole { base: vec![0.9, 0.5], offset: vec![0.5, 0.0], c: 1.into() }],
        };
        let s = out.assemble(&sq(), z()).unwrap();
        assert_eq!(s.atoms(), &[Atom::new(vec![0.9, 0.5], -1)]);

        let mono = DipolarDecomposition {
            monopoles: vec![Monopole { x: vec![0.1, 0.2], c: 4.into() }],
            dipoles: vec![],
        };
        assert_eq!(mono.assemble(&sq(), z()).unwrap().atoms(), &[Atom::new(vec![0.1, 0.2], 4)]);

        let long = DipolarDecomposition {
            monopoles: vec![],
            dipoles: vec![Dipole { base: vec![0.0, 0.0], offset: vec![1.0, 0.5], c: 1.into() }],
        };
        assert!(matches!(long.assemble(&sq(), z()), Err(Error::OffsetTooLong { .. })));
    }

    #[test]
    fn decomposition_costs() {
        let mono = DipolarDecomposition {
            monopoles: vec![Monopole { x: vec![0.1, 0.2], c: 4.into() }],
            dipoles: vec![],
        };
        assert_eq!(mono.cost_flat(&z()).unwrap(), 4.0);
        assert_eq!(mono.cost_flatsize(&z()).unwrap(), 4.0);
        let fat = DipolarDecomposition {
            monopoles: vec![],
            dipoles: vec![Dipole { base: vec![0.5, 0.5], offset: vec![0.0, 0.1], c: 5.into() }],
        };
        assert!((fat.cost_flat(&z()).unwrap() - 0.5).abs() < 1e-12);
        assert!((fat.cost_flatsize(&z()).unwrap() - 0.1).abs() < 1e-12);
        let empty = DipolarDecomposition::default();
        assert_eq!(empty.cost_flat(&z()).unwrap(), 0.0);
        assert_eq!(empty.cost_flatsize(&z()).unwrap(), 0.0);
    }

    #[test]
    fn split_keeps_total_length() {
        let d = Dipole { base: vec![0.0, 0.0], offset: vec![2.5, 0.0], c: 3.into() };
        let parts = d.split_unit();
        assert_eq!(parts.len(), 3);
        let total: f64 = parts.iter().map(|p| p.size()).sum();
        assert!((total - 2.5).abs() < 1e-12);
        assert!(parts.iter().all(|p| p.size() <= 1.0));
    }

    #[test]
    fn json_round_trip_with_lattice_coeffs() {
        let g = GroupSpec::lattice(2, 1.0, 1.0).unwrap();
        let s = Chain::new(
            sq(),
            g,
            vec![
                Atom::new(vec![0.1, 0.2], Coeff::from_slice(&[1, -2]).unwrap()),
                Atom::new(vec![0.3, 0.7], Coeff::from_slice(&[0, 3]).unwrap()),
            ],
        );
        let back = Chain::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
