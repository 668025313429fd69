//! Normed abelian coefficient groups.
//!
//! Chains take coefficients in a group `G` carrying a norm `|.|` with the
//! usual three axioms plus two discreteness conditions:
//!
//! * a positive gap `alpha = inf { |s| : s != 0 }`,
//! * finitely many elements in every closed ball.
//!
//! [`NormedGroup`] is the abstract contract. [`GroupSpec`] ships the concrete
//! instances used throughout the crate: the integers with a (possibly
//! sublinear) power norm, the cyclic groups `Z_n`, and lattices `Z^k`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum rank of a lattice coefficient group.
pub const MAX_RANK: usize = 4;

/// A group element, stored as a small fixed-size integer tuple.
///
/// Components beyond the rank of the owning group are always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coeff(pub [i64; MAX_RANK]);

impl Coeff {
    pub const ZERO: Coeff = Coeff([0; MAX_RANK]);

    pub fn scalar(v: i64) -> Self {
        let mut c = [0; MAX_RANK];
        c[0] = v;
        Coeff(c)
    }

    pub fn from_slice(v: &[i64]) -> Result<Self> {
        if v.is_empty() || v.len() > MAX_RANK {
            return Err(Error::InvalidInput(format!(
                "coefficient tuple must have 1..={MAX_RANK} entries, got {}",
                v.len()
            )));
        }
        let mut c = [0; MAX_RANK];
        c[..v.len()].copy_from_slice(v);
        Ok(Coeff(c))
    }

    /// First component; the whole value for rank-one groups.
    pub fn value(&self) -> i64 {
        self.0[0]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl Serialize for Coeff {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let len = MAX_RANK - self.0.iter().rev().take_while(|&&c| c == 0).count();
        if len <= 1 {
            ser.serialize_i64(self.0[0])
        } else {
            self.0[..len].serialize(ser)
        }
    }
}

impl<'de> Deserialize<'de> for Coeff {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Scalar(i64),
            List(Vec<i64>),
        }
        match Repr::deserialize(de)? {
            Repr::Scalar(v) => Ok(Coeff::scalar(v)),
            Repr::List(v) => Coeff::from_slice(&v).map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.0.iter().rposition(|&c| c != 0).unwrap_or(0);
        if last == 0 {
            write!(f, "{}", self.0[0])
        } else {
            write!(f, "{:?}", &self.0[..=last])
        }
    }
}

impl From<i64> for Coeff {
    fn from(v: i64) -> Self {
        Coeff::scalar(v)
    }
}

/// Abstract normed abelian group satisfying the discreteness conditions.
pub trait NormedGroup {
    type Elem: Copy + PartialEq + fmt::Debug;

    fn zero(&self) -> Self::Elem;
    fn add(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn neg(&self, a: Self::Elem) -> Self::Elem;
    fn norm(&self, a: Self::Elem) -> f64;
    /// Gap constant: every nonzero element has norm at least `alpha`.
    fn alpha(&self) -> f64;
    /// All elements of norm `<= radius`.
    fn ball(&self, radius: f64) -> Vec<Self::Elem>;
    /// Draws an element for randomized axiom checks.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Elem;

    fn sub(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem {
        self.add(a, self.neg(b))
    }

    fn is_zero(&self, a: Self::Elem) -> bool {
        a == self.zero()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    /// `Z` with norm `scale * |d|^exponent`.
    Int,
    /// `Z_n` with norm `scale * min(k, n - k)`.
    Cyclic { n: i64 },
    /// `Z^rank` with norm `scale * sum_i |d_i|^exponent`.
    Lattice { rank: usize },
}

/// Concrete coefficient group with its norm parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub scale: f64,
    pub exponent: f64,
}

fn check_scale_exponent(scale: f64, exponent: f64) -> Result<()> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidGroup(format!("scale must be positive, got {scale}")));
    }
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::InvalidGroup(format!(
            "exponent must lie in (0, 1] for subadditivity, got {exponent}"
        )));
    }
    Ok(())
}

impl GroupSpec {
    /// The integers with norm `scale * |d|^exponent`, `0 < exponent <= 1`.
    pub fn int(scale: f64, exponent: f64) -> Result<Self> {
        check_scale_exponent(scale, exponent)?;
        Ok(GroupSpec { kind: GroupKind::Int, scale, exponent })
    }

    /// The integers with norm `scale * |d|`.
    pub fn int_linear(scale: f64) -> Result<Self> {
        Self::int(scale, 1.0)
    }

    /// `Z_n` with norm `scale * min(k, n - k)`.
    pub fn cyclic(n: i64, scale: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGroup(format!("cyclic order must be >= 2, got {n}")));
        }
        check_scale_exponent(scale, 1.0)?;
        Ok(GroupSpec { kind: GroupKind::Cyclic { n }, scale, exponent: 1.0 })
    }

    /// `Z^rank` with norm `scale * sum |d_i|^exponent`.
    pub fn lattice(rank: usize, scale: f64, exponent: f64) -> Result<Self> {
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::InvalidGroup(format!("lattice rank must be in 1..={MAX_RANK}")));
        }
        check_scale_exponent(scale, exponent)?;
        Ok(GroupSpec { kind: GroupKind::Lattice { rank }, scale, exponent })
    }

    pub fn rank(&self) -> usize {
        match self.kind {
            GroupKind::Lattice { rank } => rank,
            _ => 1,
        }
    }

    /// True for `Z` with a linear norm, the case the transport solver handles.
    pub fn is_linear_int(&self) -> bool {
        matches!(self.kind, GroupKind::Int) && self.exponent == 1.0
    }

    /// Brings an arbitrary integer tuple into canonical form for this group.
    pub fn reduce(&self, c: Coeff) -> Coeff {
        match self.kind {
            GroupKind::Int => Coeff::scalar(c.0[0]),
            GroupKind::Cyclic { n } => Coeff::scalar(c.0[0].rem_euclid(n)),
            GroupKind::Lattice { rank } => {
                let mut out = Coeff::ZERO;
                out.0[..rank].copy_from_slice(&c.0[..rank]);
                out
            }
        }
    }

    /// Integer element `k * generator` (first basis vector for lattices).
    pub fn elem(&self, k: i64) -> Coeff {
        self.reduce(Coeff::scalar(k))
    }

    fn power_norm(&self, d: i64) -> f64 {
        let a = d.unsigned_abs() as f64;
        if a == 0.0 {
            0.0
        } else if self.exponent == 1.0 {
            a
        } else {
            a.powf(self.exponent)
        }
    }

    /// Largest `k >= 0` with `|k|^exponent <= r`.
    fn power_radius(&self, r: f64) -> i64 {
        if r < 1.0 {
            return 0;
        }
        let mut k = r.powf(1.0 / self.exponent).floor() as i64;
        while self.power_norm(k + 1) <= r {
            k += 1;
        }
        while k > 0 && self.power_norm(k) > r {
            k -= 1;
        }
        k
    }

    pub fn header(&self) -> GroupHeader {
        match self.kind {
            GroupKind::Int => GroupHeader {
                group: "int".into(),
                scale: self.scale,
                exponent: self.exponent,
                n: None,
                rank: None,
            },
            GroupKind::Cyclic { n } => GroupHeader {
                group: "cyclic".into(),
                scale: self.scale,
                exponent: 1.0,
                n: Some(n),
                rank: None,
            },
            GroupKind::Lattice { rank } => GroupHeader {
                group: "lattice".into(),
                scale: self.scale,
                exponent: self.exponent,
                n: None,
                rank: Some(rank),
            },
        }
    }

    pub fn from_header(h: &GroupHeader) -> Result<Self> {
        match h.group.as_str() {
            "int" => Self::int(h.scale, h.exponent),
            "cyclic" => {
                let n = h.n.ok_or_else(|| Error::InvalidGroup("cyclic group needs \"n\"".into()))?;
                Self::cyclic(n, h.scale)
            }
            "lattice" => {
                let rank = h
                    .rank
                    .ok_or_else(|| Error::InvalidGroup("lattice group needs \"rank\"".into()))?;
                Self::lattice(rank, h.scale, h.exponent)
            }
            other => Err(Error::InvalidGroup(format!("unknown group \"{other}\""))),
        }
    }
}

impl NormedGroup for GroupSpec {
    type Elem = Coeff;

    fn zero(&self) -> Coeff {
        Coeff::ZERO
    }

    fn add(&self, a: Coeff, b: Coeff) -> Coeff {
        let mut out = Coeff::ZERO;
        for i in 0..self.rank() {
            out.0[i] = a.0[i] + b.0[i];
        }
        self.reduce(out)
    }

    fn neg(&self, a: Coeff) -> Coeff {
        let mut out = Coeff::ZERO;
        for i in 0..self.rank() {
            out.0[i] = -a.0[i];
        }
        self.reduce(out)
    }

    fn norm(&self, a: Coeff) -> f64 {
        match self.kind {
            GroupKind::Int => self.scale * self.power_norm(a.0[0]),
            GroupKind::Cyclic { n } => {
                let k = a.0[0].rem_euclid(n);
                self.scale * k.min(n - k) as f64
            }
            GroupKind::Lattice { rank } => {
                self.scale * a.0[..rank].iter().map(|&d| self.power_norm(d)).sum::<f64>()
            }
        }
    }

    fn alpha(&self) -> f64 {
        self.scale
    }

    fn ball(&self, radius: f64) -> Vec<Coeff> {
        if radius < 0.0 {
            return Vec::new();
        }
        let r = radius / self.scale;
        match self.kind {
            GroupKind::Int => {
                let k = self.power_radius(r);
                (-k..=k).map(Coeff::scalar).collect()
            }
            GroupKind::Cyclic { n } => (0..n)
                .map(Coeff::scalar)
                .filter(|&c| self.norm(c) <= radius)
                .collect(),
            GroupKind::Lattice { rank } => {
                let k = self.power_radius(r);
                let mut out = Vec::new();
                let mut cur = [0i64; MAX_RANK];
                fn rec(
                    g: &GroupSpec,
                    axis: usize,
                    rank: usize,
                    k: i64,
                    radius: f64,
                    cur: &mut [i64; MAX_RANK],
                    out: &mut Vec<Coeff>,
                ) {
                    if axis == rank {
                        let c = Coeff(*cur);
                        if g.norm(c) <= radius {
                            out.push(c);
                        }
                        return;
                    }
                    for v in -k..=k {
                        cur[axis] = v;
                        rec(g, axis + 1, rank, k, radius, cur, out);
                    }
                    cur[axis] = 0;
                }
                rec(self, 0, rank, k, radius, &mut cur, &mut out);
                out
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Coeff {
        let bound = if rng.random_bool(0.5) { 20 } else { 1000 };
        match self.kind {
            GroupKind::Int => Coeff::scalar(rng.random_range(-bound..=bound)),
            GroupKind::Cyclic { n } => Coeff::scalar(rng.random_range(0..n)),
            GroupKind::Lattice { rank } => {
                let mut c = Coeff::ZERO;
                for i in 0..rank {
                    c.0[i] = rng.random_range(-bound..=bound);
                }
                c
            }
        }
    }
}

/// Serialized group selection, shared by chain and field files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupHeader {
    pub group: String,
    pub scale: f64,
    #[serde(default = "one")]
    pub exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axiom {
    /// `|s| >= 0`, with equality exactly at zero.
    Definite,
    /// `|s| = |-s|`.
    Symmetric,
    /// `|s + t| <= |s| + |t|`.
    Triangle,
    /// `|s| >= alpha` for `s != 0`.
    Gap,
    /// `s` belongs to `ball(|s|)` and the ball holds nothing outside it.
    FiniteBall,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub axiom: Axiom,
    pub witness: String,
}

#[derive(Clone, Debug, Default)]
pub struct AxiomReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violated(&self, axiom: Axiom) -> bool {
        self.violations.iter().any(|v| v.axiom == axiom)
    }
}

const TRIANGLE_TOL: f64 = 1e-12;
const BALL_CHECK_RADIUS: f64 = 8.0;

/// Randomized check of the norm axioms, the gap and ball finiteness.
///
/// Only the first witness of each violated axiom is recorded.
pub fn check_group_axioms<G: NormedGroup, R: Rng + ?Sized>(
    g: &G,
    samples: usize,
    rng: &mut R,
) -> AxiomReport {
    let mut report = AxiomReport { samples, violations: Vec::new() };
    let record = |report: &mut AxiomReport, axiom: Axiom, witness: String| {
        if !report.violated(axiom) {
            report.violations.push(Violation { axiom, witness });
        }
    };

    let zero = g.zero();
    if g.norm(zero) != 0.0 {
        record(&mut report, Axiom::Definite, format!("{zero:?}"));
    }
    let alpha = g.alpha();
    if !(alpha > 0.0) {
        record(&mut report, Axiom::Gap, format!("alpha = {alpha}"));
    }

    for _ in 0..samples.max(1) {
        let a = g.sample(rng);
        let b = g.sample(rng);
        let (na, nb) = (g.norm(a), g.norm(b));

        for (s, ns) in [(a, na), (b, nb)] {
            let nonzero = !g.is_zero(s);
            if !(ns >= 0.0) || (nonzero && ns == 0.0) || (!nonzero && ns != 0.0) {
                record(&mut report, Axiom::Definite, format!("{s:?}"));
            }
            if nonzero && ns < alpha {
                record(&mut report, Axiom::Gap, format!("{s:?} (norm {ns} < alpha {alpha})"));
            }
            if g.norm(g.neg(s)) != ns {
                record(&mut report, Axiom::Symmetric, format!("{s:?}"));
            }
        }

        let nab = g.norm(g.add(a, b));
        if nab > na + nb + TRIANGLE_TOL * (1.0 + na + nb) {
            record(&mut report, Axiom::Triangle, format!("{a:?}, {b:?}"));
        }

        // Balls are only enumerated at small radii; large ones can be huge.
        let (s, ns) = if na <= nb { (a, na) } else { (b, nb) };
        if ns <= BALL_CHECK_RADIUS * alpha {
            let ball = g.ball(ns);
            if !ball.contains(&s) {
                record(&mut report, Axiom::FiniteBall, format!("{s:?} missing from ball({ns})"));
            }
            if let Some(bad) = ball.iter().find(|&&e| g.norm(e) > ns) {
                record(&mut report, Axiom::FiniteBall, format!("{bad:?} in ball({ns})"));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn int_group_norms() {
        let g = GroupSpec::int(1.0, 1.0).unwrap();
        assert_eq!(g.norm(3.into()), 3.0);
        let g = GroupSpec::int(1.0, 0.75).unwrap();
        assert!((g.norm(16.into()) - 8.0).abs() < 1e-12);
        let g = GroupSpec::int(2.0 * std::f64::consts::PI, 1.0).unwrap();
        assert_eq!(g.alpha(), 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GroupSpec::int(0.0, 1.0).is_err());
        assert!(GroupSpec::int(-1.0, 1.0).is_err());
        assert!(GroupSpec::int(1.0, 1.5).is_err());
        assert!(GroupSpec::int(1.0, 0.0).is_err());
        assert!(GroupSpec::cyclic(1, 1.0).is_err());
        assert!(GroupSpec::lattice(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sublinear_subadditivity_brute_force() {
        let g = GroupSpec::int(1.0, 0.75).unwrap();
        for a in -20..=20 {
            for b in -20..=20 {
                let lhs = g.norm(g.add(a.into(), b.into()));
                let rhs = g.norm(a.into()) + g.norm(b.into());
                assert!(lhs <= rhs + 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn cyclic_group_ops() {
        let g = GroupSpec::cyclic(4, 2.5).unwrap();
        assert_eq!(g.norm(3.into()), 2.5);
        let g2 = GroupSpec::cyclic(2, 1.0).unwrap();
        assert_eq!(g2.add(1.into(), 1.into()), Coeff::ZERO);
        let g5 = GroupSpec::cyclic(5, 1.0).unwrap();
        let mut ball: Vec<i64> = g5.ball(2.0).iter().map(|c| c.value()).collect();
        ball.sort();
        assert_eq!(ball, vec![0, 1, 2, 3, 4]);
        let mut ball1: Vec<i64> = g5.ball(1.0).iter().map(|c| c.value()).collect();
        ball1.sort();
        assert_eq!(ball1, vec![0, 1, 4]);
    }

    #[test]
    fn ball_matches_enumeration() {
        let groups = [
            GroupSpec::int(1.0, 1.0).unwrap(),
            GroupSpec::int(0.7, 0.75).unwrap(),
            GroupSpec::int(2.0, 0.5).unwrap(),
        ];
        for g in groups {
            for &radius in &[0.0, 0.5, 1.0, 2.2795, 7.3, 31.0, 100.0] {
                let ball: Vec<i64> = g.ball(radius).iter().map(|c| c.value()).collect();
                let brute: Vec<i64> =
                    (-3000..=3000).filter(|&d| g.norm(d.into()) <= radius).collect();
                assert_eq!(ball, brute, "{g:?} radius {radius}");
            }
        }
        let l = GroupSpec::lattice(2, 1.0, 1.0).unwrap();
        assert_eq!(l.ball(1.0).len(), 5);
        assert_eq!(l.ball(2.0).len(), 13);
    }

    #[test]
    fn shipped_groups_pass_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [
            GroupSpec::int(1.0, 1.0).unwrap(),
            GroupSpec::int(1.0, 0.75).unwrap(),
            GroupSpec::cyclic(4, 1.0).unwrap(),
            GroupSpec::cyclic(7, 0.3).unwrap(),
            GroupSpec::lattice(2, 1.0, 0.5).unwrap(),
        ] {
            let report = check_group_axioms(&g, 1000, &mut rng);
            assert!(report.passed(), "{g:?}: {:?}", report.violations);
        }
    }

    struct Broken;

    impl NormedGroup for Broken {
        type Elem = i64;
        fn zero(&self) -> i64 {
            0
        }
        fn add(&self, a: i64, b: i64) -> i64 {
            a + b
        }
        fn neg(&self, a: i64) -> i64 {
            -a
        }
        fn norm(&self, a: i64) -> f64 {
            if a == 2 {
                0.0
            } else {
                a.abs() as f64
            }
        }
        fn alpha(&self) -> f64 {
            1.0
        }
        fn ball(&self, r: f64) -> Vec<i64> {
            (-1000..=1000).filter(|&a| self.norm(a) <= r).collect()
        }
        fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
            rng.random_range(-20..=20)
        }
    }

    #[test]
    fn broken_norm_is_caught_with_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = check_group_axioms(&Broken, 1000, &mut rng);
        let v = report
            .violations
            .iter()
            .find(|v| v.axiom == Axiom::Definite)
            .expect("definiteness violation");
        assert_eq!(v.witness, "2");
    }

    #[test]
    fn header_round_trip() {
        for g in [
            GroupSpec::int(2.0, 0.75).unwrap(),
            GroupSpec::cyclic(5, 1.5).unwrap(),
            GroupSpec::lattice(3, 1.0, 1.0).unwrap(),
        ] {
            let json = serde_json::to_string(&g.header()).unwrap();
            let back: GroupHeader = serde_json::from_str(&json).unwrap();
            assert_eq!(GroupSpec::from_header(&back).unwrap(), g);
        }
    }
}
