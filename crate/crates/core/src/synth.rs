//! Fields with known singular chains.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chain::{dist, Atom, BoxDomain, Chain, Point};
use crate::error::{Error, Result};
use crate::field::{normalize, Field, LatticeBox, Target};
use crate::group::GroupSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub x: Point,
    pub charge: i64,
}

/// Point defects of a field, with the analysis scale they must resolve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub target: Target,
    pub domain: BoxDomain,
    pub defects: Vec<Defect>,
    /// Largest grid size the field is generated for.
    pub h: f64,
    /// Value far from the defects; defaults to the north pole.
    #[serde(default)]
    pub background: Option<Vec<f64>>,
    /// Norm scale of the integer coefficient group of the ground truth.
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

/// Margin by which generated lattices extend the domain.
pub fn padding(n: usize, h: f64) -> f64 {
    2.0 * (n as f64).sqrt() * h
}

impl DefectSpec {
    pub fn new(target: Target, domain: BoxDomain, defects: Vec<Defect>, h: f64) -> DefectSpec {
        DefectSpec { target, domain, defects, h, background: None, scale: 1.0 }
    }

    pub fn group(&self) -> Result<GroupSpec> {
        GroupSpec::int(self.scale, 1.0)
    }

    fn background(&self) -> Result<Vec<f64>> {
        background(self.target, self.background.as_deref())
    }

    /// Checks placement and the `4h` separation.
    pub fn validate(&self) -> Result<()> {
        let n = self.domain.dim();
        if n != self.target.components() {
            return Err(Error::InvalidInput(format!(
                "{} defects need a {}-dimensional domain",
                self.target,
                self.target.components()
            )));
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidInput(format!("analysis size must be positive, got {}", self.h)));
        }
        for d in &self.defects {
            if !self.domain.contains_open(&d.x) {
                return Err(Error::InvalidInput(format!("defect {:?} is outside the domain", d.x)));
            }
        }
        let min_sep = 4.0 * self.h;
        for (i, a) in self.defects.iter().enumerate() {
            for b in &self.defects[i + 1..] {
                if dist(&a.x, &b.x) < min_sep {
                    return Err(Error::DefectTooClose {
                        a: a.x.clone(),
                        b: b.x.clone(),
                        min_separation: min_sep,
                    });
                }
            }
        }
        Ok(())
    }

    /// `sum_j d_j [a_j]`.
    pub fn truth(&self) -> Result<Chain> {
        let atoms = self.defects.iter().map(|d| Atom::new(d.x.clone(), d.charge)).collect();
        Ok(Chain::new(self.domain.clone(), self.group()?, atoms))
    }

    /// Union of two specs on the same domain.
    pub fn merged(&self, other: &DefectSpec) -> DefectSpec {
        let mut out = self.clone();
        out.defects.extend(other.defects.iter().cloned());
        out
    }
}

fn background(target: Target, z0: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut z = z0.map(|z| z.to_vec()).unwrap_or_else(|| target.north());
    if z.len() != target.components() || normalize(&mut z) == 0.0 {
        return Err(Error::InvalidInput(format!("background {z:?} is not a point of {target}")));
    }
    Ok(z)
}

/// Rotation of the plane taking `(1, 0)` to `z0`, applied to the angle `th`.
fn s1_value(z0: &[f64], th: f64, out: &mut [f64]) {
    let (c, s) = (th.cos(), th.sin());
    out[0] = z0[0] * c - z0[1] * s;
    out[1] = z0[0] * s + z0[1] * c;
}

/// A rotation taking `e3` to `z0`.
fn rotation_to(z0: &[f64]) -> [[f64; 3]; 3] {
    let (x, y, z) = (z0[0], z0[1], z0[2]);
    if z < -1.0 + 1e-12 {
        return [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
    }
    // Rodrigues for the axis e3 x z0
    let k = 1.0 / (1.0 + z);
    [
        [1.0 - x * x * k, -x * y * k, x],
        [-x * y * k, 1.0 - y * y * k, y],
        [-x, -y, z],
    ]
}

fn apply(r: &[[f64; 3]; 3], v: &[f64; 3], out: &mut [f64]) {
    for i in 0..3 {
        out[i] = r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2];
    }
}

/// `u = z0 * prod_j ((x - a_j) / |x - a_j|)^(d_j)` in complex notation.
pub fn vortex_field(spec: &DefectSpec, spacing: f64) -> Result<(Field, Chain)> {
    if spec.target != Target::S1 {
        return Err(Error::InvalidInput("vortex fields take values in S1".into()));
    }
    spec.validate()?;
    let z0 = spec.background()?;
    let defects = spec.defects.clone();
    let field = Field::from_fn(&spec.domain, Target::S1, spacing, padding(2, spec.h), |x, v| {
        let th: f64 =
            defects.iter().map(|d| d.charge as f64 * (x[1] - d.x[1]).atan2(x[0] - d.x[0])).sum();
        s1_value(&z0, th, v);
    })?;
    Ok((field, spec.truth()?))
}

/// Smooth interpolant of defect heights over the horizontal plane.
struct HeightMap {
    centers: Vec<[f64; 2]>,
    weights: Vec<f64>,
    mean: f64,
    width2: f64,
}

impl HeightMap {
    fn new(centers: Vec<[f64; 2]>, heights: &[f64], width: f64) -> HeightMap {
        let m = centers.len();
        let mean = heights.iter().sum::<f64>() / m.max(1) as f64;
        let width2 = width * width;
        let kernel = |a: &[f64; 2], b: &[f64; 2]| {
            (-((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)) / width2).exp()
        };
        // Gaussian elimination on the (symmetric positive definite) kernel matrix
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = (0..m).map(|j| kernel(&centers[i], &centers[j])).collect();
                row.push(heights[i] - mean);
                row
            })
            .collect();
        for col in 0..m {
            let piv = a[col][col];
            for r in col + 1..m {
                let f = a[r][col] / piv;
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
        let mut weights = vec![0.0; m];
        for r in (0..m).rev() {
            let s: f64 = (r + 1..m).map(|c| a[r][c] * weights[c]).sum();
            weights[r] = (a[r][m] - s) / a[r][r];
        }
        HeightMap { centers, weights, mean, width2 }
    }

    fn at(&self, p: [f64; 2]) -> f64 {
        self.mean
            + self
                .centers
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w * (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / self.width2).exp())
                .sum::<f64>()
    }
}

/// Vertical axis for a hedgehog configuration and the horizontal separation it achieves.
fn vertical_axis(defects: &[Defect]) -> (usize, f64, Option<(usize, usize)>) {
    let mut best = (2, -1.0, None);
    for v in [2, 0, 1] {
        let (p, q) = ((v + 1) % 3, (v + 2) % 3);
        let mut sep = f64::INFINITY;
        let mut pair = None;
        for i in 0..defects.len() {
            for j in i + 1..defects.len() {
                let (a, b) = (&defects[i].x, &defects[j].x);
                let d = ((a[p] - b[p]).powi(2) + (a[q] - b[q]).powi(2)).sqrt();
                if d < sep {
                    sep = d;
                    pair = Some((i, j));
                }
            }
        }
        if sep > best.1 {
            best = (v, sep, pair);
        }
    }
    best
}

/// Unit-charge hedgehogs in three dimensions.
///
/// Radial hedgehogs glued naively acquire extra zeros, so the field is
/// built as `w = (Re Q, Im Q, (x_v - phi) / rho)` with
/// `Q = prod_j g_j`, `g_j = (z - a_j) / sqrt(|z - a_j|^2 + rho^2)`
/// (conjugated for charge -1), `z` the horizontal coordinates and `phi` a
/// smooth interpolant of the defect heights. `w` vanishes exactly at the
/// defects, with the prescribed local degree. The vertical axis is the one
/// that best separates the defects horizontally.
pub fn hedgehog_field(spec: &DefectSpec, spacing: f64) -> Result<(Field, Chain)> {
    if spec.target != Target::S2 {
        return Err(Error::InvalidInput("hedgehog fields take values in S2".into()));
    }
    spec.validate()?;
    if let Some(d) = spec.defects.iter().find(|d| d.charge.abs() != 1) {
        return Err(Error::InvalidInput(format!(
            "hedgehog charges must be +1 or -1, got {}; cluster unit defects instead",
            d.charge
        )));
    }
    let rho = spec.h;
    let (v, sep, pair) = vertical_axis(&spec.defects);
    if let Some((i, j)) = pair {
        if sep < 2.0 * rho {
            return Err(Error::DefectTooClose {
                a: spec.defects[i].x.clone(),
                b: spec.defects[j].x.clone(),
                min_separation: 2.0 * rho,
            });
        }
    }
    let (p, q) = ((v + 1) % 3, (v + 2) % 3);
    let centers: Vec<[f64; 2]> = spec.defects.iter().map(|d| [d.x[p], d.x[q]]).collect();
    let heights: Vec<f64> = spec.defects.iter().map(|d| d.x[v]).collect();
    let width = if sep.is_finite() { sep } else { spec.domain.diam() };
    let phi = HeightMap::new(centers.clone(), &heights, width);
    let charges: Vec<i64> = spec.defects.iter().map(|d| d.charge).collect();
    let rot = rotation_to(&spec.background()?);
    let field = Field::from_fn(&spec.domain, Target::S2, spacing, padding(3, spec.h), |x, out| {
        let (mut re, mut im) = (1.0, 0.0);
        for (c, &s) in centers.iter().zip(&charges) {
            let (dx, dy) = (x[p] - c[0], x[q] - c[1]);
            let r = (dx * dx + dy * dy + rho * rho).sqrt();
            let (gr, gi) = (dx / r, s as f64 * dy / r);
            (re, im) = (re * gr - im * gi, re * gi + im * gr);
        }
        let w = [re, im, (x[v] - phi.at([x[p], x[q]])) / rho];
        apply(&rot, &w, out);
    })?;
    Ok((field, spec.truth()?))
}

/// A straight dipole of charge `sigma` from `a` to `b` inside a lens-shaped tube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleSpec {
    pub target: Target,
    pub domain: BoxDomain,
    pub a: Point,
    pub b: Point,
    pub sigma: i64,
    /// Half-width of the tube at the middle of the segment.
    pub radius: f64,
    /// Largest grid size the field is generated for.
    pub h: f64,
    #[serde(default)]
    pub background: Option<Vec<f64>>,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

/// Odd profile: zero up to `w0`, rising smoothly to `pi` at `pi`.
fn profile(w: f64, w0: f64) -> f64 {
    let t = ((w.abs() - w0) / (PI - w0)).clamp(0.0, 1.0);
    w.signum() * PI * t * t * (3.0 - 2.0 * t)
}

/// Field equal to the background outside a tube around `[a, b]`, whose
/// transversal slices carry a degree `sigma` bubble; the singular chain is
/// `sigma ([b] - [a])`.
///
/// The tube is the set of points seeing the segment under an angle above
/// `w0`, a lens of half-width `radius`; the map is a function of that angle
/// (and, in three dimensions, of the azimuth around the segment).
pub fn dipole_cylinder_field(spec: &DipoleSpec, spacing: f64) -> Result<(Field, Chain)> {
    let n = spec.domain.dim();
    if n != spec.target.components() || spec.a.len() != n || spec.b.len() != n {
        return Err(Error::InvalidInput("dimensions of target, domain and segment differ".into()));
    }
    if spec.radius < 8.0 * spacing {
        return Err(Error::TubeTooThin { radius: spec.radius, spacing });
    }
    let inside = |p: &[f64]| spec.domain.contains_open(p) && spec.domain.dist_to_boundary(p) > spec.radius;
    if !inside(&spec.a) || !inside(&spec.b) {
        return Err(Error::TubeOutsideDomain { radius: spec.radius });
    }
    let len = dist(&spec.a, &spec.b);
    if len == 0.0 {
        return Err(Error::InvalidInput("dipole endpoints coincide".into()));
    }
    let z0 = background(spec.target, spec.background.as_deref())?;
    let group = GroupSpec::int(spec.scale, 1.0)?;
    let pad = padding(n, spec.h);
    let w0 = 2.0 * (len / (2.0 * spec.radius)).atan();
    let sigma = spec.sigma as f64;
    let (a, b) = (spec.a.clone(), spec.b.clone());
    let field = match spec.target {
        Target::S1 => Field::from_fn(&spec.domain, Target::S1, spacing, pad, |x, v| {
            let (p0, p1) = (a[0] - x[0], a[1] - x[1]);
            let (q0, q1) = (b[0] - x[0], b[1] - x[1]);
            let w = (p0 * q1 - p1 * q0).atan2(p0 * q0 + p1 * q1);
            s1_value(&z0, sigma * profile(w, w0), v);
        })?,
        Target::S2 => {
            let e: Vec<f64> = (0..3).map(|i| (b[i] - a[i]) / len).collect();
            // (e1, e2, e) is a right-handed frame
            let mut e1 = if e[0].abs() < 0.9 { vec![1.0, 0.0, 0.0] } else { vec![0.0, 1.0, 0.0] };
            let de: f64 = (0..3).map(|i| e1[i] * e[i]).sum();
            (0..3).for_each(|i| e1[i] -= de * e[i]);
            normalize(&mut e1);
            let e2 = vec![
                e[1] * e1[2] - e[2] * e1[1],
                e[2] * e1[0] - e[0] * e1[2],
                e[0] * e1[1] - e[1] * e1[0],
            ];
            let rot = rotation_to(&z0);
            Field::from_fn(&spec.domain, Target::S2, spacing, pad, |x, v| {
                let p: Vec<f64> = (0..3).map(|i| a[i] - x[i]).collect();
                let q: Vec<f64> = (0..3).map(|i| b[i] - x[i]).collect();
                let cr = [
                    p[1] * q[2] - p[2] * q[1],
                    p[2] * q[0] - p[0] * q[2],
                    p[0] * q[1] - p[1] * q[0],
                ];
                let cross = (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
                let w = cross.atan2(p[0] * q[0] + p[1] * q[1] + p[2] * q[2]);
                let theta = profile(w, w0);
                let r: Vec<f64> = (0..3).map(|i| x[i] - a[i]).collect();
                let omega = (0..3).map(|i| r[i] * e2[i]).sum::<f64>().atan2((0..3).map(|i| r[i] * e1[i]).sum());
                let s = [
                    theta.sin() * (sigma * omega).cos(),
                    theta.sin() * (sigma * omega).sin(),
                    theta.cos(),
                ];
                apply(&rot, &s, v);
            })?
        }
    };
    let atoms = if spec.sigma == 0 {
        Vec::new()
    } else {
        vec![Atom::new(b, spec.sigma), Atom::new(a, -spec.sigma)]
    };
    Ok((field, Chain::new(spec.domain.clone(), group, atoms)))
}

/// Result of [`homogeneous_extension`].
#[derive(Clone, Debug, PartialEq)]
pub struct Extension {
    pub field: Field,
    /// Lattice vertex at the center of the box, where the extension is singular.
    pub singular: Vec<usize>,
}

/// Replaces the interior of a lattice box by the 0-homogeneous extension of
/// its boundary values: `u(x) = u(c + (x - c) / |x - c|_K)`, with
/// `|.|_K` the sup norm scaled to the box.
pub fn homogeneous_extension(u: &Field, b: &LatticeBox, center_value: Option<&[f64]>) -> Result<Extension> {
    let n = u.dim();
    if b.dim() != n || !b.is_proper() || (0..n).any(|a| b.hi[a] >= u.shape[a]) {
        return Err(Error::InvalidInput(format!("box {b:?} does not fit the lattice")));
    }
    if (0..n).any(|a| (b.hi[a] - b.lo[a]) % 2 != 0) {
        return Err(Error::InvalidInput("box sides must span an even number of spacings".into()));
    }
    check_boundary(u, b)?;
    let z0 = background(u.target, center_value)?;
    let m = u.target.components();
    let center: Vec<usize> = (0..n).map(|a| (b.lo[a] + b.hi[a]) / 2).collect();
    let half: Vec<f64> = (0..n).map(|a| (b.hi[a] - b.lo[a]) as f64 / 2.0).collect();
    let mut out = u.clone();
    let mut idx = b.lo.clone();
    loop {
        let interior = (0..n).all(|a| b.lo[a] < idx[a] && idx[a] < b.hi[a]);
        if interior {
            let o: Vec<f64> = (0..n).map(|a| (idx[a] as f64 - center[a] as f64) / half[a]).collect();
            let t = o.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if t == 0.0 {
                out.at_mut(&idx).copy_from_slice(&z0);
            } else {
                let q: Vec<f64> = (0..n).map(|a| center[a] as f64 + o[a] / t * half[a]).collect();
                let mut v = interpolate(u, &q, m);
                if normalize(&mut v) < 1e-9 {
                    return Err(Error::DegenerateBoundary(format!(
                        "interpolated boundary value vanishes at {q:?}"
                    )));
                }
                out.at_mut(&idx).copy_from_slice(&v);
            }
        }
        let mut a = n;
        loop {
            if a == 0 {
                return Ok(Extension { field: out, singular: center });
            }
            a -= 1;
            if idx[a] < b.hi[a] {
                idx[a] += 1;
                break;
            }
            idx[a] = b.lo[a];
        }
    }
}

/// Multilinear interpolation of lattice samples at a fractional index.
fn interpolate(u: &Field, q: &[f64], m: usize) -> Vec<f64> {
    let n = q.len();
    let base: Vec<usize> = q.iter().map(|v| v.floor() as usize).collect();
    let frac: Vec<f64> = q.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
    let mut out = vec![0.0; m];
    for corner in 0..1usize << n {
        let mut w = 1.0;
        let mut idx = base.clone();
        for a in 0..n {
            if corner >> a & 1 == 1 {
                w *= frac[a];
                idx[a] += 1;
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(u.at(&idx)) {
            *o += w * x;
        }
    }
    out
}

fn check_boundary(u: &Field, b: &LatticeBox) -> Result<()> {
    let n = u.dim();
    let on_boundary = |idx: &[usize]| (0..n).any(|a| idx[a] == b.lo[a] || idx[a] == b.hi[a]);
    let mut idx = b.lo.clone();
    loop {
        if on_boundary(&idx) {
            for a in 0..n {
                if idx[a] < b.hi[a] {
                    let mut nb = idx.clone();
                    nb[a] += 1;
                    if on_boundary(&nb) {
                        let d: f64 = u.at(&idx).iter().zip(u.at(&nb)).map(|(x, y)| x * y).sum();
                        if d <= -1.0 + 1e-6 {
                            return Err(Error::DegenerateBoundary(format!(
                                "antipodal samples at {idx:?} and {nb:?}"
                            )));
                        }
                    }
                }
            }
        }
        let mut a = n;
        loop {
            if a == 0 {
                return Ok(());
            }
            a -= 1;
            if idx[a] < b.hi[a] {
                idx[a] += 1;
                break;
            }
            idx[a] = b.lo[a];
        }
    }
}

/// Adds seeded Gaussian noise of size `epsilon` to every component and
/// projects back to the sphere.
pub fn perturb(u: &Field, epsilon: f64, seed: u64) -> Field {
    if epsilon == 0.0 {
        return u.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = u.target.components();
    let mut out = u.clone();
    for v in out.values.chunks_mut(m) {
        for x in v.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *x += epsilon * g;
        }
        normalize(v);
    }
    out
}

fn place<R: Rng + ?Sized>(
    domain: &BoxDomain,
    count: usize,
    min_sep: f64,
    margin: f64,
    rng: &mut R,
) -> Option<Vec<Point>> {
    let inner = BoxDomain::new(
        domain.lo.iter().map(|v| v + margin).collect(),
        domain.hi.iter().map(|v| v - margin).collect(),
    )
    .ok()?;
    let mut pts: Vec<Point> = Vec::with_capacity(count);
    for _ in 0..10_000 {
        if pts.len() == count {
            break;
        }
        let x: Point =
            (0..inner.dim()).map(|a| rng.random_range(inner.lo[a]..inner.hi[a])).collect();
        if pts.iter().all(|p| dist(p, &x) >= min_sep) {
            pts.push(x);
        }
    }
    (pts.len() == count).then_some(pts)
}

/// Seeded vortex specs: 1 to `max_defects` defects with charges in
/// `[-3, 3] \ {0}`, pairwise at least `4h` apart.
pub fn vortex_corpus(domain: &BoxDomain, h: f64, count: usize, max_defects: usize, seed: u64) -> Vec<DefectSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let k = rng.random_range(1..=max_defects.max(1));
        let Some(pts) = place(domain, k, 4.0 * h, h, &mut rng) else { continue };
        let defects = pts
            .into_iter()
            .map(|x| {
                let c = rng.random_range(1..=3) * if rng.random_bool(0.5) { 1 } else { -1 };
                Defect { x, charge: c }
            })
            .collect();
        out.push(DefectSpec::new(Target::S1, domain.clone(), defects, h));
    }
    out
}

/// Seeded hedgehog specs with 1 to `max_defects` unit charges.
pub fn hedgehog_corpus(domain: &BoxDomain, h: f64, count: usize, max_defects: usize, seed: u64) -> Vec<DefectSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let k = rng.random_range(1..=max_defects.max(1));
        let Some(pts) = place(domain, k, 4.0 * h, h, &mut rng) else { continue };
        let defects: Vec<Defect> = pts
            .into_iter()
            .map(|x| Defect { x, charge: if rng.random_bool(0.5) { 1 } else { -1 } })
            .collect();
        if vertical_axis(&defects).1 < 2.0 * h {
            continue;
        }
        out.push(DefectSpec::new(Target::S2, domain.clone(), defects, h));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{box_degree, box_winding, extract_sgrid, sphere_degree};
    use crate::grid::{deform, Grid};

    fn vortex_spec(defects: Vec<(Vec<f64>, i64)>) -> DefectSpec {
        DefectSpec::new(
            Target::S1,
            BoxDomain::unit(2),
            defects.into_iter().map(|(x, charge)| Defect { x, charge }).collect(),
            0.1,
        )
    }

    #[test]
    fn single_vortex_closes_with_detector() {
        let spec = vortex_spec(vec![(vec![0.5, 0.5], 1)]);
        let (u, truth) = vortex_field(&spec, 0.1 / 16.0).unwrap();
        let g = Grid::new(0.1, vec![0.3, 0.6], BoxDomain::unit(2)).unwrap();
        let s = extract_sgrid(&u, &g, 1).unwrap();
        assert_eq!(s.chain, deform(&truth, &g).unwrap());
        assert_eq!(s.chain.len(), 1);
    }

    #[test]
    fn double_vortex_winds_twice() {
        let spec = vortex_spec(vec![(vec![0.52, 0.47], 2)]);
        let (u, _) = vortex_field(&spec, 0.01).unwrap();
        let b = LatticeBox { lo: vec![40, 40], hi: vec![90, 90] };
        assert_eq!(box_winding(&u, &b).unwrap(), 2);
    }

    #[test]
    fn empty_spec_is_constant() {
        let spec = vortex_spec(vec![]);
        let (u, truth) = vortex_field(&spec, 0.05).unwrap();
        assert!(truth.is_empty());
        assert!(u.values.chunks(2).all(|v| v == [1.0, 0.0]));
    }

    #[test]
    fn close_defects_are_rejected() {
        let spec = vortex_spec(vec![(vec![0.3, 0.5], 1), (vec![0.6, 0.5], -1)]);
        assert!(matches!(vortex_field(&spec, 0.01), Err(Error::DefectTooClose { .. })));
    }

    fn hedgehog_spec(defects: Vec<(Vec<f64>, i64)>) -> DefectSpec {
        DefectSpec::new(
            Target::S2,
            BoxDomain::unit(3),
            defects.into_iter().map(|(x, charge)| Defect { x, charge }).collect(),
            0.1,
        )
    }

    #[test]
    fn hedgehog_degrees() {
        let spec = hedgehog_spec(vec![(vec![0.3, 0.31, 0.4], 1), (vec![0.72, 0.66, 0.55], -1)]);
        let (u, truth) = hedgehog_field(&spec, 1.0 / 64.0).unwrap();
        assert!(truth.augmentation().is_zero());
        // lattice index of x is (x + pad) / spacing
        let idx = |x: f64| ((x - u.origin[0]) / u.spacing).round() as usize;
        let around = |c: [f64; 3]| LatticeBox {
            lo: c.iter().map(|v| idx(v - 0.1)).collect(),
            hi: c.iter().map(|v| idx(v + 0.1)).collect(),
        };
        assert_eq!(box_degree(&u, &around([0.3, 0.31, 0.4])).unwrap(), 1);
        assert_eq!(box_degree(&u, &around([0.72, 0.66, 0.55])).unwrap(), -1);
        let all = LatticeBox { lo: vec![idx(0.05); 3], hi: vec![idx(0.95); 3] };
        let (d, raw) = sphere_degree(&u, &all).unwrap();
        assert_eq!(d, 0);
        assert!(raw.abs() < 1e-6);
    }

    #[test]
    fn dipole_signs() {
        let spec = DipoleSpec {
            target: Target::S1,
            domain: BoxDomain::unit(2),
            a: vec![0.35, 0.5],
            b: vec![0.65, 0.5],
            sigma: 1,
            radius: 0.1,
            h: 0.1,
            background: None,
            scale: 1.0,
        };
        let (u, truth) = dipole_cylinder_field(&spec, 0.1 / 16.0).unwrap();
        let g = Grid::new(0.1, vec![0.3, 0.45], BoxDomain::unit(2)).unwrap();
        assert_eq!(extract_sgrid(&u, &g, 1).unwrap().chain, deform(&truth, &g).unwrap());

        let spec3 = DipoleSpec {
            target: Target::S2,
            domain: BoxDomain::unit(3),
            a: vec![0.3, 0.5, 0.5],
            b: vec![0.7, 0.55, 0.5],
            sigma: 1,
            radius: 0.15,
            h: 0.2,
            background: Some(vec![0.0, 1.0, 0.0]),
            scale: 1.0,
        };
        let (u, truth) = dipole_cylinder_field(&spec3, 0.2 / 16.0).unwrap();
        let g = Grid::new(0.2, vec![0.3, 0.35, 0.45], BoxDomain::unit(3)).unwrap();
        let s = extract_sgrid(&u, &g, 2).unwrap();
        assert_eq!(s.chain, deform(&truth, &g).unwrap());
        assert_eq!(s.chain.len(), 2);
    }

    #[test]
    fn dipole_parameter_checks() {
        let mut spec = DipoleSpec {
            target: Target::S1,
            domain: BoxDomain::unit(2),
            a: vec![0.35, 0.5],
            b: vec![0.65, 0.5],
            sigma: 0,
            radius: 0.1,
            h: 0.1,
            background: None,
            scale: 1.0,
        };
        let (_, truth) = dipole_cylinder_field(&spec, 0.01).unwrap();
        assert!(truth.is_empty());
        assert!(matches!(dipole_cylinder_field(&spec, 0.05), Err(Error::TubeTooThin { .. })));
        spec.radius = 0.4;
        assert!(matches!(dipole_cylinder_field(&spec, 0.01), Err(Error::TubeOutsideDomain { .. })));
    }

    #[test]
    fn homogeneous_extension_charges() {
        for d in [1i64, -2] {
            let spec = vortex_spec(vec![(vec![0.5, 0.5], d)]);
            let (u, _) = vortex_field(&spec, 0.01).unwrap();
                        let b = LatticeBox { lo: vec![58, 60], hi: vec![98, 96] };
            let ext = homogeneous_extension(&u, &b, None).unwrap();
            let c = ext.field.position(&ext.singular);
            // c sits at 0.2h from the center of its cube
            let y = vec![(c[0] / 0.1).rem_euclid(1.0), (c[1] / 0.1 - 0.2).rem_euclid(1.0)];
            let g = Grid::new(0.1, y, BoxDomain::unit(2)).unwrap();
            let s = extract_sgrid(&ext.field, &g, 1).unwrap();
            let z = g.cube_of(&c).unwrap();
            assert_eq!(s.chain.len(), 1, "{:?}", s.chain);
            let center: Vec<f64> = g.center(&z).into_iter().map(crate::chain::snap).collect();
            assert_eq!(s.chain.atoms()[0].x, center);
            assert_eq!(s.chain.atoms()[0].c.value(), d);
        }
        let u = Field::from_fn(&BoxDomain::unit(2), Target::S1, 0.05, 0.0, |_, v| {
            v.copy_from_slice(&[0.0, 1.0])
        })
        .unwrap();
        let ext = homogeneous_extension(&u, &LatticeBox { lo: vec![2, 2], hi: vec![10, 10] }, Some(&[0.0, 1.0])).unwrap();
        assert_eq!(ext.field, u);
    }

    #[test]
    fn perturbation_is_reproducible() {
        let spec = vortex_spec(vec![(vec![0.5, 0.5], 1)]);
        let (u, _) = vortex_field(&spec, 0.02).unwrap();
        assert_eq!(perturb(&u, 0.0, 1), u);
        let a = perturb(&u, 1e-3, 5);
        let b = perturb(&u, 1e-3, 5);
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, u.values);
    }
}
