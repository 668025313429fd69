//! Cubical grids `G(h, y)`, their skeletons, and the deformation operator.
//!
//! Cube `z` of the grid is `h*y + h*z + [-h/2, h/2]^n`; its center is
//! `h*y + h*z`. Vertices of the grid therefore sit at `h*y + h*(k + 1/2)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{Atom, BoxDomain, Chain, Point};
use crate::error::{Error, Result};
use crate::flat::{flat_norm, Mode};
use crate::stats::{loglog_slope, pool, sample_rng, Estimate};

/// Relative distance to the (n-1)-skeleton below which a point has no cube.
pub const SKELETON_TOL: f64 = 1e-9;

/// Retries for drawing a translation avoiding the skeleton.
pub const MAX_RETRIES: usize = 100;

/// Integer index of a cube.
pub type CubeIndex = Vec<i64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub h: f64,
    /// Translation in units of `h`, each component in `[0, 1)`.
    pub y: Vec<f64>,
    pub domain: BoxDomain,
}

impl Grid {
    pub fn new(h: f64, y: Vec<f64>, domain: BoxDomain) -> Result<Grid> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid size must be positive, got {h}")));
        }
        if y.len() != domain.dim() {
            return Err(Error::InvalidInput(format!(
                "offset has {} components, domain has dimension {}",
                y.len(),
                domain.dim()
            )));
        }
        if y.iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::InvalidInput(format!("offset {y:?} is outside [0, 1)^n")));
        }
        Ok(Grid { h, y, domain })
    }

    /// Grid with a uniformly random offset.
    pub fn random<R: Rng + ?Sized>(h: f64, domain: BoxDomain, rng: &mut R) -> Result<Grid> {
        let y = random_offset(domain.dim(), rng);
        Grid::new(h, y, domain)
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn skeleton_tol(&self) -> f64 {
        SKELETON_TOL * self.h
    }

    /// Position of `x` in cube units along `axis`, relative to the cube centers.
    fn coord(&self, x: f64, axis: usize) -> f64 {
        x / self.h - self.y[axis]
    }

    /// The cube containing `x`.
    pub fn cube_of(&self, x: &[f64]) -> Result<CubeIndex> {
        let tol = self.skeleton_tol();
        let mut z = Vec::with_capacity(x.len());
        for (axis, &xi) in x.iter().enumerate() {
            let t = self.coord(xi, axis);
            let k = t.round();
            if (0.5 - (t - k).abs()) * self.h <= tol {
                return Err(Error::OnSkeleton { point: x.to_vec(), tolerance: tol });
            }
            z.push(k as i64);
        }
        Ok(z)
    }

    /// Distance from `x` to the (n-1)-skeleton.
    pub fn skeleton_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(axis, &xi)| {
                let t = self.coord(xi, axis);
                (0.5 - (t - t.round()).abs()) * self.h
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self, z: &[i64]) -> Point {
        z.iter().enumerate().map(|(i, &k)| self.h * (self.y[i] + k as f64)).collect()
    }

    /// Closed cube `z` as a box.
    pub fn cube(&self, z: &[i64]) -> BoxDomain {
        let c = self.center(z);
        let half = self.h / 2.0;
        BoxDomain {
            lo: c.iter().map(|v| v - half).collect(),
            hi: c.iter().map(|v| v + half).collect(),
        }
    }

    /// Index range per axis of cubes meeting the open domain.
    pub fn cube_ranges(&self) -> Vec<(i64, i64)> {
        (0..self.dim())
            .map(|a| {
                let lo = self.coord(self.domain.lo[a], a);
                let hi = self.coord(self.domain.hi[a], a);
                ((lo - 0.5).floor() as i64 + 1, (hi + 0.5).ceil() as i64 - 1)
            })
            .collect()
    }

    /// All cubes meeting the domain, in lexicographic order.
    pub fn cubes(&self) -> Vec<CubeIndex> {
        let ranges = self.cube_ranges();
        let mut out = Vec::new();
        let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 > r.1) {
            return out;
        }
        loop {
            out.push(cur.clone());
            let mut axis = ranges.len();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if cur[axis] < ranges[axis].1 {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = ranges[axis].0;
            }
        }
    }
}

pub fn random_offset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Snaps every atom of `s` to the center of its cube and sums per cube.
///
/// The result is a chain on the domain of `s`; centers falling outside it
/// are dropped.
pub fn deform(s: &Chain, g: &Grid) -> Result<Chain> {
    let mut atoms = Vec::with_capacity(s.len());
    for a in s.atoms() {
        let z = g.cube_of(&a.x)?;
        atoms.push(Atom { x: g.center(&z), c: a.c });
    }
    Ok(Chain::new(s.domain().clone(), *s.group(), atoms))
}

/// Draws offsets until `ok` accepts the grid; after [`MAX_RETRIES`] draws
/// fails with `OnSkeleton`, reporting the last offset.
pub fn admissible_grid<R: Rng + ?Sized>(
    h: f64,
    domain: &BoxDomain,
    rng: &mut R,
    ok: impl Fn(&Grid) -> bool,
) -> Result<Grid> {
    let mut last = None;
    for _ in 0..MAX_RETRIES {
        let g = Grid::random(h, domain.clone(), rng)?;
        if ok(&g) {
            return Ok(g);
        }
        last = Some(g);
    }
    let g = last.expect("at least one attempt");
    Err(Error::OnSkeleton { point: g.y.clone(), tolerance: g.skeleton_tol() })
}

/// Uniform random grid keeping every point at least `margin` away from the
/// (n-1)-skeleton.
///
/// The condition splits into one condition per axis, so each coordinate of
/// the offset is drawn on its own.
pub fn grid_avoiding<R: Rng + ?Sized>(
    h: f64,
    domain: &BoxDomain,
    points: &[Point],
    margin: f64,
    rng: &mut R,
) -> Result<Grid> {
    let n = domain.dim();
    let mut y = vec![0.0; n];
    for (axis, ya) in y.iter_mut().enumerate() {
        let gap = |t: f64, x: f64| {
            let s = x / h - t;
            (0.5 - (s - s.round()).abs()) * h
        };
        let mut drawn = None;
        for _ in 0..MAX_RETRIES {
            let t: f64 = rng.random();
            if points.iter().all(|p| gap(t, p[axis]) >= margin) {
                drawn = Some(t);
                break;
            }
        }
        match drawn {
            Some(t) => *ya = t,
            None => {
                let point = points.first().cloned().unwrap_or_default();
                return Err(Error::OnSkeleton { point, tolerance: margin });
            }
        }
    }
    Grid::new(h, y, domain.clone())
}

/// Random grid for which [`deform`] is defined on `s`.
pub fn deform_random<R: Rng + ?Sized>(s: &Chain, h: f64, rng: &mut R) -> Result<(Grid, Chain)> {
    let g = admissible_grid(h, s.domain(), rng, |g| s.atoms().iter().all(|a| g.cube_of(&a.x).is_ok()))?;
    let p = deform(s, &g)?;
    Ok((g, p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub h: f64,
    pub estimate: Estimate,
    /// `mean / (h * M(S))`.
    pub ratio: f64,
    /// `(sqrt(n)/2) * h * M(S)`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub mass: f64,
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
}

/// Monte Carlo estimate of `E_y F(S - P(S, h, y))` for each `(h, samples)`.
pub fn deformation_scaling_test(s: &Chain, family: &[(f64, usize)], seed: u64) -> Result<ScalingReport> {
    let mass = s.mass();
    let n = s.dim() as f64;
    let mut rows = Vec::with_capacity(family.len());
    for (k, &(h, samples)) in family.iter().enumerate() {
        let values = pool().install(|| {
            (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = sample_rng(seed, k as u64, i as u64);
                    let (_, p) = deform_random(s, h, &mut rng)?;
                    Ok(flat_norm(&s.try_sub(&p)?, Mode::Flat).value)
                })
                .collect::<Result<Vec<f64>>>()
        })?;
        let estimate = Estimate::from_samples(&values);
        let ratio = if mass > 0.0 { estimate.mean / (h * mass) } else { 0.0 };
        rows.push(ScalingRow { h, estimate, ratio, bound: n.sqrt() / 2.0 * h * mass });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.estimate.mean).collect();
    Ok(ScalingReport { mass, slope: loglog_slope(&hs, &means), rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatSizeRow {
    pub h: f64,
    pub estimate: Estimate,
    /// Flat-size norm of `S` on the padded domain.
    pub reference: f64,
    pub ratio: f64,
    /// Fraction of samples with a nonzero deformation.
    pub nonzero_fraction: f64,
}

/// Monte Carlo estimate of `E_y FS(P(S, h, y))` against `FS(S)` on the padded domain.
///
/// `s` lives on the padded domain; `omega` is the domain of the grid.
pub fn deformation_flatsize_test(
    s: &Chain,
    omega: &BoxDomain,
    family: &[(f64, usize)],
    seed: u64,
) -> Result<Vec<FlatSizeRow>> {
    let reference = flat_norm(s, Mode::FlatSize).value;
    let mut rows = Vec::with_capacity(family.len());
    for (k, &(h, samples)) in family.iter().enumerate() {
        let values = pool().install(|| {
            (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = sample_rng(seed, k as u64, i as u64);
                    let g = admissible_grid(h, omega, &mut rng, |g| {
                        s.atoms().iter().all(|a| g.cube_of(&a.x).is_ok())
                    })?;
                    let p = deform_padded(s, &g)?;
                    let v = flat_norm(&p, Mode::FlatSize).value;
                    Ok((v, !p.is_empty()))
                })
                .collect::<Result<Vec<(f64, bool)>>>()
        })?;
        let vals: Vec<f64> = values.iter().map(|v| v.0).collect();
        let estimate = Estimate::from_samples(&vals);
        let nonzero = values.iter().filter(|v| v.1).count() as f64 / samples.max(1) as f64;
        let ratio = if reference > 0.0 { estimate.mean / reference } else { 0.0 };
        rows.push(FlatSizeRow { h, estimate, reference, ratio, nonzero_fraction: nonzero });
    }
    Ok(rows)
}

/// Deformation of a chain on a larger domain: only atoms in cubes meeting
/// the grid domain contribute, and the result lives on the grid domain.
pub fn deform_padded(s: &Chain, g: &Grid) -> Result<Chain> {
    let ranges = g.cube_ranges();
    let mut atoms = Vec::new();
    for a in s.atoms() {
        let z = g.cube_of(&a.x)?;
        if z.iter().zip(&ranges).all(|(k, r)| (r.0..=r.1).contains(k)) {
            atoms.push(Atom { x: g.center(&z), c: a.c });
        }
    }
    Ok(Chain::new(g.domain.clone(), *s.group(), atoms))
}

const GAUSS_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// One `j`-cell of a grid skeleton, clipped to a region, with quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonCell {
    /// Lowest vertex of the unclipped cell.
    pub anchor: Point,
    /// Axes spanned by the cell.
    pub axes: Vec<usize>,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

/// The `j`-cells of a grid meeting a region.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSample {
    pub j: usize,
    pub cells: Vec<SkeletonCell>,
}

fn subsets(n: usize, j: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == j)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect()
}

impl SkeletonSample {
    pub fn new(g: &Grid, j: usize, region: &BoxDomain) -> Result<SkeletonSample> {
        let n = g.dim();
        if j > n {
            return Err(Error::InvalidInput(format!("skeleton dimension {j} exceeds {n}")));
        }
        let h = g.h;
        // vertex k along an axis sits at h*y + h*(k + 1/2)
        let vertex = |a: usize, k: i64| h * (g.y[a] + k as f64 + 0.5);
        let mut cells = Vec::new();
        for axes in subsets(n, j) {
            let mut ranges = Vec::with_capacity(n);
            for a in 0..n {
                let lo = region.lo[a] / h - g.y[a] - 0.5;
                let hi = region.hi[a] / h - g.y[a] - 0.5;
                if axes.contains(&a) {
                    // [v, v + h] overlaps (lo, hi)
                    ranges.push(((lo - 1.0).floor() as i64 + 1, hi.ceil() as i64 - 1));
                } else {
                    ranges.push((lo.floor() as i64 + 1, hi.ceil() as i64 - 1));
                }
            }
            if ranges.iter().any(|r| r.0 > r.1) {
                continue;
            }
            let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                let anchor: Point = cur.iter().enumerate().map(|(a, &k)| vertex(a, k)).collect();
                if let Some(cell) = clip_cell(&anchor, &axes, h, region) {
                    cells.push(cell);
                }
                let mut axis = n;
                loop {
                    if axis == 0 {
                        break 'outer;
                    }
                    axis -= 1;
                    if cur[axis] < ranges[axis].1 {
                        cur[axis] += 1;
                        break;
                    }
                    cur[axis] = ranges[axis].0;
                }
            }
        }
        Ok(SkeletonSample { j, cells })
    }

    /// `sum over cells of the integral of f over the cell`.
    pub fn integrate(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
        self.cells
            .iter()
            .map(|c| c.nodes.iter().zip(&c.weights).map(|(x, w)| w * f(x)).sum::<f64>())
            .sum()
    }
}

fn clip_cell(anchor: &[f64], axes: &[usize], h: f64, region: &BoxDomain) -> Option<SkeletonCell> {
    let n = anchor.len();
    let mut intervals = Vec::with_capacity(axes.len());
    for a in 0..n {
        if axes.contains(&a) {
            let lo = anchor[a].max(region.lo[a]);
            let hi = (anchor[a] + h).min(region.hi[a]);
            if hi <= lo {
                return None;
            }
            intervals.push((a, lo, hi));
        } else if !(region.lo[a] < anchor[a] && anchor[a] < region.hi[a]) {
            return None;
        }
    }
    let mut nodes = vec![anchor.to_vec()];
    let mut weights = vec![1.0];
    for &(a, lo, hi) in &intervals {
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        let mut nn = Vec::with_capacity(nodes.len() * 3);
        let mut ww = Vec::with_capacity(nodes.len() * 3);
        for (x, w) in nodes.iter().zip(&weights) {
            for (t, gw) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                let mut p = x.clone();
                p[a] = mid + half * t;
                nn.push(p);
                ww.push(w * gw * half);
            }
        }
        nodes = nn;
        weights = ww;
    }
    Some(SkeletonCell { anchor: anchor.to_vec(), axes: axes.to_vec(), nodes, weights })
}

/// Integral of `f` over a box by composite 3-point Gauss rules.
pub fn box_integral(region: &BoxDomain, f: &(dyn Fn(&[f64]) -> f64 + Sync), pieces: usize) -> f64 {
    let n = region.dim();
    let mut nodes = vec![vec![0.0; n]];
    let mut weights = vec![1.0];
    for a in 0..n {
        let step = (region.hi[a] - region.lo[a]) / pieces as f64;
        let mut nn = Vec::new();
        let mut ww = Vec::new();
        for (x, w) in nodes.iter().zip(&weights) {
            for k in 0..pieces {
                let mid = region.lo[a] + step * (k as f64 + 0.5);
                for (t, gw) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                    let mut p = x.clone();
                    p[a] = mid + step / 2.0 * t;
                    nn.push(p);
                    ww.push(w * gw * step / 2.0);
                }
            }
        }
        nodes = nn;
        weights = ww;
    }
    nodes.iter().zip(&weights).map(|(x, w)| w * f(x)).sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonReport {
    pub j: usize,
    pub h: f64,
    pub estimate: Estimate,
    /// `binom(n, j) * integral of f over the region`.
    pub target: f64,
    pub rel_error: f64,
    /// `|mean - target| / std_err`; zero when both vanish.
    pub sigmas: f64,
}

/// Averages `h^(n-j) * (integral of f over the j-skeleton within region)` over offsets.
pub fn skeleton_average_test(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    region: &BoxDomain,
    j: usize,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<SkeletonReport> {
    let n = region.dim();
    let values = pool().install(|| {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = sample_rng(seed, j as u64, i as u64);
                let g = Grid::random(h, region.clone(), &mut rng)?;
                let sk = SkeletonSample::new(&g, j, region)?;
                Ok(h.powi((n - j) as i32) * sk.integrate(f))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let estimate = Estimate::from_samples(&values);
    let target = binomial(n, j) * box_integral(region, f, 16);
    let diff = (estimate.mean - target).abs();
    let rel_error = if target != 0.0 { diff / target.abs() } else { diff };
    // differences at rounding level count as agreement even when every
    // sample is (almost) the same
    let sigmas = if diff <= 1e-9 * (1.0 + target.abs()) {
        0.0
    } else if estimate.std_err > 0.0 {
        diff / estimate.std_err
    } else {
        f64::INFINITY
    };
    Ok(SkeletonReport { j, h, estimate, target, rel_error, sigmas })
}
