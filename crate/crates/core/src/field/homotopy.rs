//! Upper bounds for the norm `|d|` of a homotopy class: the least
//! `p`-energy of a map on the unit `p`-ball that is constant on the boundary
//! and has winding number / degree `d`.
//!
//! For `S^1` the competitors are angle functions on `[-1, 1]` rising by
//! `2 pi d`. For `S^2` they are equivariant maps
//! `(sin f cos d phi, sin f sin d phi, cos f)`; in logarithmic radius
//! `t = log r` the energy becomes `2 pi * int (f_t^2 + d^2 sin^2 f) dt`,
//! truncated to `t` in `[-T, 0]` with `f(-T) = pi`, `f(0) = 0`.
//!
//! Each level halves the mesh, starts from the previous minimizer (which has
//! the same energy on the finer mesh) and only accepts decreasing steps, so
//! the reported values never increase with refinement.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Target;
use crate::stats::sample_rng;

const S1_ELEMENTS: usize = 8;
const S2_ELEMENTS: usize = 16;
const S2_LENGTH: f64 = 8.0;
const MAX_STEPS: usize = 4000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub target: Target,
    pub d: i64,
    /// Best energy at each refinement level, coarsest first.
    pub levels: Vec<f64>,
    /// Value at the finest level.
    pub value: f64,
}

/// Estimates `|d|` by descent over `levels` nested meshes (at least three).
pub fn homotopy_norm_estimate(target: Target, d: i64, levels: usize, seed: u64) -> NormEstimate {
    let levels_n = levels.max(3);
    if d == 0 {
        return NormEstimate { target, d, levels: vec![0.0; levels_n], value: 0.0 };
    }
    let problem: Box<dyn Problem> = match target {
        Target::S1 => Box::new(Loop { d: d as f64 }),
        Target::S2 => Box::new(Bubble { d: d as f64 }),
    };
    let mut rng = sample_rng(seed, d as u64, 0);
    let mut nodes = problem.initial(problem.elements(0), &mut rng);
    let mut out = Vec::with_capacity(levels_n);
    for level in 0..levels_n {
        if level > 0 {
            nodes = prolong(&nodes);
        }
        let h = problem.length() / (nodes.len() - 1) as f64;
        let best = descend(problem.as_ref(), &mut nodes, h);
        let prev = out.last().copied().unwrap_or(f64::INFINITY);
        out.push(best.min(prev));
    }
    let value = *out.last().expect("levels");
    NormEstimate { target, d, levels: out, value }
}

trait Problem {
    fn length(&self) -> f64;
    fn elements(&self, level: usize) -> usize;
    fn initial(&self, elements: usize, rng: &mut dyn rand::RngCore) -> Vec<f64>;
    /// Exact energy of the piecewise linear function with these nodal values.
    fn energy(&self, f: &[f64], h: f64) -> f64;
    /// Energy used for descent, with its gradient in the interior nodes.
    fn smooth_energy(&self, f: &[f64], h: f64, grad: &mut [f64]) -> f64;
}

struct Loop {
    d: f64,
}

/// Smoothing of `|x|` used for descent only.
const TV_EPS: f64 = 1e-6;

impl Problem for Loop {
    fn length(&self) -> f64 {
        2.0
    }

    fn elements(&self, level: usize) -> usize {
        S1_ELEMENTS << level
    }

    fn initial(&self, elements: usize, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let amp = PI * rng.random_range(1.0..2.0) * self.d.abs();
        (0..=elements)
            .map(|i| {
                let s = i as f64 / elements as f64;
                2.0 * PI * self.d * s + amp * (3.0 * PI * s).sin()
            })
            .collect()
    }

    fn energy(&self, f: &[f64], _h: f64) -> f64 {
        f.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    fn smooth_energy(&self, f: &[f64], _h: f64, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut e = 0.0;
        for i in 0..f.len() - 1 {
            let dlt = f[i + 1] - f[i];
            let r = (dlt * dlt + TV_EPS * TV_EPS).sqrt();
            e += r;
            grad[i + 1] += dlt / r;
            grad[i] -= dlt / r;
        }
        e
    }
}

struct Bubble {
    d: f64,
}

/// Mean of `sin^2` over the segment from `a` to `b`.
fn mean_sin2(a: f64, b: f64) -> f64 {
    let dl = b - a;
    if dl.abs() < 1e-4 {
        // Taylor expansion around the midpoint
        let m = 0.5 * (a + b);
        let s2 = m.sin().powi(2);
        return s2 + dl * dl / 12.0 * (2.0 * m).cos();
    }
    0.5 - ((2.0 * b).sin() - (2.0 * a).sin()) / (4.0 * dl)
}

const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668, 0.118_463_442_528_095),
    (0.230_765_344_947_158, 0.239_314_335_249_683),
    (0.5, 0.284_444_444_444_444),
    (0.769_234_655_052_842, 0.239_314_335_249_683),
    (0.953_089_922_969_332, 0.118_463_442_528_095),
];

impl Problem for Bubble {
    fn length(&self) -> f64 {
        S2_LENGTH
    }

    fn elements(&self, level: usize) -> usize {
        S2_ELEMENTS << level
    }

    fn initial(&self, elements: usize, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let amp = rng.random_range(0.5..1.5);
        (0..=elements)
            .map(|i| {
                let s = i as f64 / elements as f64;
                PI * (1.0 - s) + amp * (3.0 * PI * s).sin()
            })
            .collect()
    }

    fn energy(&self, f: &[f64], h: f64) -> f64 {
        let d2 = self.d * self.d;
        let e: f64 = f
            .windows(2)
            .map(|w| {
                let dl = w[1] - w[0];
                dl * dl / h + d2 * h * mean_sin2(w[0], w[1])
            })
            .sum();
        2.0 * PI * e
    }

    fn smooth_energy(&self, f: &[f64], h: f64, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let d2 = self.d * self.d;
        for i in 0..f.len() - 1 {
            let (a, b) = (f[i], f[i + 1]);
            let dl = b - a;
            let (mut ga, mut gb) = (0.0, 0.0);
            for (s, w) in GAUSS5 {
                let v = (2.0 * (a + dl * s)).sin();
                ga += w * (1.0 - s) * v;
                gb += w * s * v;
            }
            grad[i] += 2.0 * PI * (-2.0 * dl / h + d2 * h * ga);
            grad[i + 1] += 2.0 * PI * (2.0 * dl / h + d2 * h * gb);
        }
        self.energy(f, h)
    }
}

/// Linear interpolation onto the mesh with every element halved.
fn prolong(f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * f.len() - 1);
    for w in f.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*f.last().expect("nonempty"));
    out
}

/// Solves `K s = g` on interior nodes, `K = tridiag(-1, 2, -1) / h`.
fn h1_solve(g: &[f64], h: f64) -> Vec<f64> {
    let m = g.len();
    let mut c = vec![0.0; m];
    let mut x = vec![0.0; m];
    let (diag, off) = (2.0 / h, -1.0 / h);
    let mut denom = diag;
    x[0] = g[0] / denom;
    for i in 1..m {
        c[i - 1] = off / denom;
        denom = diag - off * c[i - 1];
        x[i] = (g[i] - off * x[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Preconditioned descent with backtracking; returns the least exact energy seen.
fn descend(p: &dyn Problem, f: &mut [f64], h: f64) -> f64 {
    let n = f.len();
    let mut grad = vec![0.0; n];
    let mut e = p.smooth_energy(f, h, &mut grad);
    let mut best = p.energy(f, h);
    let mut best_nodes = f.to_vec();
    let mut step = 1.0;
    let mut trial = f.to_vec();
    let mut scratch = vec![0.0; n];
    for _ in 0..MAX_STEPS {
        let dir = h1_solve(&grad[1..n - 1], h);
        let slope: f64 = dir.iter().zip(&grad[1..n - 1]).map(|(a, b)| a * b).sum();
        if slope <= 1e-14 * (1.0 + e.abs()) {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            trial.copy_from_slice(f);
            for (t, s) in trial[1..n - 1].iter_mut().zip(&dir) {
                *t -= step * s;
            }
            let et = p.smooth_energy(&trial, h, &mut scratch);
            if et <= e - 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        f.copy_from_slice(&trial);
        let et = p.smooth_energy(f, h, &mut grad);
        let gain = e - et;
        e = et;
        let exact = p.energy(f, h);
        if exact < best {
            best = exact;
            best_nodes.copy_from_slice(f);
        }
        step = (step * 2.0).min(1.0);
        if gain <= 1e-13 * e.abs().max(1.0) {
            break;
        }
    }
    f.copy_from_slice(&best_nodes);
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_class_is_free() {
        let e = homotopy_norm_estimate(Target::S2, 0, 3, 1);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn circle_constant() {
        for d in [1, -1, 2] {
            let e = homotopy_norm_estimate(Target::S1, d, 4, 7);
            let exact = 2.0 * PI * d.abs() as f64;
            assert!(e.value >= exact - 1e-9);
            assert!(e.value <= 1.05 * exact, "{e:?}");
            assert!(e.levels.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn sphere_constant() {
        let e = homotopy_norm_estimate(Target::S2, 1, 4, 7);
        let exact = 8.0 * PI;
        assert!(e.value >= exact - 1e-9, "{e:?}");
        assert!(e.value <= 1.1 * exact, "{e:?}");
        assert!(e.levels.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn exact_element_quadrature() {
        let (a, b) = (0.3, 1.7);
        let n = 100_000;
        let num: f64 =
            (0..n).map(|k| (a + (b - a) * (k as f64 + 0.5) / n as f64).sin().powi(2)).sum::<f64>()
                / n as f64;
        assert!((mean_sin2(a, b) - num).abs() < 1e-9);
        assert!((mean_sin2(0.4, 0.4 + 1e-6) - mean_sin2(0.4, 0.4 + 2e-4)).abs() < 1e-3);
    }
}
