//! Sphere-valued maps sampled on a lattice, their energies, and the
//! grid-based singular set.

mod detect;
mod experiments;
mod homotopy;
mod invariants;

pub use detect::{
    admissible_for, admissible_grid_for, extract_sgrid, extract_sgrid_with, lattice_box, random_detection,
    LatticeBox, SingularChain,
};
pub use experiments::{
    energy_bound_test, sgrid_consistency, stability_test, ConsistencyReport, ConsistencyRow,
    EnergyBoundReport, EnergyBoundRow, StabilityReport, StabilityRow, DEFAULT_EPSILONS,
};
pub use homotopy::{homotopy_norm_estimate, NormEstimate};
pub use invariants::{box_degree, box_winding, sphere_degree, winding_number, Triangle, ANGLE_TOL};

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{BoxDomain, Point};
use crate::error::{Error, Result};

/// Unit-length tolerance for stored samples.
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    S1,
    S2,
}

impl Target {
    /// Number of components of a sample.
    pub fn components(self) -> usize {
        match self {
            Target::S1 => 2,
            Target::S2 => 3,
        }
    }

    /// Sphere dimension, which is also the critical exponent.
    pub fn sphere_dim(self) -> usize {
        self.components() - 1
    }

    /// Default background value.
    pub fn north(self) -> Vec<f64> {
        match self {
            Target::S1 => vec![1.0, 0.0],
            Target::S2 => vec![0.0, 0.0, 1.0],
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::S1 => "S1",
            Target::S2 => "S2",
        })
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Target> {
        match s {
            "S1" | "s1" => Ok(Target::S1),
            "S2" | "s2" => Ok(Target::S2),
            other => Err(Error::InvalidInput(format!("unknown target \"{other}\""))),
        }
    }
}

pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r > 0.0 {
        v.iter_mut().for_each(|x| *x /= r);
    }
    r
}

/// A unit-vector field sampled at `origin + spacing * i` for every
/// multi-index `i < shape`, stored row-major (last axis fastest) with the
/// components of each sample interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    /// Analysis domain; the lattice covers a padded copy of it.
    pub domain: BoxDomain,
    pub target: Target,
    pub spacing: f64,
    pub origin: Point,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// First line of a field file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub domain: BoxDomain,
    pub target: Target,
    pub spacing: f64,
    pub shape: Vec<usize>,
    /// Position of lattice vertex zero; defaults to the domain corner.
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
}

impl Field {
    /// Lattice over `domain` padded by `pad`, sampled from `f`.
    ///
    /// `f` writes an unnormalized value into its output slice; samples are
    /// normalized afterwards and must not vanish.
    pub fn from_fn(
        domain: &BoxDomain,
        target: Target,
        spacing: f64,
        pad: f64,
        f: impl Fn(&[f64], &mut [f64]) + Sync,
    ) -> Result<Field> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidInput(format!("spacing must be positive, got {spacing}")));
        }
        let n = domain.dim();
        if n != target.components() {
            return Err(Error::InvalidInput(format!(
                "a {target} field needs a {}-dimensional domain, got {n}",
                target.components()
            )));
        }
        let outer = domain.padded(pad.max(0.0));
        let origin = outer.lo.clone();
        let shape: Vec<usize> = (0..n)
            .map(|a| ((outer.hi[a] - outer.lo[a]) / spacing - 1e-9).ceil() as usize + 1)
            .collect();
        let m = target.components();
        let total: usize = shape.iter().product();
        let mut values = vec![0.0; total * m];
        use rayon::prelude::*;
        let strides = strides(&shape);
        crate::stats::pool().install(|| {
            values.par_chunks_mut(m * shape[n - 1]).enumerate().for_each(|(row, out)| {
                let mut idx = vec![0usize; n];
                let mut rest = row * shape[n - 1];
                for a in 0..n {
                    idx[a] = rest / strides[a];
                    rest %= strides[a];
                }
                let mut x: Vec<f64> = (0..n).map(|a| origin[a] + spacing * idx[a] as f64).collect();
                for k in 0..shape[n - 1] {
                    x[n - 1] = origin[n - 1] + spacing * k as f64;
                    let v = &mut out[k * m..(k + 1) * m];
                    f(&x, v);
                    normalize(v);
                }
            });
        });
        let field = Field { domain: domain.clone(), target, spacing, origin, shape, values };
        field.check_unit()?;
        Ok(field)
    }

    /// Wraps samples covering exactly `domain` and mirror-pads them by `pad`.
    pub fn ingest(
        domain: &BoxDomain,
        target: Target,
        spacing: f64,
        shape: Vec<usize>,
        values: Vec<f64>,
        pad: f64,
    ) -> Result<Field> {
        let f = Field {
            domain: domain.clone(),
            target,
            spacing,
            origin: domain.lo.clone(),
            shape,
            values,
        };
        f.check_layout()?;
        f.check_unit()?;
        Ok(f.reflect_pad((pad / spacing).ceil() as usize))
    }

    /// Extends the lattice by `k` vertices per side by mirror reflection.
    pub fn reflect_pad(&self, k: usize) -> Field {
        if k == 0 {
            return self.clone();
        }
        let n = self.dim();
        let m = self.target.components();
        let shape: Vec<usize> = self.shape.iter().map(|s| s + 2 * k).collect();
        let origin: Point = self.origin.iter().map(|o| o - self.spacing * k as f64).collect();
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total * m);
        let new_strides = strides(&shape);
        let reflect = |i: i64, len: usize| -> usize {
            if len == 1 {
                return 0;
            }
            let period = 2 * (len as i64 - 1);
            let r = i.rem_euclid(period);
            (if r < len as i64 { r } else { period - r }) as usize
        };
        let mut src = vec![0usize; n];
        for lin in 0..total {
            let mut rest = lin;
            for a in 0..n {
                let i = rest / new_strides[a];
                rest %= new_strides[a];
                src[a] = reflect(i as i64 - k as i64, self.shape[a]);
            }
            values.extend_from_slice(self.at(&src));
        }
        Field {
            domain: self.domain.clone(),
            target: self.target,
            spacing: self.spacing,
            origin,
            shape,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(strides(&self.shape)).map(|(i, s)| i * s).sum()
    }

    pub fn at(&self, idx: &[usize]) -> &[f64] {
        let m = self.target.components();
        let l = self.linear(idx);
        &self.values[l * m..(l + 1) * m]
    }

    pub fn at_mut(&mut self, idx: &[usize]) -> &mut [f64] {
        let m = self.target.components();
        let l = self.linear(idx);
        &mut self.values[l * m..(l + 1) * m]
    }

    pub fn position(&self, idx: &[usize]) -> Point {
        idx.iter().enumerate().map(|(a, &i)| self.origin[a] + self.spacing * i as f64).collect()
    }

    /// Closed box covered by the lattice.
    pub fn extent(&self) -> BoxDomain {
        BoxDomain {
            lo: self.origin.clone(),
            hi: (0..self.dim())
                .map(|a| self.origin[a] + self.spacing * (self.shape[a] - 1) as f64)
                .collect(),
        }
    }

    fn check_layout(&self) -> Result<()> {
        let m = self.target.components();
        if self.shape.len() != m || self.domain.dim() != m {
            return Err(Error::InvalidInput(format!(
                "a {} field needs {m} axes, got shape {:?}",
                self.target, self.shape
            )));
        }
        if self.values.len() != self.len() * m {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                self.len() * m,
                self.values.len()
            )));
        }
        if self.shape.iter().any(|&s| s < 2) {
            return Err(Error::InvalidInput("each axis needs at least two samples".into()));
        }
        Ok(())
    }

    fn check_unit(&self) -> Result<()> {
        let m = self.target.components();
        for (i, v) in self.values.chunks(m).enumerate() {
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !((r - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::InvalidInput(format!("sample {i} has length {r}")));
            }
        }
        Ok(())
    }

    pub fn header(&self) -> FieldHeader {
        FieldHeader {
            domain: self.domain.clone(),
            target: self.target,
            spacing: self.spacing,
            shape: self.shape.clone(),
            origin: Some(self.origin.clone()),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Field> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: FieldHeader = serde_json::from_str(line.trim_end())?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::InvalidInput("payload is not a whole number of f64".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let f = Field {
            origin: header.origin.unwrap_or_else(|| header.domain.lo.clone()),
            domain: header.domain,
            target: header.target,
            spacing: header.spacing,
            shape: header.shape,
            values,
        };
        f.check_layout()?;
        f.check_unit()?;
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Field> {
        Field::read_from(std::fs::File::open(path)?)
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

/// Discrete `p`-Dirichlet energy over lattice cells whose center lies in `region`.
pub fn dirichlet_energy(u: &Field, p: usize, region: &BoxDomain) -> Result<f64> {
    dirichlet_energy_masked(u, p, |x| region.contains_closed(x))
}

/// As [`dirichlet_energy`], over cells whose center satisfies `keep`.
///
/// The gradient of a cell is the forward difference at its lowest vertex.
pub fn dirichlet_energy_masked(u: &Field, p: usize, keep: impl Fn(&[f64]) -> bool) -> Result<f64> {
    let n = u.dim();
    if p + 1 != n {
        return Err(Error::InvalidInput(format!(
            "the energy exponent must be n - 1 = {}, got {p}",
            n - 1
        )));
    }
    let m = u.target.components();
    let st = strides(&u.shape);
    let cells: Vec<usize> = u.shape.iter().map(|s| s - 1).collect();
    let total: usize = cells.iter().product();
    let cell_strides = strides(&cells);
    let delta = u.spacing;
    let mut energy = 0.0;
    let mut idx = vec![0usize; n];
    let mut center = vec![0.0; n];
    for lin in 0..total {
        let mut rest = lin;
        for a in 0..n {
            idx[a] = rest / cell_strides[a];
            rest %= cell_strides[a];
            center[a] = u.origin[a] + delta * (idx[a] as f64 + 0.5);
        }
        if !keep(&center) {
            continue;
        }
        let base: usize = idx.iter().zip(&st).map(|(i, s)| i * s).sum();
        let v0 = &u.values[base * m..(base + 1) * m];
        let mut g2 = 0.0;
        for s in &st {
            let v1 = &u.values[(base + s) * m..(base + s + 1) * m];
            g2 += v0.iter().zip(v1).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
        }
        g2 /= delta * delta;
        energy += g2.powf(p as f64 / 2.0);
    }
    Ok(energy * delta.powi(n as i32))
}
