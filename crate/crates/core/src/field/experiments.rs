//! Experiment harnesses around the detector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detect::{admissible_grid_for, extract_sgrid_with};
use super::{dirichlet_energy, Field};
use crate::chain::Chain;
use crate::error::Result;
use crate::flat::{flat_norm, Mode};
use crate::grid::{deform, Grid};
use crate::stats::{loglog_slope, pool, sample_rng, Estimate};
use crate::synth::perturb;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub h: f64,
    pub samples: usize,
    /// Samples where the detected chain equals the deformed reference.
    pub matches: usize,
    /// Samples where extraction failed.
    pub errors: usize,
    /// `F(S_ref - S^grid)` over successful samples.
    pub estimate: Estimate,
    /// `h * M(S_ref)`.
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    pub slope: f64,
    /// First failure message, if any.
    pub first_error: Option<String>,
}

impl ConsistencyReport {
    pub fn exact(&self) -> bool {
        self.rows.iter().all(|r| r.errors == 0 && r.matches == r.samples)
    }
}

/// Compares `S^grid(u, h, y)` with `P(S_ref, h, y)` on admissible random grids.
pub fn sgrid_consistency(
    u: &Field,
    reference: &Chain,
    family: &[(f64, usize)],
    seed: u64,
) -> Result<ConsistencyReport> {
    let p = u.target.sphere_dim();
    let group = *reference.group();
    let mut rows = Vec::with_capacity(family.len());
    let mut first_error = None;
    for (k, &(h, samples)) in family.iter().enumerate() {
        let outcomes = pool().install(|| {
            (0..samples)
                .into_par_iter()
                .map(|i| -> Result<std::result::Result<(bool, f64), String>> {
                    let mut rng = sample_rng(seed, k as u64, i as u64);
                    let g = admissible_grid_for(u, h, reference, &mut rng)?;
                    Ok(match extract_sgrid_with(u, &g, p, group) {
                        Ok(s) => {
                            let expected = deform(reference, &g)?;
                            let err = flat_norm(&reference.try_sub(&s.chain)?, Mode::Flat).value;
                            Ok((s.chain == expected, err))
                        }
                        Err(e) => Err(format!("{}: {e}", e.name())),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut errors = 0;
        let mut matches = 0;
        let mut values = Vec::with_capacity(samples);
        for o in outcomes {
            match o {
                Ok((same, err)) => {
                    matches += same as usize;
                    values.push(err);
                }
                Err(msg) => {
                    errors += 1;
                    first_error.get_or_insert(msg);
                }
            }
        }
        rows.push(ConsistencyRow {
            h,
            samples,
            matches,
            errors,
            estimate: Estimate::from_samples(&values),
            scale: h * reference.mass(),
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.estimate.mean).collect();
    Ok(ConsistencyReport { slope: loglog_slope(&hs, &means), rows, first_error })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBoundRow {
    pub index: usize,
    pub atoms: usize,
    /// `F(S^nice)`.
    pub flat: f64,
    /// `D_p(u)` over the analysis domain.
    pub energy: f64,
    pub ratio: f64,
    /// Mean over grids of `F(S^grid) / D_p(u)`.
    pub grid_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBoundReport {
    pub rows: Vec<EnergyBoundRow>,
    pub max_ratio: f64,
    pub max_grid_ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Ratios of singular-chain flat norms to Dirichlet energies across a corpus.
pub fn energy_bound_test(
    corpus: &[(Field, Chain)],
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<EnergyBoundReport> {
    let mut rows = Vec::with_capacity(corpus.len());
    for (index, (u, truth)) in corpus.iter().enumerate() {
        let p = u.target.sphere_dim();
        let energy = dirichlet_energy(u, p, &u.domain)?;
        let flat = flat_norm(truth, Mode::Flat).value;
        let mut grid_values = Vec::with_capacity(samples);
        for i in 0..samples {
            let mut rng = sample_rng(seed, index as u64, i as u64);
            let g = admissible_grid_for(u, h, truth, &mut rng)?;
            let s = extract_sgrid_with(u, &g, p, *truth.group())?;
            grid_values.push(ratio(flat_norm(&s.chain, Mode::Flat).value, energy));
        }
        rows.push(EnergyBoundRow {
            index,
            atoms: truth.len(),
            flat,
            energy,
            ratio: ratio(flat, energy),
            grid_ratio: Estimate::from_samples(&grid_values).mean,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let max_grid_ratio = rows.iter().map(|r| r.grid_ratio).fold(0.0, f64::max);
    Ok(EnergyBoundReport { rows, max_ratio, max_grid_ratio })
}

/// Perturbation sizes scanned by [`stability_test`].
pub const DEFAULT_EPSILONS: [f64; 11] =
    [1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    pub same: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Largest scanned size below which every perturbation kept the chain.
    pub threshold: f64,
}

/// Extracts the chain of `u` and of seeded perturbations of growing size.
pub fn stability_test(u: &Field, epsilons: &[f64], g: &Grid, seed: u64) -> Result<StabilityReport> {
    let p = u.target.sphere_dim();
    let base = extract_sgrid_with(u, g, p, crate::group::GroupSpec::int(1.0, 1.0)?)?.chain;
    let mut rows = Vec::with_capacity(epsilons.len());
    for (k, &eps) in epsilons.iter().enumerate() {
        let v = perturb(u, eps, seed.wrapping_add(k as u64));
        let row = match extract_sgrid_with(&v, g, p, *base.group()) {
            Ok(s) => StabilityRow { epsilon: eps, same: s.chain == base, error: None },
            Err(e) => StabilityRow { epsilon: eps, same: false, error: Some(e.name().to_string()) },
        };
        rows.push(row);
    }
    let mut threshold = 0.0;
    for r in &rows {
        if !r.same {
            break;
        }
        threshold = r.epsilon;
    }
    Ok(StabilityReport { rows, threshold })
}
