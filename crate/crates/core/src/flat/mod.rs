//! Flat and flat-size norms of 0-chains.
//!
//! Both norms are infima over dipolar decompositions; they differ only in
//! the price of a dipole (`|c| * |v|` versus `alpha * |v|`). Three solvers
//! are provided:
//!
//! * [`oracle`]: exhaustive search for small chains over any group,
//! * [`flow`]: exact transport reduction for `Z` with a linear norm,
//! * [`heuristic`]: greedy certified upper bound for everything else.
//!
//! [`flat_norm`] picks the best applicable one.

mod heuristic;
mod mcf;
mod oracle;
mod transport;

pub use heuristic::heuristic;
pub use mcf::MinCostFlow;
pub use oracle::{oracle, OracleLimits};
pub use transport::flow;

use serde::{Deserialize, Serialize};

use crate::chain::{Chain, DipolarDecomposition, Dipole, Monopole};
use crate::error::{Error, Result};
use crate::group::{Coeff, GroupSpec, NormedGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Flat,
    #[serde(rename = "flatsize")]
    FlatSize,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Mode::Flat),
            "flatsize" => Ok(Mode::FlatSize),
            other => Err(Error::InvalidInput(format!("unknown mode \"{other}\""))),
        }
    }
}

/// Which solver to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Auto,
    Oracle,
    Flow,
}

/// A norm value together with a decomposition achieving it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub certificate: DipolarDecomposition,
    /// Set when the solver's search space was covered completely.
    pub exact: bool,
}

impl NormResult {
    pub fn zero() -> Self {
        NormResult { value: 0.0, certificate: DipolarDecomposition::default(), exact: true }
    }

    /// Cost of the certificate under `mode`.
    pub fn certificate_cost(&self, group: &GroupSpec, mode: Mode) -> Result<f64> {
        match mode {
            Mode::Flat => self.certificate.cost_flat(group),
            Mode::FlatSize => self.certificate.cost_flatsize(group),
        }
    }
}

/// Norm of `s` using the exact solver when one applies.
pub fn flat_norm(s: &Chain, mode: Mode) -> NormResult {
    if s.is_empty() {
        return NormResult::zero();
    }
    if mode == Mode::Flat && s.group().is_linear_int() {
        if let Ok(r) = flow(s) {
            return r;
        }
    }
    let limits = OracleLimits::default();
    if s.len() <= limits.max_atoms {
        if let Ok(r) = oracle(s, mode, &limits) {
            return r;
        }
    }
    heuristic(s, mode)
}

/// Runs the requested solver.
pub fn solve(s: &Chain, mode: Mode, solver: Solver) -> Result<NormResult> {
    match solver {
        Solver::Auto => Ok(flat_norm(s, mode)),
        Solver::Oracle => oracle(s, mode, &OracleLimits::default()),
        Solver::Flow => {
            if mode != Mode::Flat {
                return Err(Error::InvalidInput(
                    "the transport solver computes the flat norm only".into(),
                ));
            }
            flow(s)
        }
    }
}

/// Price of a dipole chain of total length `len` carrying `c`.
pub(crate) fn pair_cost(g: &GroupSpec, mode: Mode, c: Coeff, len: f64) -> f64 {
    if g.is_zero(c) {
        return 0.0;
    }
    match mode {
        Mode::Flat => g.norm(c) * len,
        Mode::FlatSize => g.alpha() * len,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SinkRoute {
    Monopole,
    Boundary,
}

/// Cheapest way to dispose of `c` at a point `d` away from the boundary:
/// either a monopole or a (possibly chained) dipole to the boundary.
pub(crate) fn sink_cost(g: &GroupSpec, mode: Mode, c: Coeff, d: f64) -> (f64, SinkRoute) {
    if g.is_zero(c) {
        return (0.0, SinkRoute::Monopole);
    }
    let mono = g.norm(c);
    let escape = match mode {
        Mode::Flat => g.norm(c) * d,
        Mode::FlatSize => g.alpha() * d,
    };
    if escape < mono {
        (escape, SinkRoute::Boundary)
    } else {
        (mono, SinkRoute::Monopole)
    }
}

/// Certificate pieces for disposing `c` at `x` via `route`.
pub(crate) fn push_sink(
    out: &mut DipolarDecomposition,
    s: &Chain,
    x: &[f64],
    c: Coeff,
    route: SinkRoute,
    split_long: bool,
) {
    match route {
        SinkRoute::Monopole => out.monopoles.push(Monopole { x: x.to_vec(), c }),
        SinkRoute::Boundary => {
            let q = s.domain().nearest_boundary_point(x);
            push_dipole(out, Dipole::transport(x, &q, c), split_long);
        }
    }
}

pub(crate) fn push_dipole(out: &mut DipolarDecomposition, d: Dipole, split_long: bool) {
    if split_long {
        out.dipoles.extend(d.split_unit());
    } else {
        out.dipoles.push(d);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Atom, BoxDomain};

    fn z() -> GroupSpec {
        GroupSpec::int(1.0, 1.0).unwrap()
    }

    #[test]
    fn dispatch_marks_exact() {
        let s = Chain::new(
            BoxDomain::unit(2),
            z(),
            vec![Atom::new(vec![0.5, 0.5], 1), Atom::new(vec![0.6, 0.5], -1)],
        );
        let r = flat_norm(&s, Mode::Flat);
        assert!(r.exact);
        assert!((r.value - 0.1).abs() < 1e-12);
        let r = flat_norm(&s, Mode::FlatSize);
        assert!(r.exact);
        assert!((r.value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn flow_rejects_flatsize() {
        let s = Chain::new(BoxDomain::unit(2), z(), vec![Atom::new(vec![0.5, 0.5], 1)]);
        assert!(solve(&s, Mode::FlatSize, Solver::Flow).is_err());
    }

    #[test]
    fn mode_parses() {
        assert_eq!("flat".parse::<Mode>().unwrap(), Mode::Flat);
        assert_eq!("flatsize".parse::<Mode>().unwrap(), Mode::FlatSize);
        assert!("mass".parse::<Mode>().is_err());
    }
}
