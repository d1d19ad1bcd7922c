use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use super::family::{Dynamics, QuadraticFamily, Trajectory};
use super::linalg::{approx, approx_norm, norm_squared, scale, Q};
use super::stack::{find_allnonzero_nullvector, stack_for_adversary, NullVector};
use super::IoiError;

/// Alternative explanation of the adversary's observations: every benign
/// state and feasible set shifted by a constant, unknown constants adjusted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowInstance {
    pub adversary: usize,
    pub delta: Vec<Vec<Q>>,
    /// Stacked `x_hat(k)`.
    pub states: Vec<Vec<Q>>,
    /// `X_hat_j = X_j + shift_j`.
    pub set_shift: Vec<Vec<Q>>,
    /// `B_hat_{jl}` for the rows whose constant the adversary does not know.
    pub constants: BTreeMap<(usize, usize), Q>,
}

fn check_shape(family: &QuadraticFamily, delta: &[Vec<Q>]) -> Result<(), IoiError> {
    if delta.len() != family.num_agents() {
        return Err(IoiError::InvalidDelta(format!(
            "{} blocks for {} agents",
            delta.len(),
            family.num_agents()
        )));
    }
    for (j, d) in delta.iter().enumerate() {
        if d.len() != family.dims()[j] {
            return Err(IoiError::InvalidDelta(format!(
                "block of agent {} has length {}, expected {}",
                j + 1,
                d.len(),
                family.dims()[j]
            )));
        }
    }
    Ok(())
}

/// Checks the shadow invariants: zero adversary block, null vector of the
/// stacked matrix and, unless `allow_zero`, no zero entry elsewhere.
pub fn validate_delta(family: &QuadraticFamily, i: usize, delta: &[Vec<Q>], allow_zero: bool) -> Result<(), IoiError> {
    check_shape(family, delta)?;
    if delta[i].iter().any(|x| !x.is_zero()) {
        return Err(IoiError::InvalidDelta("the adversary's own block must be zero".into()));
    }
    if !allow_zero {
        for (j, d) in delta.iter().enumerate().filter(|(j, _)| *j != i) {
            if let Some(l) = d.iter().position(Zero::is_zero) {
                return Err(IoiError::InvalidDelta(format!(
                    "entry {} of agent {} is zero",
                    l + 1,
                    j + 1
                )));
            }
        }
    }
    let stacked = stack_for_adversary(family, i);
    let residual = stacked.matrix.mul_vec(&stacked.from_delta(delta));
    if let Some(r) = residual.iter().position(|x| !x.is_zero()) {
        return Err(IoiError::InvalidDelta(format!(
            "not a null vector: stacked row {r} ({:?}) evaluates to {}",
            stacked.rows[r], residual[r]
        )));
    }
    Ok(())
}

fn flatten(delta: &[Vec<Q>]) -> Vec<Q> {
    delta.iter().flatten().cloned().collect()
}

fn build(family: &QuadraticFamily, i: usize, delta: &[Vec<Q>], run: &Trajectory) -> ShadowInstance {
    let flat = flatten(delta);
    let states = run
        .states
        .iter()
        .map(|x| x.iter().zip(&flat).map(|(a, b)| a + b).collect())
        .collect();
    let constants = family
        .omega_prime(i)
        .into_iter()
        .map(|(j, l)| {
            let row = family.row(j, l);
            let shift: Q = row.a.iter().zip(&flat).map(|(a, d)| a * d).sum();
            ((j, l), &row.b - shift)
        })
        .collect();
    ShadowInstance {
        adversary: i,
        delta: delta.to_vec(),
        states,
        set_shift: delta.to_vec(),
        constants,
    }
}

/// `x_hat = x_bar + delta`, `X_hat_j = X_j + delta_j` and
/// `B_hat_{jl} = B_{jl} - A_{jl} delta` for rows in `Omega'_i`.
pub fn construct_shadow(
    family: &QuadraticFamily,
    i: usize,
    delta: &[Vec<Q>],
    run: &Trajectory,
) -> Result<ShadowInstance, IoiError> {
    validate_delta(family, i, delta, false)?;
    Ok(build(family, i, delta, run))
}

/// As [`construct_shadow`] but accepts zero entries, including the all-zero
/// perturbation that reproduces the true instance.
pub fn construct_degenerate_shadow(
    family: &QuadraticFamily,
    i: usize,
    delta: &[Vec<Q>],
    run: &Trajectory,
) -> Result<ShadowInstance, IoiError> {
    validate_delta(family, i, delta, true)?;
    Ok(build(family, i, delta, run))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// The shadow must reproduce the adversary's own states.
    AdversaryState,
    /// `x_hat_j(0)` must lie in `X_hat_j`.
    InitialFeasibility,
    /// Update of a benign row whose constant the adversary knows.
    KnownConstantUpdate,
    /// Update of a benign row with an adjusted constant.
    UnknownConstantUpdate,
    /// The adversary's observed gradient values.
    Observation,
    /// A row in `Omega'_i` without an adjusted constant.
    MissingConstant,
}

/// First violated constraint found by [`verify_shadow`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ShadowViolation {
    pub constraint: Constraint,
    pub step: usize,
    pub agent: usize,
    pub coord: usize,
    pub expected: Q,
    pub actual: Q,
}

impl fmt::Display for ShadowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} violated at step {} for agent {} coordinate {}: expected {}, got {}",
            self.constraint,
            self.step,
            self.agent + 1,
            self.coord + 1,
            self.expected,
            self.actual
        )
    }
}

fn project_shifted(dynamics: &Dynamics, j: usize, l: usize, z: &Q, shift: &Q) -> Q {
    let (lo, hi) = dynamics.feasible_sets[j].bounds(l);
    let mut v = z - shift;
    if let Some(lo) = lo.map(|b| b.to_rational()) {
        if v < lo {
            v = lo;
        }
    }
    if let Some(hi) = hi.map(|b| b.to_rational()) {
        if v > hi {
            v = hi;
        }
    }
    v + shift
}

/// Checks by exact evaluation over `k = 0..=iterations` that the shadow is
/// indistinguishable from the true run for adversary `i`: benign updates
/// hold with known or adjusted constants, and the adversary's states and
/// observed gradients are unchanged.
pub fn verify_shadow(
    family: &QuadraticFamily,
    i: usize,
    shadow: &ShadowInstance,
    run: &Trajectory,
    dynamics: &Dynamics,
    iterations: usize,
) -> Result<(), IoiError> {
    check_shape(family, &shadow.set_shift)?;
    if run.states.len() <= iterations || shadow.states.len() <= iterations {
        return Err(IoiError::DimensionMismatch {
            what: "trajectory length",
            expected: iterations + 1,
            got: run.states.len().min(shadow.states.len()),
        });
    }
    let fail = |constraint, step, agent, coord, expected: &Q, actual: &Q| {
        Err(IoiError::ShadowRejected(Box::new(ShadowViolation {
            constraint,
            step,
            agent,
            coord,
            expected: expected.clone(),
            actual: actual.clone(),
        })))
    };
    let constant = |j: usize, l: usize| -> Option<Q> {
        if family.knows(i, (j, l)) {
            Some(family.row(j, l).b.clone())
        } else {
            shadow.constants.get(&(j, l)).cloned()
        }
    };
    for (j, l) in family.omega_prime(i) {
        if !shadow.constants.contains_key(&(j, l)) {
            return fail(Constraint::MissingConstant, 0, j, l, &Q::zero(), &Q::zero());
        }
    }

    for k in 0..=iterations {
        for v in family.agent_range(i) {
            if shadow.states[k][v] != run.states[k][v] {
                let l = v - family.agent_range(i).start;
                return fail(
                    Constraint::AdversaryState,
                    k,
                    i,
                    l,
                    &run.states[k][v],
                    &shadow.states[k][v],
                );
            }
        }
    }
    for j in (0..family.num_agents()).filter(|&j| j != i) {
        for (l, v) in family.agent_range(j).enumerate() {
            let x0 = &shadow.states[0][v];
            let projected = project_shifted(dynamics, j, l, x0, &shadow.set_shift[j][l]);
            if &projected != x0 {
                return fail(Constraint::InitialFeasibility, 0, j, l, &projected, x0);
            }
        }
    }

    for k in 0..iterations {
        let gamma = dynamics.gamma(k)?;
        let x_hat = &shadow.states[k];
        for j in (0..family.num_agents()).filter(|&j| j != i) {
            for (l, v) in family.agent_range(j).enumerate() {
                let b = constant(j, l).expect("checked above");
                let phi = family.row(j, l).eval_with(x_hat, &b);
                let z = &x_hat[v] - &gamma * phi;
                let next = project_shifted(dynamics, j, l, &z, &shadow.set_shift[j][l]);
                if next != shadow.states[k + 1][v] {
                    let c = if family.knows(i, (j, l)) {
                        Constraint::KnownConstantUpdate
                    } else {
                        Constraint::UnknownConstantUpdate
                    };
                    return fail(c, k, j, l, &next, &shadow.states[k + 1][v]);
                }
            }
        }
    }

    for k in 0..=iterations {
        for l in 0..family.dims()[i] {
            let row = family.row(i, l);
            let observed = row.eval(&run.states[k]);
            let b = constant(i, l).expect("checked above");
            let explained = row.eval_with(&shadow.states[k], &b);
            if observed != explained {
                return fail(Constraint::Observation, k, i, l, &observed, &explained);
            }
        }
    }
    Ok(())
}

/// Outcome of the null-space test for one adversary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// A perturbation with every benign entry nonzero exists.
    GuaranteedResistant { witness: Vec<Vec<Q>> },
    /// The listed benign coordinates are pinned to zero; the test gives no
    /// guarantee either way.
    NoGuarantee { forced_zero: Vec<(usize, usize)> },
}

pub fn assess(family: &QuadraticFamily, i: usize) -> Verdict {
    let stacked = stack_for_adversary(family, i);
    match find_allnonzero_nullvector(&stacked.matrix) {
        NullVector::Found(v) => Verdict::GuaranteedResistant {
            witness: stacked.to_delta(&v),
        },
        NullVector::NotFound { forced_zero } => Verdict::NoGuarantee {
            forced_zero: forced_zero.iter().map(|&c| stacked.columns[c]).collect(),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rung {
    /// Scaling factor applied to the base perturbation.
    pub r: String,
    pub verified: bool,
    pub failure: Option<String>,
    /// `||r delta_j - delta_j||` for every benign agent `j`.
    pub distances: Vec<f64>,
}

/// Scaling-ladder witness that the adversary's uncertainty is unbounded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub adversary: usize,
    pub base_norms: Vec<f64>,
    pub rungs: Vec<Rung>,
}

impl UncertaintyReport {
    pub fn all_verified(&self) -> bool {
        self.rungs.iter().all(|r| r.verified)
    }
}

impl fmt::Display for UncertaintyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scaling ladder for adversary agent {}:", self.adversary + 1)?;
        for r in &self.rungs {
            let d: Vec<String> = r.distances.iter().map(|d| format!("{d:.6e}")).collect();
            let status = if r.verified { "verified" } else { "FAILED" };
            writeln!(f, "  r = {:<10} {status:<9} distances [{}]", r.r, d.join(", "))?;
            if let Some(why) = &r.failure {
                writeln!(f, "    {why}")?;
            }
        }
        Ok(())
    }
}

pub fn default_ladder() -> Vec<Q> {
    [1i64, 10, 1_000, 1_000_000]
        .iter()
        .map(|&r| Q::from_integer(r.into()))
        .collect()
}

/// Builds and verifies the shadow for `r * base_delta` at each rung.
pub fn uncertainty_report(
    family: &QuadraticFamily,
    i: usize,
    base_delta: &[Vec<Q>],
    run: &Trajectory,
    dynamics: &Dynamics,
    iterations: usize,
    ladder: &[Q],
) -> Result<UncertaintyReport, IoiError> {
    validate_delta(family, i, base_delta, false)?;
    let benign: Vec<usize> = (0..family.num_agents()).filter(|&j| j != i).collect();
    let mut rungs = Vec::new();
    for r in ladder {
        if r.is_zero() {
            return Err(IoiError::InvalidDelta(
                "scaling factor 0 collapses the perturbation".into(),
            ));
        }
        let delta: Vec<Vec<Q>> = base_delta.iter().map(|d| scale(d, r)).collect();
        let shadow = construct_shadow(family, i, &delta, run)?;
        let outcome = verify_shadow(family, i, &shadow, run, dynamics, iterations);
        let diff = r - Q::one();
        let distances = benign
            .iter()
            .map(|&j| approx_norm(&scale(&base_delta[j], &diff)))
            .collect();
        rungs.push(Rung {
            r: r.to_string(),
            verified: outcome.is_ok(),
            failure: outcome.err().map(|e| e.to_string()),
            distances,
        });
    }
    Ok(UncertaintyReport {
        adversary: i,
        base_norms: benign
            .iter()
            .map(|&j| approx(&norm_squared(&base_delta[j])).sqrt())
            .collect(),
        rungs,
    })
}
