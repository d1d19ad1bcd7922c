//! Input-output inference analysis for quadratic gradient families: can an
//! agent reconstruct the others' states from its own states and gradients?
//!
//! A family resists inference against agent `i` when the stacked weights
//! acting on `x_{-i}` have a null vector with no zero entry. Such a vector
//! yields shadow instances, arbitrarily far from the truth, that agent `i`
//! cannot tell apart from the real run.

mod attack;
mod family;
mod file;
pub mod linalg;
mod planted;
mod shadow;
mod stack;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use attack::{linear_attack, AttackOutcome, AttackReport, LinearSystem};
pub use family::{simulate, Dynamics, QuadraticFamily, QuadraticRow, Trajectory};
pub use file::{family_from_json, family_to_json, load_family, parse_rational, Scenario, FAMILY_SCHEMA};
pub use planted::{planted_family, PlantedFamily, PlantedSpec};
pub use shadow::{
    assess, construct_degenerate_shadow, construct_shadow, default_ladder, uncertainty_report, validate_delta,
    verify_shadow, Constraint, Rung, ShadowInstance, ShadowViolation, UncertaintyReport, Verdict,
};
pub use stack::{find_allnonzero_nullvector, stack_for_adversary, NullVector, StackedMatrix, StackedRow};

use crate::problem::{FeasibleSet, ProblemError, StepSchedule};
use linalg::{q, Q};

#[derive(Debug, Error)]
pub enum IoiError {
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid perturbation: {0}")]
    InvalidDelta(String),
    #[error("malformed observations: {0}")]
    MalformedObservations(String),
    #[error("gradient {row} of agent {agent} has state degree {degree}, above two", agent = .agent + 1, row = .row + 1)]
    NotQuadratic { agent: usize, row: usize, degree: u32 },
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shadow rejected: {0}")]
    ShadowRejected(Box<ShadowViolation>),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Three scalar agents with `Phi_1 = -x2 - x3`, `Phi_2 = -2 x3` and
/// `Phi_3 = -x1`. Agent 1 recovers the others from three of its own states.
pub fn first_example() -> QuadraticFamily {
    let rows = vec![
        vec![QuadraticRow::affine(vec![q(0), q(-1), q(-1)], q(0))],
        vec![QuadraticRow::affine(vec![q(0), q(0), q(-2)], q(0))],
        vec![QuadraticRow::affine(vec![q(-1), q(0), q(0)], q(0))],
    ];
    QuadraticFamily::all_known(vec![1, 1, 1], rows).expect("consistent example")
}

/// `Phi_2 = x2 - x1 - x3` and `Phi_3 = x3 - x1 - x2`: every equation agent 1
/// derives only pins down `x2 + x3`.
pub fn modified_example() -> QuadraticFamily {
    let rows = vec![
        vec![QuadraticRow::affine(vec![q(0), q(-1), q(-1)], q(0))],
        vec![QuadraticRow::affine(vec![q(-1), q(1), q(-1)], q(0))],
        vec![QuadraticRow::affine(vec![q(-1), q(-1), q(1)], q(0))],
    ];
    QuadraticFamily::all_known(vec![1, 1, 1], rows).expect("consistent example")
}

/// Unit step, unconstrained sets and the given start.
pub fn example_scenario(initial_state: Vec<Q>, iterations: usize) -> Scenario {
    let dims = vec![1; initial_state.len()];
    Scenario {
        dynamics: Dynamics {
            feasible_sets: dims.iter().map(|&dim| FeasibleSet::AllReals { dim }).collect(),
            step: StepSchedule::Constant(crate::fixedpoint::ScaledDecimal::one()),
            initial_state,
        },
        iterations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackSummary {
    pub observations: usize,
    pub rank: usize,
    pub unknowns: usize,
    /// `"unique"`, `"underdetermined"` or `"inconsistent"`.
    pub outcome: String,
    /// Recovered values of `x_j(0)` as `(agent, coordinate, value)`, one-based.
    pub recovered: Vec<(usize, usize, String)>,
    /// Whether the recovered values equal the true states.
    pub matches_truth: Option<bool>,
}

/// Everything `hegrad ioi` reports for one adversary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdversaryAnalysis {
    pub adversary: usize,
    pub resistant: bool,
    /// Perturbation per agent when one exists.
    pub witness: Option<Vec<Vec<String>>>,
    /// Benign coordinates pinned to zero, one-based.
    pub forced_zero: Vec<(usize, usize)>,
    pub ladder: Option<UncertaintyReport>,
    pub attack: Option<AttackSummary>,
}

impl fmt::Display for AdversaryAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "adversary: agent {}", self.adversary + 1)?;
        if let Some(w) = &self.witness {
            let blocks: Vec<String> = w.iter().map(|b| format!("({})", b.join(", "))).collect();
            writeln!(f, "verdict: guaranteed resistant (null-space condition holds)")?;
            writeln!(f, "witness delta: {}", blocks.join(" "))?;
        } else {
            let coords: Vec<String> = self.forced_zero.iter().map(|(a, c)| format!("x{a}.{c}")).collect();
            writeln!(
                f,
                "verdict: no guarantee from this test (forced to zero: {})",
                coords.join(", ")
            )?;
        }
        if let Some(l) = &self.ladder {
            write!(f, "{l}")?;
        }
        if let Some(a) = &self.attack {
            writeln!(
                f,
                "linear attack: {} from {} observations (rank {} of {})",
                a.outcome, a.observations, a.rank, a.unknowns
            )?;
            for (agent, coord, v) in &a.recovered {
                writeln!(f, "  x{agent}.{coord}(0) = {v}")?;
            }
            if let Some(ok) = a.matches_truth {
                writeln!(f, "  matches the true states: {}", if ok { "yes" } else { "no" })?;
            }
        }
        Ok(())
    }
}

fn attack_applies(family: &QuadraticFamily, scenario: &Scenario, i: usize) -> Option<Q> {
    let all_reals = scenario
        .dynamics
        .feasible_sets
        .iter()
        .all(|s| matches!(s, FeasibleSet::AllReals { .. }));
    let knows_all = family.omega_prime(i).is_empty();
    match &scenario.dynamics.step {
        StepSchedule::Constant(g) if family.is_affine() && all_reals && knows_all => Some(g.to_rational()),
        _ => None,
    }
}

/// Null-space verdict for adversary `i`, the scaling ladder when a witness
/// exists, and the reconstruction attack when the family is affine,
/// unconstrained and fully known to the adversary.
pub fn analyze(
    family: &QuadraticFamily,
    scenario: &Scenario,
    i: usize,
    ladder: &[Q],
) -> Result<AdversaryAnalysis, IoiError> {
    if i >= family.num_agents() {
        return Err(IoiError::InvalidFamily(format!("no agent {}", i + 1)));
    }
    let run = simulate(family, &scenario.dynamics, scenario.iterations)?;
    let mut out = AdversaryAnalysis {
        adversary: i,
        resistant: false,
        witness: None,
        forced_zero: Vec::new(),
        ladder: None,
        attack: None,
    };
    match assess(family, i) {
        Verdict::GuaranteedResistant { witness } => {
            out.resistant = true;
            out.ladder = Some(uncertainty_report(
                family,
                i,
                &witness,
                &run,
                &scenario.dynamics,
                scenario.iterations,
                ladder,
            )?);
            out.witness = Some(
                witness
                    .iter()
                    .map(|b| b.iter().map(ToString::to_string).collect())
                    .collect(),
            );
        }
        Verdict::NoGuarantee { forced_zero } => {
            out.forced_zero = forced_zero.iter().map(|&(a, c)| (a + 1, c + 1)).collect();
        }
    }
    if let Some(gamma) = attack_applies(family, scenario, i) {
        let system = LinearSystem::from_family(family, gamma)?;
        let own = family.agent_range(i);
        let observations: Vec<Vec<Q>> = run.states.iter().map(|x| x[own.clone()].to_vec()).collect();
        let report = linear_attack(&system, i, &observations)?;
        let truth: Vec<Q> = (0..family.n())
            .filter(|v| !own.contains(v))
            .map(|v| run.states[0][v].clone())
            .collect();
        let (outcome, values) = match &report.outcome {
            AttackOutcome::Unique(x) => ("unique", Some(x)),
            AttackOutcome::Underdetermined { .. } => ("underdetermined", None),
            AttackOutcome::Inconsistent => ("inconsistent", None),
        };
        out.attack = Some(AttackSummary {
            observations: observations.len(),
            rank: report.rank,
            unknowns: report.unknowns.len(),
            outcome: outcome.into(),
            recovered: values
                .map(|x| {
                    report
                        .unknowns
                        .iter()
                        .zip(x)
                        .map(|(&(a, c), v)| (a + 1, c + 1, v.to_string()))
                        .collect()
                })
                .unwrap_or_default(),
            matches_truth: values.map(|x| *x == truth),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_example_analysis() {
        let scenario = example_scenario(vec![q(1), Q::new((-3).into(), 2.into()), Q::new(5.into(), 2.into())], 2);
        let a = analyze(&first_example(), &scenario, 0, &default_ladder()).unwrap();
        assert!(!a.resistant);
        assert_eq!(a.forced_zero, vec![(2, 1), (3, 1)]);
        let attack = a.attack.as_ref().unwrap();
        assert_eq!(attack.outcome, "unique");
        assert_eq!(
            attack.recovered,
            vec![(2, 1, "-3/2".to_string()), (3, 1, "5/2".to_string())]
        );
        assert_eq!(attack.matches_truth, Some(true));
        let text = a.to_string();
        assert!(text.contains("no guarantee"));
        assert!(text.contains("x2.1(0) = -3/2"));
    }

    #[test]
    fn modified_example_is_a_false_negative() {
        let scenario = example_scenario(vec![q(1), q(4), q(-2)], 6);
        let a = analyze(&modified_example(), &scenario, 0, &default_ladder()).unwrap();
        assert!(!a.resistant);
        assert_eq!(a.attack.unwrap().outcome, "underdetermined");
    }

    #[test]
    fn planted_family_analysis_verifies_the_ladder() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(12);
        let p = planted_family(&mut rng, &PlantedSpec::default());
        let a = analyze(&p.family, &p.scenario, p.adversary, &default_ladder()).unwrap();
        assert!(a.resistant);
        assert!(a.ladder.as_ref().unwrap().all_verified());
        assert!(serde_json::to_string(&a).unwrap().contains("\"resistant\":true"));
    }
}
