//! In-process simulation of the encrypted gradient protocols over a star
//! topology: agents talk only to the system operator, in lockstep rounds
//! (encrypt, evaluate, decrypt, update).

mod alg1;
mod alg2;
mod audit;
mod export;
mod randomness;
mod transcript;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alg1::run_algorithm1;
pub use alg2::run_algorithm2;
pub use audit::{transcript_audit, AuditSummary, AuditViolation};
pub use export::{deviation_csv, timing_summary, trajectory_csv, TimingRow, TimingSummary};
pub use randomness::{Draw, Randomness, ScriptedRandomness, SeededRandomness};
pub use transcript::{Ciphertext, Message, Payload, Transcript};

use crate::fixedpoint::{FixedPointError, ScaledDecimal};
use crate::paillier::PaillierError;
use crate::problem::{Participant, ProblemError, ProblemInstance};
use crate::singlemod::SingleModError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
    #[error(transparent)]
    SingleMod(#[from] SingleModError),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error("gradient row {row} of agent {agent} is not affine in the state (degree {degree})")]
    NotAffine { agent: usize, row: usize, degree: u32 },
    #[error(
        "key bound violated at step {step}: agent {agent} row {row} needs modulus >= {threshold}, key is {modulus}"
    )]
    KeyBoundViolated {
        step: usize,
        agent: usize,
        row: usize,
        threshold: String,
        modulus: String,
    },
    #[error("key of agent {agent} is below the worst-case bound {threshold} for the configured state bound")]
    KeyTooSmall { agent: usize, threshold: String },
    #[error("state {agent}.{coord} = {value} at step {step} exceeds the configured bound {bound}")]
    StateBoundExceeded {
        step: usize,
        agent: usize,
        coord: usize,
        value: String,
        bound: String,
    },
    #[error("expected {expected} keypairs, got {got}")]
    KeyCount { expected: usize, got: usize },
    #[error("runs differ in shape: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Plain,
    Alg1,
    Alg2,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Plain => "plain",
            Scheme::Alg1 => "alg1",
            Scheme::Alg2 => "alg2",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunConfig {
    /// Number of iterations `K`.
    pub iterations: usize,
    /// Optional a-priori bound on `|x_v(k)|`. When set, keys are checked
    /// against the worst case up front and every state is checked against
    /// the bound.
    pub state_bound: Option<ScaledDecimal>,
    /// Bit size of the blinding factors; defaults to the key size.
    pub blinding_bits: Option<u64>,
}

impl RunConfig {
    pub fn iterations(k: usize) -> Self {
        RunConfig {
            iterations: k,
            ..Default::default()
        }
    }
}

/// Wall-clock nanoseconds spent by one agent in one iteration. `eval` is
/// the operator's work on that agent's gradient rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub encrypt: u64,
    pub eval: u64,
    pub decrypt: u64,
    pub update: u64,
}

impl PhaseTimes {
    pub fn total(&self) -> u64 {
        self.encrypt + self.eval + self.decrypt + self.update
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub scheme: Scheme,
    pub sigma: u32,
    /// State dimension of each agent.
    pub dims: Vec<usize>,
    /// Partition owner of each coefficient.
    pub coefficient_owners: Vec<Participant>,
    /// Stacked state `x(k)` for `k = 0..=K`.
    pub trajectory: Vec<Vec<ScaledDecimal>>,
    /// Stacked gradient values used for the update at `k = 0..K`.
    pub gradients: Vec<Vec<ScaledDecimal>>,
    pub transcript: Transcript,
    /// `timings[k][i]` for iteration `k` and agent `i`.
    pub timings: Vec<Vec<PhaseTimes>>,
}

impl RunResult {
    fn start(scheme: Scheme, problem: &ProblemInstance) -> Self {
        RunResult {
            scheme,
            sigma: problem.sigma(),
            dims: problem.dims(),
            coefficient_owners: (0..problem.m()).map(|c| problem.partition().owner(c)).collect(),
            trajectory: vec![problem.initial_state()],
            gradients: Vec::new(),
            transcript: Transcript::new(),
            timings: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.trajectory.len() - 1
    }

    pub fn final_state(&self) -> &[ScaledDecimal] {
        self.trajectory.last().expect("trajectory is never empty")
    }

    /// Agent `i`'s block of the stacked state at step `k`.
    pub fn agent_state(&self, k: usize, i: usize) -> &[ScaledDecimal] {
        let start: usize = self.dims[..i].iter().sum();
        &self.trajectory[k][start..start + self.dims[i]]
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        self.scheme == other.scheme
            && self.sigma == other.sigma
            && self.dims == other.dims
            && self.coefficient_owners == other.coefficient_owners
            && self.trajectory == other.trajectory
            && self.gradients == other.gradients
            && self.transcript == other.transcript
    }
}

fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos().min(u64::MAX as u128) as u64
}

fn split(problem: &ProblemInstance, x: &[ScaledDecimal]) -> Vec<Vec<ScaledDecimal>> {
    (0..problem.num_agents())
        .map(|i| x[problem.agent_range(i)].to_vec())
        .collect()
}

fn check_state_bound(
    problem: &ProblemInstance,
    bound: Option<&ScaledDecimal>,
    x: &[ScaledDecimal],
    step: usize,
) -> Result<(), ProtocolError> {
    let Some(bound) = bound else { return Ok(()) };
    for i in 0..problem.num_agents() {
        for (l, v) in x[problem.agent_range(i)].iter().enumerate() {
            if v.abs() > *bound {
                return Err(ProtocolError::StateBoundExceeded {
                    step,
                    agent: i + 1,
                    coord: l + 1,
                    value: v.to_string(),
                    bound: bound.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Applies each agent's projected-gradient step to the stacked state.
fn update_all(
    problem: &ProblemInstance,
    x: &[ScaledDecimal],
    k: usize,
    phi: &[Vec<ScaledDecimal>],
    times: &mut [PhaseTimes],
) -> Result<Vec<ScaledDecimal>, ProtocolError> {
    let parts = split(problem, x);
    let mut next = Vec::with_capacity(x.len());
    for (i, part) in parts.iter().enumerate() {
        let t = Instant::now();
        next.extend(problem.local_update(i, part, k, &phi[i])?);
        times[i].update += elapsed_ns(t);
    }
    Ok(next)
}

/// Exact projected-gradient iteration without encryption.
pub fn run_plain(problem: &ProblemInstance, iterations: usize) -> Result<RunResult, ProtocolError> {
    let mut run = RunResult::start(Scheme::Plain, problem);
    for k in 0..iterations {
        let x = run.trajectory[k].clone();
        let mut times = vec![PhaseTimes::default(); problem.num_agents()];
        let t = Instant::now();
        let phi = problem.eval_gradients(&x)?;
        let per_agent = elapsed_ns(t) / problem.num_agents() as u64;
        times.iter_mut().for_each(|p| p.eval = per_agent);
        let next = update_all(problem, &x, k, &phi, &mut times)?;
        run.gradients.push(phi.into_iter().flatten().collect());
        run.trajectory.push(next);
        run.timings.push(times);
    }
    Ok(run)
}

/// Per-step deviation between two runs of the same problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    /// Exact squared Euclidean distance at each step.
    pub squared: Vec<ScaledDecimal>,
    /// The same distances as floating-point norms, for display.
    pub norms: Vec<f64>,
}

impl DeviationReport {
    pub fn is_zero(&self) -> bool {
        self.squared.iter().all(ScaledDecimal::is_zero)
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    /// First step with a nonzero deviation.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.squared.iter().position(|d| !d.is_zero())
    }
}

pub fn compare_runs(a: &RunResult, b: &RunResult) -> Result<DeviationReport, ProtocolError> {
    if a.trajectory.len() != b.trajectory.len() {
        return Err(ProtocolError::ShapeMismatch(format!(
            "{} vs {} steps",
            a.trajectory.len(),
            b.trajectory.len()
        )));
    }
    if a.dims != b.dims {
        return Err(ProtocolError::ShapeMismatch(format!(
            "dimensions {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    let squared: Vec<ScaledDecimal> = a
        .trajectory
        .iter()
        .zip(&b.trajectory)
        .map(|(u, v)| {
            u.iter()
                .zip(v)
                .map(|(p, q)| {
                    let d = p - q;
                    &d * &d
                })
                .sum::<ScaledDecimal>()
                .reduced()
        })
        .collect();
    let norms = squared.iter().map(|s| s.to_f64().sqrt()).collect();
    Ok(DeviationReport { squared, norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::dec;
    use crate::problem::{FeasibleSet, ProblemBuilder, Rounding};

    /// Phi_1 = -x2 - x3, Phi_2 = -2 x3, Phi_3 = -x1 with unit step.
    fn linear_three_agents(x0: [i64; 3]) -> ProblemInstance {
        let mut b = ProblemBuilder::new(0);
        for v in x0 {
            b.add_agent(FeasibleSet::AllReals { dim: 1 }, vec![ScaledDecimal::from_integer(v)]);
        }
        let (x1, x2, x3) = (b.x(0, 0), b.x(1, 0), b.x(2, 0));
        b.set_gradient(0, 0, -&(&x2 + &x3));
        b.set_gradient(1, 0, x3.scale(&dec("-2")));
        b.set_gradient(2, 0, -&x1);
        b.rounding(Rounding::Exact);
        b.build().unwrap()
    }

    #[test]
    fn plain_run_matches_hand_iteration() {
        let p = linear_three_agents([1, -2, 3]);
        let run = run_plain(&p, 3).unwrap();
        let (mut a, mut b, mut c) = (1i64, -2i64, 3i64);
        for k in 0..=3 {
            let expect: Vec<ScaledDecimal> = [a, b, c].iter().map(|&v| ScaledDecimal::from_integer(v)).collect();
            assert_eq!(run.trajectory[k], expect);
            (a, b, c) = (a + b + c, b + 2 * c, c + a);
        }
        assert_eq!(run.iterations(), 3);
    }

    #[test]
    fn zero_iterations_keep_initial_state() {
        let p = linear_three_agents([4, 5, 6]);
        let run = run_plain(&p, 0).unwrap();
        assert_eq!(run.trajectory, vec![p.initial_state()]);
        assert!(run.gradients.is_empty());
    }

    #[test]
    fn comparator_sanity() {
        let p = linear_three_agents([1, 2, 3]);
        let a = run_plain(&p, 2).unwrap();
        assert!(compare_runs(&a, &a).unwrap().is_zero());
        let q = linear_three_agents([1, 2, 4]);
        let b = run_plain(&q, 2).unwrap();
        let report = compare_runs(&a, &b).unwrap();
        assert_eq!(report.first_nonzero(), Some(0));
        assert_eq!(report.squared[0], dec("1"));
        let c = run_plain(&p, 3).unwrap();
        assert!(matches!(compare_runs(&a, &c), Err(ProtocolError::ShapeMismatch(_))));
    }
}
