//! Random families that satisfy the null-space condition by construction.

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::Rng;

use super::family::{Dynamics, QuadraticFamily, QuadraticRow};
use super::file::Scenario;
use super::linalg::{dot, q, Matrix, Q};
use crate::fixedpoint::ScaledDecimal;
use crate::problem::{FeasibleSet, StepSchedule};

#[derive(Clone, Debug)]
pub struct PlantedSpec {
    pub max_agents: usize,
    pub max_dim: usize,
    /// Probability that a row has a quadratic part.
    pub quadratic_probability: f64,
    pub iterations: usize,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            max_agents: 4,
            max_dim: 3,
            quadratic_probability: 0.5,
            iterations: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlantedFamily {
    pub family: QuadraticFamily,
    pub adversary: usize,
    /// The perturbation the family was built around.
    pub planted: Vec<Vec<Q>>,
    pub scenario: Scenario,
}

fn nonzero<R: Rng + ?Sized>(rng: &mut R, radius: i64) -> Q {
    let mut v = 0;
    while v == 0 {
        v = rng.gen_range(-radius..=radius);
    }
    q(v)
}

/// Quadratic weight whose symmetric part annihilates every embedded block
/// `e_v`: `H = Q^T R Q / 2` with the rows of `Q` orthogonal to each `e_v`.
fn planted_h<R: Rng + ?Sized>(rng: &mut R, n: usize, blocks: &[Vec<Q>]) -> Matrix {
    let k = rng.gen_range(1..=n);
    let mut qm = Matrix::zeros(k, n);
    for r in 0..k {
        let mut row: Vec<Q> = (0..n).map(|_| q(rng.gen_range(-2..=2))).collect();
        // blocks have disjoint supports, so one pass removes every component
        for e in blocks {
            let ee = dot(e, e);
            let re = dot(&row, e);
            row = row.iter().zip(e).map(|(x, y)| x * &ee - &re * y).collect();
        }
        for (c, v) in row.into_iter().enumerate() {
            qm.set(r, c, v);
        }
    }
    let mut rm = Matrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = q(rng.gen_range(-2..=2));
            rm.set(a, b, v.clone());
            rm.set(b, a, v);
        }
    }
    let s = qm.transpose().mul(&rm).mul(&qm);
    let mut h = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            h.set(r, c, s.get(r, c) / q(2));
        }
    }
    h
}

pub fn planted_family<R: Rng + ?Sized>(rng: &mut R, spec: &PlantedSpec) -> PlantedFamily {
    let n_agents = rng.gen_range(2..=spec.max_agents.max(2));
    let dims: Vec<usize> = (0..n_agents).map(|_| rng.gen_range(1..=spec.max_dim)).collect();
    let n: usize = dims.iter().sum();
    let adversary = rng.gen_range(0..n_agents);
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &d| {
            let s = *acc;
            *acc += d;
            Some(s)
        })
        .collect();

    let planted: Vec<Vec<Q>> = dims
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            (0..d)
                .map(|_| if j == adversary { Q::zero() } else { nonzero(rng, 3) })
                .collect()
        })
        .collect();
    let flat: Vec<Q> = planted.iter().flatten().cloned().collect();
    let blocks: Vec<Vec<Q>> = (0..n_agents)
        .filter(|&v| v != adversary)
        .map(|v| {
            let mut e = vec![Q::zero(); n];
            for l in 0..dims[v] {
                e[offsets[v] + l] = planted[v][l].clone();
            }
            e
        })
        .collect();
    let benign_cols: Vec<usize> = (0..n).filter(|&c| !flat[c].is_zero()).collect();

    let mut known = vec![BTreeSet::new(); n_agents];
    let mut rows = Vec::new();
    for (j, &d) in dims.iter().enumerate() {
        let mut agent_rows = Vec::new();
        for l in 0..d {
            let adversary_knows = rng.gen_bool(0.5);
            let mut a: Vec<Q> = (0..n).map(|_| q(rng.gen_range(-3..=3))).collect();
            if adversary_knows {
                // solve one benign column so that A delta = 0
                let c = benign_cols[rng.gen_range(0..benign_cols.len())];
                a[c] = Q::zero();
                let rest = dot(&a, &flat);
                a[c] = -rest / &flat[c];
                known[adversary].insert((j, l));
            }
            for (other, set) in known.iter_mut().enumerate() {
                if other == j && other != adversary {
                    set.insert((j, l));
                }
            }
            let h = if rng.gen_bool(spec.quadratic_probability) {
                planted_h(rng, n, &blocks)
            } else {
                Matrix::zeros(n, n)
            };
            agent_rows.push(QuadraticRow {
                h,
                a,
                b: q(rng.gen_range(-5..=5)),
            });
        }
        rows.push(agent_rows);
    }
    let family = QuadraticFamily::new(dims.clone(), rows, known).expect("generated family is consistent");

    let feasible_sets = dims
        .iter()
        .map(|&d| {
            FeasibleSet::bounded(
                vec![ScaledDecimal::from_integer(-5); d],
                vec![ScaledDecimal::from_integer(5); d],
            )
        })
        .collect();
    let initial_state = (0..n)
        .map(|_| Q::new(rng.gen_range(-20..=20).into(), 10.into()))
        .collect();
    let scenario = Scenario {
        dynamics: Dynamics {
            feasible_sets,
            step: StepSchedule::Constant(ScaledDecimal::new(5, 2)),
            initial_state,
        },
        iterations: spec.iterations,
    };
    PlantedFamily {
        family,
        adversary,
        planted,
        scenario,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ioi::shadow::validate_delta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn planted_perturbations_are_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..30 {
            let p = planted_family(&mut rng, &PlantedSpec::default());
            validate_delta(&p.family, p.adversary, &p.planted, false).unwrap();
        }
    }
}
