//! Random problem generators for property testing and benchmarking. Every
//! instance uses box feasible sets so that states, and therefore gradient
//! magnitudes, stay bounded over long runs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::fixedpoint::ScaledDecimal;
use crate::problem::{
    FeasibleSet, Monomial, Participant, PolynomialFunction, ProblemBuilder, ProblemInstance, Rounding, StepSchedule,
};

#[derive(Clone, Debug)]
pub struct RandomProblemSpec {
    pub max_agents: usize,
    pub max_dim: usize,
    pub max_coefficients: usize,
    pub max_degree: u32,
    pub max_state_degree: u32,
    pub max_monomials: usize,
    pub sigma: u32,
    /// Every state coordinate lives in `[-box_radius, box_radius]`.
    pub box_radius: i64,
}

impl RandomProblemSpec {
    /// Polynomial gradients of total degree at most 3.
    pub fn polynomial() -> Self {
        RandomProblemSpec {
            max_agents: 4,
            max_dim: 2,
            max_coefficients: 4,
            max_degree: 3,
            max_state_degree: 3,
            max_monomials: 4,
            sigma: 2,
            box_radius: 3,
        }
    }

    /// Gradients affine in the state.
    pub fn affine() -> Self {
        RandomProblemSpec {
            max_agents: 4,
            max_dim: 3,
            max_coefficients: 3,
            max_degree: 2,
            max_state_degree: 1,
            max_monomials: 4,
            sigma: 2,
            box_radius: 5,
        }
    }
}

/// Uniform decimal in `[-radius, radius]` with at most `digits` fraction
/// digits.
pub fn random_decimal<R: Rng + ?Sized>(rng: &mut R, radius: i64, digits: u32) -> ScaledDecimal {
    let scale = 10i64.pow(digits);
    ScaledDecimal::new(rng.gen_range(-radius * scale..=radius * scale), digits).reduced()
}

fn random_owners<R: Rng + ?Sized>(rng: &mut R, n_agents: usize) -> Vec<Participant> {
    let mut all: Vec<Participant> = (0..=n_agents as u32).map(Participant).collect();
    all.shuffle(rng);
    let k = rng.gen_range(1..=all.len().min(3));
    all.truncate(k);
    all
}

fn random_monomial<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, spec: &RandomProblemSpec) -> Monomial {
    let degree = rng.gen_range(0..=spec.max_degree);
    let mut x = BTreeMap::new();
    let mut y = BTreeMap::new();
    let mut state_left = spec.max_state_degree;
    for _ in 0..degree {
        let use_state = m == 0 || (state_left > 0 && rng.gen_bool(0.6));
        if use_state {
            if state_left == 0 {
                continue;
            }
            state_left -= 1;
            *x.entry(rng.gen_range(0..n)).or_insert(0) += 1;
        } else {
            *y.entry(rng.gen_range(0..m)).or_insert(0) += 1;
        }
    }
    let mut literal = rng.gen_range(-3i64..=3);
    if literal == 0 {
        literal = 1;
    }
    Monomial {
        x,
        y,
        literal: ScaledDecimal::from_integer(literal),
    }
}

/// Random instance following `spec`. Literals are integers and coefficient
/// values carry at most `sigma` digits, so the instance is admissible for
/// both encrypted protocols (the affine flavour also for the public-key one).
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, spec: &RandomProblemSpec) -> ProblemInstance {
    let sigma = spec.sigma;
    let n_agents = rng.gen_range(1..=spec.max_agents);
    let dims: Vec<usize> = (0..n_agents).map(|_| rng.gen_range(1..=spec.max_dim)).collect();
    let mut b = ProblemBuilder::new(sigma);
    for &dim in &dims {
        let lo = vec![ScaledDecimal::from_integer(-spec.box_radius); dim];
        let hi = vec![ScaledDecimal::from_integer(spec.box_radius); dim];
        let x0 = (0..dim).map(|_| random_decimal(rng, spec.box_radius, sigma)).collect();
        b.add_agent(FeasibleSet::bounded(lo, hi), x0);
    }
    let m = rng.gen_range(0..=spec.max_coefficients);
    for c in 0..m {
        let owners = random_owners(rng, n_agents);
        b.add_coefficient(format!("c{}", c + 1), random_decimal(rng, 2, sigma), &owners);
    }
    let (n, m) = (b.n(), b.m());
    for (i, &dim) in dims.iter().enumerate() {
        for l in 0..dim {
            let count = rng.gen_range(1..=spec.max_monomials);
            let monomials = (0..count).map(|_| random_monomial(rng, n, m, spec)).collect();
            let poly = PolynomialFunction::from_monomials(n, m, monomials).expect("indices in range");
            b.set_gradient(i, l, poly);
        }
    }
    let gammas = ["0.1", "0.05", "0.2", "0.01"];
    let pick = |rng: &mut R| gammas[rng.gen_range(0..gammas.len())].parse::<ScaledDecimal>().unwrap();
    if rng.gen_bool(0.5) {
        let g = pick(rng);
        b.step(StepSchedule::Constant(g));
    } else {
        let table = (0..64).map(|_| pick(rng)).collect();
        b.step(StepSchedule::Table(table));
    }
    b.rounding(Rounding::Quantize);
    b.build().expect("generated problem is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn generated_problems_respect_their_spec() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..50 {
            let p = random_problem(&mut rng, &RandomProblemSpec::polynomial());
            assert!((1..=4).contains(&p.num_agents()));
            for i in 0..p.num_agents() {
                assert!(p.gradients(i).iter().all(|g| g.degree() <= 3));
            }
            let q = random_problem(&mut rng, &RandomProblemSpec::affine());
            assert!(q.is_affine());
            assert!(q.affine_rows().is_ok());
        }
    }
}
