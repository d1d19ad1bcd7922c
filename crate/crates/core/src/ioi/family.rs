use std::collections::BTreeSet;
use std::ops::Range;

use num_traits::Zero;

use super::linalg::{dot, Matrix, Q};
use super::IoiError;
use crate::problem::{FeasibleSet, ProblemInstance, StepSchedule};
use crate::protocol::RunResult;

/// `Phi_{jl}(x) = x^T H x + A x + B` over the stacked state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticRow {
    pub h: Matrix,
    pub a: Vec<Q>,
    pub b: Q,
}

impl QuadraticRow {
    pub fn affine(a: Vec<Q>, b: Q) -> Self {
        let n = a.len();
        QuadraticRow {
            h: Matrix::zeros(n, n),
            a,
            b,
        }
    }

    /// Value at `x` with the constant replaced by `b`.
    pub fn eval_with(&self, x: &[Q], b: &Q) -> Q {
        self.h.quadratic_form(x) + dot(&self.a, x) + b
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        self.eval_with(x, &self.b)
    }
}

/// Quadratic joint functions of all agents together with which constants
/// each agent knows. `Omega_i` is the set of rows whose `B` agent `i` knows;
/// `Omega'_i` is its complement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticFamily {
    dims: Vec<usize>,
    rows: Vec<Vec<QuadraticRow>>,
    known: Vec<BTreeSet<(usize, usize)>>,
}

impl QuadraticFamily {
    /// `rows[j][l]` is `Phi_{jl}`; `known[i]` lists the `(j, l)` whose constant
    /// agent `i` knows.
    pub fn new(
        dims: Vec<usize>,
        rows: Vec<Vec<QuadraticRow>>,
        known: Vec<BTreeSet<(usize, usize)>>,
    ) -> Result<Self, IoiError> {
        let n: usize = dims.iter().sum();
        let mismatch = |what, expected, got| IoiError::DimensionMismatch { what, expected, got };
        if rows.len() != dims.len() {
            return Err(mismatch("agents with rows", dims.len(), rows.len()));
        }
        if known.len() != dims.len() {
            return Err(mismatch("knowledge sets", dims.len(), known.len()));
        }
        for (j, agent_rows) in rows.iter().enumerate() {
            if agent_rows.len() != dims[j] {
                return Err(mismatch("rows of an agent", dims[j], agent_rows.len()));
            }
            for row in agent_rows {
                if row.a.len() != n {
                    return Err(mismatch("affine weight length", n, row.a.len()));
                }
                if row.h.rows() != n || row.h.cols() != n {
                    return Err(mismatch("quadratic weight size", n, row.h.rows().max(row.h.cols())));
                }
            }
        }
        for set in &known {
            if let Some(&(j, l)) = set.iter().find(|&&(j, l)| j >= dims.len() || l >= dims[j]) {
                return Err(IoiError::InvalidFamily(format!(
                    "knowledge entry ({}, {}) names no row",
                    j + 1,
                    l + 1
                )));
            }
        }
        Ok(QuadraticFamily { dims, rows, known })
    }

    /// Every agent knows every constant.
    pub fn all_known(dims: Vec<usize>, rows: Vec<Vec<QuadraticRow>>) -> Result<Self, IoiError> {
        let all: BTreeSet<(usize, usize)> = dims
            .iter()
            .enumerate()
            .flat_map(|(j, &d)| (0..d).map(move |l| (j, l)))
            .collect();
        let known = vec![all; dims.len()];
        QuadraticFamily::new(dims, rows, known)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_agents(&self) -> usize {
        self.dims.len()
    }

    pub fn n(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn agent_range(&self, j: usize) -> Range<usize> {
        let start: usize = self.dims[..j].iter().sum();
        start..start + self.dims[j]
    }

    /// Agent owning stacked coordinate `v`.
    pub fn owner_of(&self, v: usize) -> usize {
        let mut acc = 0;
        for (j, &d) in self.dims.iter().enumerate() {
            acc += d;
            if v < acc {
                return j;
            }
        }
        panic!("coordinate {v} out of range")
    }

    pub fn row(&self, j: usize, l: usize) -> &QuadraticRow {
        &self.rows[j][l]
    }

    pub fn row_mut(&mut self, j: usize, l: usize) -> &mut QuadraticRow {
        &mut self.rows[j][l]
    }

    /// All `(j, l)` in lexicographic order.
    pub fn indices(&self) -> Vec<(usize, usize)> {
        self.dims
            .iter()
            .enumerate()
            .flat_map(|(j, &d)| (0..d).map(move |l| (j, l)))
            .collect()
    }

    pub fn knows(&self, i: usize, jl: (usize, usize)) -> bool {
        self.known[i].contains(&jl)
    }

    pub fn known(&self, i: usize) -> &BTreeSet<(usize, usize)> {
        &self.known[i]
    }

    pub fn omega(&self, i: usize) -> Vec<(usize, usize)> {
        self.indices().into_iter().filter(|&jl| self.knows(i, jl)).collect()
    }

    pub fn omega_prime(&self, i: usize) -> Vec<(usize, usize)> {
        self.indices().into_iter().filter(|&jl| !self.knows(i, jl)).collect()
    }

    pub fn is_affine(&self) -> bool {
        self.rows.iter().flatten().all(|r| r.h.is_zero())
    }

    /// Stacked gradient `Phi(x)`.
    pub fn eval(&self, x: &[Q]) -> Vec<Q> {
        self.rows.iter().flatten().map(|r| r.eval(x)).collect()
    }

    /// Reads `H`, `A` and `B` off a problem whose gradients have state degree
    /// at most two, with coefficient values substituted. Agent `i` knows
    /// `B_{jl}` when it holds every coefficient in the state-free terms.
    pub fn from_problem(problem: &ProblemInstance) -> Result<Self, IoiError> {
        let n = problem.n();
        let values: Vec<Q> = problem.coefficient_values().iter().map(|c| c.to_rational()).collect();
        let mut rows = Vec::new();
        let mut known = vec![BTreeSet::new(); problem.num_agents()];
        for j in 0..problem.num_agents() {
            let mut agent_rows = Vec::new();
            for (l, poly) in problem.gradients(j).iter().enumerate() {
                let mut row = QuadraticRow::affine(vec![Q::zero(); n], Q::zero());
                let mut constant_coefs = BTreeSet::new();
                for mono in poly.monomials() {
                    let mut w = mono.literal.to_rational();
                    for (&c, &e) in &mono.y {
                        for _ in 0..e {
                            w *= &values[c];
                        }
                    }
                    let vars: Vec<usize> = mono
                        .x
                        .iter()
                        .flat_map(|(&v, &e)| std::iter::repeat_n(v, e as usize))
                        .collect();
                    match vars.as_slice() {
                        [] => {
                            row.b += w;
                            constant_coefs.extend(mono.y.keys().copied());
                        }
                        [v] => row.a[*v] += w,
                        [u, v] => {
                            let cur = row.h.get(*u, *v) + w;
                            row.h.set(*u, *v, cur);
                        }
                        _ => {
                            return Err(IoiError::NotQuadratic {
                                agent: j,
                                row: l,
                                degree: mono.state_degree(),
                            })
                        }
                    }
                }
                for (i, set) in known.iter_mut().enumerate() {
                    let holds = constant_coefs.iter().all(|&c| {
                        problem.coefficients()[c]
                            .owners
                            .contains(&crate::problem::Participant::agent(i))
                    });
                    if holds {
                        set.insert((j, l));
                    }
                }
                agent_rows.push(row);
            }
            rows.push(agent_rows);
        }
        QuadraticFamily::new(problem.dims(), rows, known)
    }
}

/// Everything besides the gradients that drives the iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dynamics {
    pub feasible_sets: Vec<FeasibleSet>,
    pub step: StepSchedule,
    pub initial_state: Vec<Q>,
}

impl Dynamics {
    pub fn from_problem(problem: &ProblemInstance) -> Self {
        Dynamics {
            feasible_sets: problem.agents().iter().map(|a| a.feasible_set.clone()).collect(),
            step: problem.step().clone(),
            initial_state: problem.initial_state().iter().map(|v| v.to_rational()).collect(),
        }
    }

    pub fn gamma(&self, k: usize) -> Result<Q, IoiError> {
        Ok(self.step.gamma(k)?.to_rational())
    }

    fn check(&self, family: &QuadraticFamily) -> Result<(), IoiError> {
        if self.feasible_sets.len() != family.num_agents() {
            return Err(IoiError::DimensionMismatch {
                what: "feasible sets",
                expected: family.num_agents(),
                got: self.feasible_sets.len(),
            });
        }
        for (j, set) in self.feasible_sets.iter().enumerate() {
            if set.dim() != family.dims()[j] {
                return Err(IoiError::DimensionMismatch {
                    what: "feasible set dimension",
                    expected: family.dims()[j],
                    got: set.dim(),
                });
            }
        }
        if self.initial_state.len() != family.n() {
            return Err(IoiError::DimensionMismatch {
                what: "initial state",
                expected: family.n(),
                got: self.initial_state.len(),
            });
        }
        Ok(())
    }
}

/// Stacked states `x(0..=K)` of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<Vec<Q>>,
}

impl Trajectory {
    pub fn from_run(run: &RunResult) -> Self {
        Trajectory {
            states: run
                .trajectory
                .iter()
                .map(|x| x.iter().map(|v| v.to_rational()).collect())
                .collect(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Exact projected-gradient iteration of `family` for `iterations` steps.
pub fn simulate(family: &QuadraticFamily, dynamics: &Dynamics, iterations: usize) -> Result<Trajectory, IoiError> {
    dynamics.check(family)?;
    let mut states = vec![dynamics.initial_state.clone()];
    for k in 0..iterations {
        let x = &states[k];
        let gamma = dynamics.gamma(k)?;
        let phi = family.eval(x);
        let mut next = Vec::with_capacity(x.len());
        for j in 0..family.num_agents() {
            let range = family.agent_range(j);
            let z: Vec<Q> = range.clone().map(|v| &x[v] - &gamma * &phi[v]).collect();
            next.extend(dynamics.feasible_sets[j].project_rational(&z)?);
        }
        states.push(next);
    }
    Ok(Trajectory { states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::dec;
    use crate::golden;
    use crate::ioi::linalg::q;
    use crate::problem::{Participant, ProblemBuilder};

    #[test]
    fn reads_weights_off_a_problem() {
        let mut b = ProblemBuilder::new(2);
        b.add_agent(FeasibleSet::AllReals { dim: 1 }, vec![dec("1")]);
        b.add_agent(FeasibleSet::AllReals { dim: 1 }, vec![dec("2")]);
        let c = b.add_coefficient("c", dec("0.5"), &[Participant(2)]);
        let (x1, x2) = (b.x(0, 0), b.x(1, 0));
        let phi = &(&(&b.lit(dec("3")) * &(&x1 * &x2)) + &x2) + &b.y(c);
        b.set_gradient(0, 0, phi);
        b.set_gradient(1, 0, b.lit(dec("-1")));
        let p = b.build().unwrap();
        let f = QuadraticFamily::from_problem(&p).unwrap();
        assert_eq!(*f.row(0, 0).h.get(0, 1), q(3));
        assert_eq!(f.row(0, 0).a, vec![q(0), q(1)]);
        assert_eq!(f.row(0, 0).b, Q::new(1.into(), 2.into()));
        assert!(!f.knows(0, (0, 0)));
        assert!(f.knows(1, (0, 0)));
        assert!(f.knows(0, (1, 0)) && f.knows(1, (1, 0)));
        assert_eq!(f.eval(&[q(1), q(2)]), vec![Q::new(17.into(), 2.into()), q(-1)]);
    }

    #[test]
    fn cubic_gradients_are_rejected() {
        let p = golden::polynomial_problem();
        assert!(QuadraticFamily::from_problem(&p).is_ok());
        let mut b = ProblemBuilder::new(0);
        b.add_agent(FeasibleSet::AllReals { dim: 1 }, vec![dec("1")]);
        let x = b.x(0, 0);
        b.set_gradient(0, 0, &(&x * &x) * &x);
        let err = QuadraticFamily::from_problem(&b.build().unwrap()).unwrap_err();
        assert!(matches!(err, IoiError::NotQuadratic { degree: 3, .. }));
    }

    #[test]
    fn simulation_matches_the_plain_protocol_run() {
        let p = golden::affine_problem();
        let f = QuadraticFamily::from_problem(&p).unwrap();
        let d = Dynamics::from_problem(&p);
        let sim = simulate(&f, &d, 1).unwrap();
        let run = crate::protocol::run_plain(&p, 1).unwrap();
        assert_eq!(sim, Trajectory::from_run(&run));
    }

    #[test]
    fn malformed_families_are_rejected() {
        let row = QuadraticRow::affine(vec![q(1)], q(0));
        assert!(QuadraticFamily::all_known(vec![1, 1], vec![vec![row.clone()], vec![row.clone()]]).is_err());
        let known = vec![BTreeSet::from([(0, 3)])];
        assert!(QuadraticFamily::new(vec![1], vec![vec![row]], known).is_err());
    }
}
