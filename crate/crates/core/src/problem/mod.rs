//! Problem model: gradient polynomials, coefficient ownership, feasible sets
//! and the projected-gradient update.

mod feasible;
mod file;
mod partition;
mod polynomial;

use std::collections::BTreeSet;

use thiserror::Error;

pub use feasible::{gradient_update, FeasibleSet};
pub use file::{ProblemFile, PROBLEM_SCHEMA};
pub use partition::{build_partition, CoefficientPartition, Participant};
pub use polynomial::{to_affine, AffineRow, Monomial, PolynomialFunction};

use crate::fixedpoint::{FixedPointError, ScaledDecimal};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("coefficient {0} has no owner")]
    UnownedCoefficient(usize),
    #[error("invalid coefficient partition: {0}")]
    InvalidPartition(String),
    #[error("gradient is not affine in the state (a monomial has state degree {degree})")]
    NotAffine { degree: u32 },
    #[error("invalid problem: {0}")]
    ConfigInvalid(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("step schedule has no entry for iteration {0}")]
    StepScheduleExhausted(usize),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Evaluates a gradient polynomial at state `x` with coefficient values `c`.
/// This exact evaluation is the reference for every encrypted path.
pub fn eval_plain(
    poly: &PolynomialFunction,
    x: &[ScaledDecimal],
    c: &[ScaledDecimal],
) -> Result<ScaledDecimal, ProblemError> {
    poly.eval(x, c)
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    Constant(ScaledDecimal),
    Table(Vec<ScaledDecimal>),
}

impl StepSchedule {
    pub fn gamma(&self, k: usize) -> Result<&ScaledDecimal, ProblemError> {
        match self {
            StepSchedule::Constant(g) => Ok(g),
            StepSchedule::Table(t) => t.get(k).ok_or(ProblemError::StepScheduleExhausted(k)),
        }
    }

    fn validate(&self) -> Result<(), ProblemError> {
        let values: Vec<&ScaledDecimal> = match self {
            StepSchedule::Constant(g) => vec![g],
            StepSchedule::Table(t) => t.iter().collect(),
        };
        match values.iter().find(|g| ***g <= ScaledDecimal::zero()) {
            Some(g) => Err(ProblemError::ConfigInvalid(format!("step size {g} is not positive"))),
            None => Ok(()),
        }
    }
}

/// What happens to a freshly updated state before the next iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Keep the exact update. Encrypted runs fail once a state carries more
    /// than `sigma` fraction digits.
    Exact,
    /// Round every updated state to `sigma` digits, half away from zero.
    #[default]
    Quantize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentSpec {
    pub feasible_set: FeasibleSet,
    pub initial_state: Vec<ScaledDecimal>,
}

impl AgentSpec {
    pub fn dim(&self) -> usize {
        self.initial_state.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coefficient {
    pub name: String,
    pub value: ScaledDecimal,
    pub owners: BTreeSet<Participant>,
}

/// A fully validated problem. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemInstance {
    sigma: u32,
    agents: Vec<AgentSpec>,
    offsets: Vec<usize>,
    coefficients: Vec<Coefficient>,
    partition: CoefficientPartition,
    gradients: Vec<Vec<PolynomialFunction>>,
    step: StepSchedule,
    rounding: Rounding,
}

impl ProblemInstance {
    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &AgentSpec {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    /// Total state dimension `n`.
    pub fn n(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0)
    }

    /// Number of coefficient variables `m`.
    pub fn m(&self) -> usize {
        self.coefficients.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.agents.iter().map(AgentSpec::dim).collect()
    }

    /// Global index of coordinate `l` of agent `i` in the stacked state.
    pub fn state_var(&self, i: usize, l: usize) -> usize {
        debug_assert!(l < self.agents[i].dim());
        self.offsets[i] + l
    }

    pub fn agent_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn coefficients(&self) -> &[Coefficient] {
        &self.coefficients
    }

    pub fn coefficient_values(&self) -> Vec<ScaledDecimal> {
        self.coefficients.iter().map(|c| c.value.clone()).collect()
    }

    pub fn partition(&self) -> &CoefficientPartition {
        &self.partition
    }

    pub fn gradient(&self, i: usize, l: usize) -> &PolynomialFunction {
        &self.gradients[i][l]
    }

    pub fn gradients(&self, i: usize) -> &[PolynomialFunction] {
        &self.gradients[i]
    }

    pub fn step(&self) -> &StepSchedule {
        &self.step
    }

    pub fn rounding(&self) -> Rounding {
        self.rounding
    }

    pub fn initial_state(&self) -> Vec<ScaledDecimal> {
        self.agents
            .iter()
            .flat_map(|a| a.initial_state.iter().cloned())
            .collect()
    }

    /// Exact `Phi_i(x)` for every agent.
    pub fn eval_gradients(&self, x: &[ScaledDecimal]) -> Result<Vec<Vec<ScaledDecimal>>, ProblemError> {
        let c = self.coefficient_values();
        self.gradients
            .iter()
            .map(|rows| rows.iter().map(|p| eval_plain(p, x, &c)).collect())
            .collect()
    }

    /// Affine form of every gradient row with coefficient values substituted.
    pub fn affine_rows(&self) -> Result<Vec<Vec<AffineRow>>, ProblemError> {
        let c = self.coefficient_values();
        self.gradients
            .iter()
            .map(|rows| rows.iter().map(|p| to_affine(p, &c)).collect())
            .collect()
    }

    pub fn is_affine(&self) -> bool {
        self.gradients.iter().flatten().all(|p| p.state_degree() <= 1)
    }

    /// One projected-gradient step for agent `i`, followed by the rounding
    /// policy.
    pub fn local_update(
        &self,
        i: usize,
        x_i: &[ScaledDecimal],
        k: usize,
        phi_i: &[ScaledDecimal],
    ) -> Result<Vec<ScaledDecimal>, ProblemError> {
        let gamma = self.step.gamma(k)?;
        let next = gradient_update(x_i, gamma, phi_i, &self.agents[i].feasible_set)?;
        // bounds carry at most sigma digits, so rounding stays inside the set
        Ok(match self.rounding {
            Rounding::Exact => next,
            Rounding::Quantize => next.iter().map(|v| v.quantize(self.sigma)).collect(),
        })
    }
}

/// Incremental construction of a [`ProblemInstance`]: declare agents and
/// coefficients first, then attach gradient polynomials over the resulting
/// `(n, m)` variable space.
#[derive(Clone, Debug)]
pub struct ProblemBuilder {
    sigma: u32,
    agents: Vec<AgentSpec>,
    coefficients: Vec<Coefficient>,
    gradients: Vec<Vec<Option<PolynomialFunction>>>,
    step: StepSchedule,
    rounding: Rounding,
    partition: Option<Vec<Participant>>,
}

impl ProblemBuilder {
    pub fn new(sigma: u32) -> Self {
        ProblemBuilder {
            sigma,
            agents: Vec::new(),
            coefficients: Vec::new(),
            gradients: Vec::new(),
            step: StepSchedule::Constant(ScaledDecimal::one()),
            rounding: Rounding::default(),
            partition: None,
        }
    }

    /// Adds an agent and returns its zero-based index.
    pub fn add_agent(&mut self, feasible_set: FeasibleSet, initial_state: Vec<ScaledDecimal>) -> usize {
        self.gradients.push(vec![None; initial_state.len()]);
        self.agents.push(AgentSpec {
            feasible_set,
            initial_state,
        });
        self.agents.len() - 1
    }

    /// Adds a coefficient and returns its variable index.
    pub fn add_coefficient(&mut self, name: impl Into<String>, value: ScaledDecimal, owners: &[Participant]) -> usize {
        self.coefficients.push(Coefficient {
            name: name.into(),
            value,
            owners: owners.iter().copied().collect(),
        });
        self.coefficients.len() - 1
    }

    pub fn step(&mut self, step: StepSchedule) -> &mut Self {
        self.step = step;
        self
    }

    pub fn rounding(&mut self, rounding: Rounding) -> &mut Self {
        self.rounding = rounding;
        self
    }

    pub fn partition(&mut self, owner: Vec<Participant>) -> &mut Self {
        self.partition = Some(owner);
        self
    }

    pub fn n(&self) -> usize {
        self.agents.iter().map(AgentSpec::dim).sum()
    }

    pub fn m(&self) -> usize {
        self.coefficients.len()
    }

    pub fn state_var(&self, i: usize, l: usize) -> usize {
        self.agents[..i].iter().map(AgentSpec::dim).sum::<usize>() + l
    }

    /// `x_{i,l}` as a polynomial in the current variable space.
    pub fn x(&self, i: usize, l: usize) -> PolynomialFunction {
        PolynomialFunction::state(self.n(), self.m(), self.state_var(i, l))
    }

    /// `y_c` as a polynomial in the current variable space.
    pub fn y(&self, c: usize) -> PolynomialFunction {
        PolynomialFunction::coeff(self.n(), self.m(), c)
    }

    pub fn lit(&self, value: ScaledDecimal) -> PolynomialFunction {
        PolynomialFunction::constant(self.n(), self.m(), value)
    }

    pub fn set_gradient(&mut self, i: usize, l: usize, poly: PolynomialFunction) -> &mut Self {
        self.gradients[i][l] = Some(poly);
        self
    }

    pub fn build(self) -> Result<ProblemInstance, ProblemError> {
        let n = self.n();
        let m = self.m();
        if self.agents.is_empty() {
            return Err(ProblemError::ConfigInvalid("no agents".into()));
        }
        self.step.validate()?;
        let mut offsets = vec![0];
        for (i, agent) in self.agents.iter().enumerate() {
            agent.feasible_set.validate()?;
            if agent.feasible_set.dim() != agent.dim() {
                return Err(ProblemError::DimensionMismatch {
                    what: "feasible set",
                    expected: agent.dim(),
                    got: agent.feasible_set.dim(),
                });
            }
            if agent.dim() == 0 {
                return Err(ProblemError::ConfigInvalid(format!("agent {} has no state", i + 1)));
            }
            if !agent.feasible_set.contains(&agent.initial_state) {
                return Err(ProblemError::ConfigInvalid(format!(
                    "initial state of agent {} lies outside its feasible set",
                    i + 1
                )));
            }
            for l in 0..agent.dim() {
                let (lo, hi) = agent.feasible_set.bounds(l);
                for b in lo.iter().chain(hi.iter()) {
                    if b.fraction_digits() > self.sigma {
                        return Err(ProblemError::ConfigInvalid(format!(
                            "bound {b} of agent {} has more than {} fraction digits",
                            i + 1,
                            self.sigma
                        )));
                    }
                }
            }
            offsets.push(offsets[i] + agent.dim());
        }
        for coef in &self.coefficients {
            for owner in &coef.owners {
                if owner.0 as usize > self.agents.len() {
                    return Err(ProblemError::ConfigInvalid(format!(
                        "coefficient {} names unknown owner {}",
                        coef.name, owner
                    )));
                }
            }
            if coef.value.fraction_digits() > self.sigma {
                return Err(FixedPointError::PrecisionExceeded {
                    value: coef.value.to_string(),
                    digits: coef.value.fraction_digits(),
                    sigma: self.sigma,
                }
                .into());
            }
        }
        let ownership: Vec<BTreeSet<Participant>> = self.coefficients.iter().map(|c| c.owners.clone()).collect();
        let partition = match self.partition {
            Some(owner) => CoefficientPartition::from_assignment(&ownership, owner)?,
            None => build_partition(&ownership)?,
        };
        let gradients = self
            .gradients
            .into_iter()
            .map(|rows| {
                rows.into_iter()
                    .map(|p| {
                        let p = p.unwrap_or_else(|| PolynomialFunction::zero(n, m));
                        if p.state_dim() != n || p.coeff_dim() != m {
                            return Err(ProblemError::DimensionMismatch {
                                what: "gradient variable space",
                                expected: n,
                                got: p.state_dim(),
                            });
                        }
                        Ok(p)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProblemInstance {
            sigma: self.sigma,
            agents: self.agents,
            offsets,
            coefficients: self.coefficients,
            partition,
            gradients,
            step: self.step,
            rounding: self.rounding,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::dec;
    use num_rational::BigRational;
    use proptest::prelude::*;

    /// Phi_1 = c1 x1^2 + c2 x2^2 + c3 x1 x2 + c4 x1 + c5 with the values of
    /// the two-agent polynomial walkthrough.
    fn polynomial_example() -> ProblemInstance {
        let mut b = ProblemBuilder::new(2);
        let all = FeasibleSet::AllReals { dim: 1 };
        b.add_agent(all.clone(), vec![dec("0.76")]);
        b.add_agent(all, vec![dec("-2.35")]);
        let c1 = b.add_coefficient("c1", dec("3.32"), &[Participant(1)]);
        let c2 = b.add_coefficient("c2", dec("-1.53"), &[Participant(2)]);
        let c3 = b.add_coefficient("c3", dec("4.67"), &[Participant(1), Participant(2)]);
        let c4 = b.add_coefficient("c4", dec("-0.28"), &[Participant(1)]);
        let c5 = b.add_coefficient("c5", dec("2.42"), &[Participant::OPERATOR]);
        let (x1, x2) = (b.x(0, 0), b.x(1, 0));
        let phi = &(&(&(&b.y(c1) * &(&x1 * &x1)) + &(&b.y(c2) * &(&x2 * &x2))) + &(&b.y(c3) * &(&x1 * &x2)))
            + &(&(&b.y(c4) * &x1) + &b.y(c5));
        b.set_gradient(0, 0, phi);
        b.build().unwrap()
    }

    #[test]
    fn eval_plain_polynomial_example() {
        let p = polynomial_example();
        let phi = p.eval_gradients(&p.initial_state()).unwrap();
        assert_eq!(phi[0][0], dec("-12.665213"));
        assert_eq!(phi[1][0], dec("0"));
        assert_eq!(p.gradient(0, 0).degree(), 3);
        assert_eq!(p.partition().owned_by(Participant(1)), vec![0, 2, 3]);
        assert_eq!(p.partition().owned_by(Participant(2)), vec![1]);
    }

    #[test]
    fn eval_plain_affine_example() {
        let mut b = ProblemBuilder::new(2);
        let all = FeasibleSet::AllReals { dim: 1 };
        b.add_agent(all.clone(), vec![dec("1.36")]);
        b.add_agent(all, vec![dec("-1.42")]);
        let phi = &(&(&b.lit(dec("2.45")) * &b.x(0, 0)) + &(&b.lit(dec("-3.03")) * &b.x(1, 0))) + &b.lit(dec("5.22"));
        b.set_gradient(0, 0, phi);
        let p = b.build().unwrap();
        assert_eq!(p.eval_gradients(&p.initial_state()).unwrap()[0][0], dec("12.8546"));
        let rows = p.affine_rows().unwrap();
        assert_eq!(rows[0][0].a, vec![dec("2.45"), dec("-3.03")]);
        assert!(p.is_affine());
    }

    #[test]
    fn zero_polynomial_evaluates_to_zero() {
        let p = PolynomialFunction::zero(3, 2);
        assert!(eval_plain(&p, &[dec("1"), dec("2"), dec("3")], &[dec("1"), dec("1")])
            .unwrap()
            .is_zero());
    }

    #[test]
    fn builder_rejects_bad_input() {
        let mut b = ProblemBuilder::new(2);
        b.add_agent(FeasibleSet::NonNegativeOrthant { dim: 1 }, vec![dec("-1")]);
        assert!(b.build().is_err());

        let mut b = ProblemBuilder::new(2);
        b.add_agent(FeasibleSet::AllReals { dim: 1 }, vec![dec("1")]);
        b.add_coefficient("c", dec("0.123"), &[Participant(1)]);
        assert!(matches!(b.build(), Err(ProblemError::FixedPoint(_))));

        let mut b = ProblemBuilder::new(2);
        b.add_agent(FeasibleSet::AllReals { dim: 1 }, vec![dec("1")]);
        b.add_coefficient("c", dec("1"), &[]);
        assert!(matches!(b.build(), Err(ProblemError::UnownedCoefficient(0))));

        let mut b = ProblemBuilder::new(2);
        b.add_agent(FeasibleSet::AllReals { dim: 1 }, vec![dec("1")]);
        b.step(StepSchedule::Constant(dec("-0.1")));
        assert!(b.build().is_err());
    }

    #[test]
    fn quantized_update_rounds_to_sigma() {
        let mut b = ProblemBuilder::new(2);
        b.add_agent(FeasibleSet::AllReals { dim: 1 }, vec![dec("0.76")]);
        let p = b.build().unwrap();
        let next = p.local_update(0, &[dec("0.76")], 0, &[dec("-12.665213")]).unwrap();
        assert_eq!(next, vec![dec("13.43")]);
    }

    fn small() -> impl Strategy<Value = ScaledDecimal> {
        (-500i64..500, 0u32..3).prop_map(|(m, s)| ScaledDecimal::new(m, s))
    }

    proptest! {
        // Phi is linear in each coefficient variable: the second difference in
        // c1 vanishes exactly.
        #[test]
        fn eval_is_linear_in_each_coefficient(
            x in proptest::collection::vec(small(), 2),
            c in proptest::collection::vec(small(), 5),
            h in small(),
        ) {
            let p = polynomial_example();
            let poly = p.gradient(0, 0);
            let at = |v: ScaledDecimal| {
                let mut cc = c.clone();
                cc[0] = v;
                poly.eval(&x, &cc).unwrap().to_rational()
            };
            let c0 = c[0].clone();
            let second = at(&c0 + &(&h + &h)) - at(&c0 + &h) * BigRational::from_integer(2.into()) + at(c0.clone());
            prop_assert_eq!(second, BigRational::from_integer(0.into()));
        }
    }
}
