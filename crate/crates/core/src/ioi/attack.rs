use num_traits::Zero;

use super::family::QuadraticFamily;
use super::linalg::{LinearSolution, Matrix, Q};
use super::IoiError;

/// Unconstrained affine iteration `x(k+1) = x(k) - gamma (A x(k) + b)` with
/// every weight public.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSystem {
    pub dims: Vec<usize>,
    pub a: Matrix,
    pub b: Vec<Q>,
    pub gamma: Q,
}

impl LinearSystem {
    pub fn from_family(family: &QuadraticFamily, gamma: Q) -> Result<Self, IoiError> {
        if !family.is_affine() {
            return Err(IoiError::InvalidFamily(
                "the linear attack needs affine gradients".into(),
            ));
        }
        let n = family.n();
        let mut a = Matrix::zeros(0, n);
        let mut b = Vec::with_capacity(n);
        for (j, l) in family.indices() {
            let row = family.row(j, l);
            a.push_row(row.a.clone());
            b.push(row.b.clone());
        }
        Ok(LinearSystem {
            dims: family.dims().to_vec(),
            a,
            b,
            gamma,
        })
    }

    fn n(&self) -> usize {
        self.dims.iter().sum()
    }

    fn range(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.dims[..j].iter().sum();
        start..start + self.dims[j]
    }

    /// `(M, c)` with `x(k+1) = M x(k) + c`.
    fn step_map(&self) -> (Matrix, Vec<Q>) {
        let n = self.n();
        let mut m = Matrix::identity(n);
        for r in 0..n {
            for c in 0..n {
                let v = m.get(r, c) - &self.gamma * self.a.get(r, c);
                m.set(r, c, v);
            }
        }
        let c = self.b.iter().map(|v| -(&self.gamma * v)).collect();
        (m, c)
    }

    /// Iterates from `x0` for `steps` steps.
    pub fn trajectory(&self, x0: &[Q], steps: usize) -> Vec<Vec<Q>> {
        let (m, c) = self.step_map();
        let mut out = vec![x0.to_vec()];
        for _ in 0..steps {
            let next = m.mul_vec(out.last().unwrap());
            out.push(next.iter().zip(&c).map(|(a, b)| a + b).collect());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttackOutcome {
    /// The other agents' states at the first observed step.
    Unique(Vec<Q>),
    /// One particular solution plus the directions left undetermined.
    Underdetermined {
        particular: Vec<Q>,
        directions: Vec<Vec<Q>>,
    },
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackReport {
    /// `(agent, coordinate)` of each unknown.
    pub unknowns: Vec<(usize, usize)>,
    /// Equations in the unknowns, one per observed coordinate and step.
    pub equations: Matrix,
    pub rhs: Vec<Q>,
    pub rank: usize,
    pub outcome: AttackOutcome,
}

/// Recovers `x_{-i}(k)` from the adversary's own states
/// `observations[t] = x_i(k + t)`. Unrolling the iteration gives
/// `x(k+t) = M^t x(k) + s_t`, whose adversary rows are linear in the
/// unknowns.
pub fn linear_attack(system: &LinearSystem, i: usize, observations: &[Vec<Q>]) -> Result<AttackReport, IoiError> {
    let n = system.n();
    if system.a.rows() != n || system.a.cols() != n || system.b.len() != n {
        return Err(IoiError::MalformedObservations(
            "system weights do not match the state size".into(),
        ));
    }
    if i >= system.dims.len() {
        return Err(IoiError::MalformedObservations(format!("no agent {}", i + 1)));
    }
    let own = system.range(i);
    let Some(first) = observations.first() else {
        return Err(IoiError::MalformedObservations("at least x_i(k) is required".into()));
    };
    if let Some(bad) = observations.iter().find(|o| o.len() != own.len()) {
        return Err(IoiError::MalformedObservations(format!(
            "observation of length {}, expected {}",
            bad.len(),
            own.len()
        )));
    }
    let unknown_cols: Vec<usize> = (0..n).filter(|v| !own.contains(v)).collect();
    let unknowns = unknown_cols
        .iter()
        .map(|&v| {
            let j = (0..system.dims.len()).find(|&j| system.range(j).contains(&v)).unwrap();
            (j, v - system.range(j).start)
        })
        .collect();

    let (m, c) = system.step_map();
    let mut power = Matrix::identity(n);
    let mut offset = vec![Q::zero(); n];
    let mut equations = Matrix::zeros(0, unknown_cols.len());
    let mut rhs = Vec::new();
    for obs in &observations[1..] {
        power = m.mul(&power);
        offset = m.mul_vec(&offset).iter().zip(&c).map(|(a, b)| a + b).collect();
        for (r, observed) in own.clone().zip(obs) {
            equations.push_row(unknown_cols.iter().map(|&u| power.get(r, u).clone()).collect());
            let known: Q = own.clone().zip(first).map(|(v, x)| power.get(r, v) * x).sum();
            rhs.push(observed - known - &offset[r]);
        }
    }
    let rank = equations.rank();
    let outcome = match equations.solve(&rhs) {
        LinearSolution::Unique(x) => AttackOutcome::Unique(x),
        LinearSolution::Underdetermined { particular, directions } => {
            AttackOutcome::Underdetermined { particular, directions }
        }
        LinearSolution::Inconsistent => AttackOutcome::Inconsistent,
    };
    Ok(AttackReport {
        unknowns,
        equations,
        rhs,
        rank,
        outcome,
    })
}
