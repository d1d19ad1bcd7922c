use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::ProblemError;
use crate::fixedpoint::ScaledDecimal;

/// Local constraint set of an agent. Projection is Euclidean, which for all
/// supported shapes reduces to a coordinatewise clamp.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    AllReals {
        dim: usize,
    },
    NonNegativeOrthant {
        dim: usize,
    },
    /// Per-coordinate bounds; `None` leaves that side unbounded.
    Box {
        lo: Vec<Option<ScaledDecimal>>,
        hi: Vec<Option<ScaledDecimal>>,
    },
}

fn clamp<T: Ord + Clone>(v: &T, lo: Option<&T>, hi: Option<&T>) -> T {
    if let Some(lo) = lo {
        if v < lo {
            return lo.clone();
        }
    }
    if let Some(hi) = hi {
        if v > hi {
            return hi.clone();
        }
    }
    v.clone()
}

impl FeasibleSet {
    pub fn bounded(lo: Vec<ScaledDecimal>, hi: Vec<ScaledDecimal>) -> Self {
        FeasibleSet::Box {
            lo: lo.into_iter().map(Some).collect(),
            hi: hi.into_iter().map(Some).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::AllReals { dim } | FeasibleSet::NonNegativeOrthant { dim } => *dim,
            FeasibleSet::Box { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if let FeasibleSet::Box { lo, hi } = self {
            if lo.len() != hi.len() {
                return Err(ProblemError::DimensionMismatch {
                    what: "box bounds",
                    expected: lo.len(),
                    got: hi.len(),
                });
            }
            for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
                if let (Some(l), Some(h)) = (l, h) {
                    if l > h {
                        return Err(ProblemError::ConfigInvalid(format!(
                            "box coordinate {i}: lower bound {l} exceeds upper bound {h}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Lower and upper bound of coordinate `i`.
    pub fn bounds(&self, i: usize) -> (Option<ScaledDecimal>, Option<ScaledDecimal>) {
        match self {
            FeasibleSet::AllReals { .. } => (None, None),
            FeasibleSet::NonNegativeOrthant { .. } => (Some(ScaledDecimal::zero()), None),
            FeasibleSet::Box { lo, hi } => (lo[i].clone(), hi[i].clone()),
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), ProblemError> {
        if got != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                what: "projected vector",
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    pub fn project(&self, z: &[ScaledDecimal]) -> Result<Vec<ScaledDecimal>, ProblemError> {
        self.check_dim(z.len())?;
        Ok(z.iter()
            .enumerate()
            .map(|(i, v)| {
                let (lo, hi) = self.bounds(i);
                clamp(v, lo.as_ref(), hi.as_ref())
            })
            .collect())
    }

    pub fn project_rational(&self, z: &[BigRational]) -> Result<Vec<BigRational>, ProblemError> {
        self.check_dim(z.len())?;
        Ok(z.iter()
            .enumerate()
            .map(|(i, v)| {
                let (lo, hi) = self.bounds(i);
                let lo = lo.map(|b| b.to_rational());
                let hi = hi.map(|b| b.to_rational());
                clamp(v, lo.as_ref(), hi.as_ref())
            })
            .collect())
    }

    pub fn contains(&self, z: &[ScaledDecimal]) -> bool {
        z.len() == self.dim()
            && z.iter().enumerate().all(|(i, v)| {
                let (lo, hi) = self.bounds(i);
                lo.is_none_or(|l| *v >= l) && hi.is_none_or(|h| *v <= h)
            })
    }
}

/// `P_X[x - gamma * phi]`, computed exactly.
pub fn gradient_update(
    x: &[ScaledDecimal],
    gamma: &ScaledDecimal,
    phi: &[ScaledDecimal],
    set: &FeasibleSet,
) -> Result<Vec<ScaledDecimal>, ProblemError> {
    if x.len() != phi.len() {
        return Err(ProblemError::DimensionMismatch {
            what: "gradient",
            expected: x.len(),
            got: phi.len(),
        });
    }
    if *gamma <= ScaledDecimal::zero() {
        return Err(ProblemError::ConfigInvalid(format!(
            "step size {gamma} is not positive"
        )));
    }
    let step: Vec<ScaledDecimal> = x.iter().zip(phi).map(|(xi, p)| xi - &(gamma * p)).collect();
    set.project(&step)
}
