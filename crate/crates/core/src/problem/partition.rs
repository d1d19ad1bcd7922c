use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ProblemError;

/// Identity index of a participant. The system operator is `0`, agents are
/// `1..=N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Participant(pub u32);

impl Participant {
    pub const OPERATOR: Participant = Participant(0);

    pub fn agent(i: usize) -> Participant {
        Participant(i as u32 + 1)
    }

    pub fn is_operator(self) -> bool {
        self.0 == 0
    }

    /// Zero-based agent index, `None` for the operator.
    pub fn agent_index(self) -> Option<usize> {
        (self.0 > 0).then(|| self.0 as usize - 1)
    }
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_operator() {
            write!(f, "SO")
        } else {
            write!(f, "agent{}", self.0)
        }
    }
}

/// Unique owner per coefficient, so that every coefficient is encrypted
/// exactly once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientPartition {
    owner: Vec<Participant>,
}

impl CoefficientPartition {
    pub fn owner(&self, coeff: usize) -> Participant {
        self.owner[coeff]
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    /// Coefficient ids assigned to `p`, in increasing order.
    pub fn owned_by(&self, p: Participant) -> Vec<usize> {
        (0..self.owner.len()).filter(|&c| self.owner[c] == p).collect()
    }

    pub fn as_map(&self) -> BTreeMap<usize, Participant> {
        self.owner.iter().copied().enumerate().collect()
    }

    /// Accepts an explicit assignment after checking it against the
    /// ownership sets: operator coefficients stay with the operator, agent
    /// assignments respect ownership, and every coefficient has exactly one
    /// owner.
    pub fn from_assignment(ownership: &[BTreeSet<Participant>], owner: Vec<Participant>) -> Result<Self, ProblemError> {
        if owner.len() != ownership.len() {
            return Err(ProblemError::DimensionMismatch {
                what: "partition",
                expected: ownership.len(),
                got: owner.len(),
            });
        }
        for (c, (owners, assigned)) in ownership.iter().zip(&owner).enumerate() {
            if owners.is_empty() {
                return Err(ProblemError::UnownedCoefficient(c));
            }
            if !owners.contains(assigned) {
                return Err(ProblemError::InvalidPartition(format!(
                    "coefficient {c} assigned to {assigned}, which does not hold it"
                )));
            }
            if owners.contains(&Participant::OPERATOR) && !assigned.is_operator() {
                return Err(ProblemError::InvalidPartition(format!(
                    "coefficient {c} is held by the operator but assigned to {assigned}"
                )));
            }
        }
        Ok(CoefficientPartition { owner })
    }
}

/// Assigns each coefficient to its lowest-index owner; the operator has
/// index 0 and therefore keeps all of its coefficients.
pub fn build_partition(ownership: &[BTreeSet<Participant>]) -> Result<CoefficientPartition, ProblemError> {
    let owner = ownership
        .iter()
        .enumerate()
        .map(|(c, owners)| owners.iter().next().copied().ok_or(ProblemError::UnownedCoefficient(c)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CoefficientPartition { owner })
}
