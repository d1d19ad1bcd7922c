use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    FeasibleSet, Monomial, Participant, PolynomialFunction, ProblemBuilder, ProblemError, ProblemInstance, Rounding,
    StepSchedule,
};
use crate::fixedpoint::ScaledDecimal;

pub const PROBLEM_SCHEMA: &str = "hegrad.problem/1";

/// On-disk problem description. State variables are named `"<agent>.<coord>"`
/// (both one-based), coefficient variables by their declared name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: String,
    pub sigma: u32,
    #[serde(default)]
    pub rounding: Rounding,
    pub step: StepSchedule,
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub coefficients: Vec<CoefficientEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Participant>>,
    #[serde(default)]
    pub gradients: Vec<GradientEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub feasible_set: FeasibleSet,
    pub initial_state: Vec<ScaledDecimal>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub name: String,
    pub value: ScaledDecimal,
    pub owners: Vec<Participant>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientEntry {
    pub agent: usize,
    pub coordinate: usize,
    pub monomials: Vec<MonomialEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialEntry {
    pub literal: ScaledDecimal,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub x: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub y: BTreeMap<String, u32>,
}

impl ProblemFile {
    pub fn from_instance(p: &ProblemInstance) -> Self {
        let names: Vec<String> = (0..p.num_agents())
            .flat_map(|i| (0..p.agent(i).dim()).map(move |l| format!("{}.{}", i + 1, l + 1)))
            .collect();
        let mut gradients = Vec::new();
        for i in 0..p.num_agents() {
            for (l, poly) in p.gradients(i).iter().enumerate() {
                if poly.is_zero() {
                    continue;
                }
                let monomials = poly
                    .monomials()
                    .iter()
                    .map(|mono| MonomialEntry {
                        literal: mono.literal.clone(),
                        x: mono.x.iter().map(|(&v, &e)| (names[v].clone(), e)).collect(),
                        y: mono
                            .y
                            .iter()
                            .map(|(&c, &e)| (p.coefficients()[c].name.clone(), e))
                            .collect(),
                    })
                    .collect();
                gradients.push(GradientEntry {
                    agent: i + 1,
                    coordinate: l + 1,
                    monomials,
                });
            }
        }
        ProblemFile {
            schema: PROBLEM_SCHEMA.to_string(),
            sigma: p.sigma(),
            rounding: p.rounding(),
            step: p.step().clone(),
            agents: p
                .agents()
                .iter()
                .map(|a| AgentEntry {
                    feasible_set: a.feasible_set.clone(),
                    initial_state: a.initial_state.clone(),
                })
                .collect(),
            coefficients: p
                .coefficients()
                .iter()
                .map(|c| CoefficientEntry {
                    name: c.name.clone(),
                    value: c.value.clone(),
                    owners: c.owners.iter().copied().collect(),
                })
                .collect(),
            partition: Some((0..p.m()).map(|c| p.partition().owner(c)).collect()),
            gradients,
        }
    }

    pub fn into_instance(self) -> Result<ProblemInstance, ProblemError> {
        if self.schema != PROBLEM_SCHEMA {
            return Err(ProblemError::ConfigInvalid(format!(
                "unsupported schema {:?}, expected {PROBLEM_SCHEMA:?}",
                self.schema
            )));
        }
        let mut b = ProblemBuilder::new(self.sigma);
        b.step(self.step).rounding(self.rounding);
        for a in self.agents {
            b.add_agent(a.feasible_set, a.initial_state);
        }
        let mut coeff_index = BTreeMap::new();
        for c in self.coefficients {
            if coeff_index.contains_key(&c.name) {
                return Err(ProblemError::ConfigInvalid(format!(
                    "duplicate coefficient {:?}",
                    c.name
                )));
            }
            let idx = b.add_coefficient(c.name.clone(), c.value, &c.owners);
            coeff_index.insert(c.name, idx);
        }
        if let Some(partition) = self.partition {
            b.partition(partition);
        }
        let dims: Vec<usize> = (0..b.agents.len()).map(|i| b.agents[i].dim()).collect();
        let parse_state = |name: &str| -> Result<usize, ProblemError> {
            let unknown = || ProblemError::UnknownVariable(name.to_string());
            let (i, l) = name.split_once('.').ok_or_else(unknown)?;
            let i: usize = i.parse().map_err(|_| unknown())?;
            let l: usize = l.parse().map_err(|_| unknown())?;
            if i == 0 || l == 0 || i > dims.len() || l > dims[i - 1] {
                return Err(unknown());
            }
            Ok(dims[..i - 1].iter().sum::<usize>() + l - 1)
        };
        let (n, m) = (b.n(), b.m());
        let mut seen = std::collections::BTreeSet::new();
        for g in self.gradients {
            if g.agent == 0 || g.agent > dims.len() || g.coordinate == 0 || g.coordinate > dims[g.agent - 1] {
                return Err(ProblemError::ConfigInvalid(format!(
                    "gradient row {}.{} does not exist",
                    g.agent, g.coordinate
                )));
            }
            if !seen.insert((g.agent, g.coordinate)) {
                return Err(ProblemError::ConfigInvalid(format!(
                    "gradient row {}.{} given twice",
                    g.agent, g.coordinate
                )));
            }
            let monomials = g
                .monomials
                .into_iter()
                .map(|e| {
                    let x =
                        e.x.iter()
                            .map(|(k, &v)| Ok((parse_state(k)?, v)))
                            .collect::<Result<BTreeMap<_, _>, ProblemError>>()?;
                    let y =
                        e.y.iter()
                            .map(|(k, &v)| {
                                coeff_index
                                    .get(k)
                                    .map(|&c| (c, v))
                                    .ok_or_else(|| ProblemError::UnknownVariable(k.clone()))
                            })
                            .collect::<Result<BTreeMap<_, _>, ProblemError>>()?;
                    Ok(Monomial {
                        x,
                        y,
                        literal: e.literal,
                    })
                })
                .collect::<Result<Vec<_>, ProblemError>>()?;
            let poly = PolynomialFunction::from_monomials(n, m, monomials)?;
            b.set_gradient(g.agent - 1, g.coordinate - 1, poly);
        }
        b.build()
    }
}

impl ProblemInstance {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        serde_json::from_str::<ProblemFile>(text)?.into_instance()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProblemFile::from_instance(self)).expect("problem serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProblemError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProblemError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}
