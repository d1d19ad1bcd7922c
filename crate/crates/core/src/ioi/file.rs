//! JSON family files. Rationals are strings such as `"-3"`, `"7/2"` or
//! `"0.25"`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::family::{Dynamics, QuadraticFamily, QuadraticRow};
use super::linalg::{Matrix, Q};
use super::IoiError;
use crate::fixedpoint::ScaledDecimal;
use crate::problem::{FeasibleSet, StepSchedule};

pub const FAMILY_SCHEMA: &str = "hegrad.family/1";

pub fn parse_rational(s: &str) -> Result<Q, IoiError> {
    let s = s.trim();
    if s.contains('.') {
        return s
            .parse::<ScaledDecimal>()
            .map(|d| d.to_rational())
            .map_err(|e| IoiError::Parse(format!("{s:?}: {e}")));
    }
    let q: Q = s
        .parse()
        .map_err(|_| IoiError::Parse(format!("{s:?} is not a rational number")))?;
    Ok(q)
}

/// Initial state, dynamics and horizon used to simulate a family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub dynamics: Dynamics,
    pub iterations: usize,
}

impl Scenario {
    /// Unconstrained sets, `gamma = 1/10`, every coordinate starting at 1.
    pub fn default_for(family: &QuadraticFamily) -> Self {
        Scenario {
            dynamics: Dynamics {
                feasible_sets: family.dims().iter().map(|&dim| FeasibleSet::AllReals { dim }).collect(),
                step: StepSchedule::Constant(ScaledDecimal::new(1, 1)),
                initial_state: vec![Q::from_integer(1.into()); family.n()],
            },
            iterations: 5,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowFile {
    agent: usize,
    coordinate: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<Vec<Vec<String>>>,
    a: Vec<String>,
    b: String,
    /// Agents that know `b`; everyone when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    known_to: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    feasible_sets: Vec<FeasibleSet>,
    step: StepSchedule,
    initial_state: Vec<String>,
    iterations: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    schema: String,
    dims: Vec<usize>,
    rows: Vec<RowFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<ScenarioFile>,
}

fn parse_vec(v: &[String]) -> Result<Vec<Q>, IoiError> {
    v.iter().map(|s| parse_rational(s)).collect()
}

fn strings(v: &[Q]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

pub fn family_from_json(text: &str) -> Result<(QuadraticFamily, Option<Scenario>), IoiError> {
    let file: FamilyFile = serde_json::from_str(text)?;
    if file.schema != FAMILY_SCHEMA {
        return Err(IoiError::InvalidFamily(format!(
            "unsupported schema {:?}, expected {FAMILY_SCHEMA:?}",
            file.schema
        )));
    }
    let n: usize = file.dims.iter().sum();
    let n_agents = file.dims.len();
    let mut slots: Vec<Vec<Option<QuadraticRow>>> = file.dims.iter().map(|&d| vec![None; d]).collect();
    let mut known = vec![BTreeSet::new(); n_agents];
    for r in &file.rows {
        let (j, l) = (r.agent.wrapping_sub(1), r.coordinate.wrapping_sub(1));
        if j >= n_agents || l >= file.dims[j] {
            return Err(IoiError::InvalidFamily(format!(
                "row ({}, {}) is outside the dimensions",
                r.agent, r.coordinate
            )));
        }
        if slots[j][l].is_some() {
            return Err(IoiError::InvalidFamily(format!(
                "row ({}, {}) given twice",
                r.agent, r.coordinate
            )));
        }
        let h = match &r.h {
            None => Matrix::zeros(n, n),
            Some(rows) => {
                let parsed = rows.iter().map(|row| parse_vec(row)).collect::<Result<Vec<_>, _>>()?;
                if parsed.len() != n {
                    return Err(IoiError::DimensionMismatch {
                        what: "quadratic weight rows",
                        expected: n,
                        got: parsed.len(),
                    });
                }
                Matrix::from_rows(n, parsed).ok_or(IoiError::DimensionMismatch {
                    what: "quadratic weight columns",
                    expected: n,
                    got: 0,
                })?
            }
        };
        let knowers: Vec<usize> = match &r.known_to {
            None => (0..n_agents).collect(),
            Some(list) => list.iter().map(|&a| a.wrapping_sub(1)).collect(),
        };
        for a in knowers {
            known
                .get_mut(a)
                .ok_or_else(|| IoiError::InvalidFamily(format!("known_to names agent {}", a.wrapping_add(1))))?
                .insert((j, l));
        }
        slots[j][l] = Some(QuadraticRow {
            h,
            a: parse_vec(&r.a)?,
            b: parse_rational(&r.b)?,
        });
    }
    let rows = slots
        .into_iter()
        .enumerate()
        .map(|(j, agent)| {
            agent
                .into_iter()
                .enumerate()
                .map(|(l, r)| {
                    r.ok_or_else(|| IoiError::InvalidFamily(format!("row ({}, {}) is missing", j + 1, l + 1)))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let family = QuadraticFamily::new(file.dims, rows, known)?;
    let scenario = match file.scenario {
        None => None,
        Some(s) => Some(Scenario {
            dynamics: Dynamics {
                feasible_sets: s.feasible_sets,
                step: s.step,
                initial_state: parse_vec(&s.initial_state)?,
            },
            iterations: s.iterations,
        }),
    };
    Ok((family, scenario))
}

pub fn family_to_json(family: &QuadraticFamily, scenario: Option<&Scenario>) -> String {
    let n_agents = family.num_agents();
    let rows = family
        .indices()
        .into_iter()
        .map(|(j, l)| {
            let row = family.row(j, l);
            let knowers: Vec<usize> = (0..n_agents)
                .filter(|&i| family.knows(i, (j, l)))
                .map(|i| i + 1)
                .collect();
            RowFile {
                agent: j + 1,
                coordinate: l + 1,
                h: (!row.h.is_zero()).then(|| row.h.to_rows().iter().map(|r| strings(r)).collect()),
                a: strings(&row.a),
                b: row.b.to_string(),
                known_to: (knowers.len() != n_agents).then_some(knowers),
            }
        })
        .collect();
    let file = FamilyFile {
        schema: FAMILY_SCHEMA.into(),
        dims: family.dims().to_vec(),
        rows,
        scenario: scenario.map(|s| ScenarioFile {
            feasible_sets: s.dynamics.feasible_sets.clone(),
            step: s.dynamics.step.clone(),
            initial_state: strings(&s.dynamics.initial_state),
            iterations: s.iterations,
        }),
    };
    serde_json::to_string_pretty(&file).expect("family serializes")
}

pub fn load_family(path: &Path) -> Result<(QuadraticFamily, Option<Scenario>), IoiError> {
    family_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ioi::first_example;
    use crate::ioi::planted::{planted_family, PlantedSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn rationals_in_three_spellings() {
        assert_eq!(parse_rational("-3").unwrap(), Q::from_integer((-3).into()));
        assert_eq!(parse_rational("7/2").unwrap(), Q::new(7.into(), 2.into()));
        assert_eq!(parse_rational("0.25").unwrap(), Q::new(1.into(), 4.into()));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn families_roundtrip() {
        let f = first_example();
        let text = family_to_json(&f, None);
        assert!(!text.contains("known_to") && !text.contains("\"h\""));
        assert_eq!(family_from_json(&text).unwrap(), (f, None));

        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..10 {
            let p = planted_family(&mut rng, &PlantedSpec::default());
            let text = family_to_json(&p.family, Some(&p.scenario));
            assert_eq!(family_from_json(&text).unwrap(), (p.family, Some(p.scenario)));
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let ok = r#"{"schema":"hegrad.family/1","dims":[1],"rows":[{"agent":1,"coordinate":1,"a":["1"],"b":"0"}]}"#;
        assert!(family_from_json(ok).is_ok());
        for bad in [
            ok.replace("family/1", "family/9"),
            ok.replace(r#""dims":[1]"#, r#""dims":[2]"#),
            ok.replace(r#""agent":1"#, r#""agent":2"#),
            ok.replace(r#""b":"0""#, r#""b":"zero""#),
            ok.replace(r#""b":"0""#, r#""b":"0","known_to":[3]"#),
            ok.replace(r#""b":"0""#, r#""b":"0","extra":1"#),
        ] {
            assert!(family_from_json(&bad).is_err(), "{bad}");
        }
    }
}
