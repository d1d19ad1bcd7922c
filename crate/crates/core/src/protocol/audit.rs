use std::collections::BTreeMap;

use thiserror::Error;

use super::{Message, Payload, RunResult, Scheme};
use crate::problem::Participant;

/// First offending message found by [`transcript_audit`].
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{reason}{}", .index.map(|i| format!(" (message {i})")).unwrap_or_default())]
pub struct AuditViolation {
    pub index: Option<usize>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditSummary {
    pub messages: usize,
    pub coefficient_ciphertexts: usize,
    /// `(state ciphertexts, gradient ciphertexts)` per iteration.
    pub per_step: Vec<(usize, usize)>,
}

fn violation(index: usize, m: &Message, what: impl std::fmt::Display) -> AuditViolation {
    AuditViolation {
        index: Some(index),
        reason: format!("{what}: {} from {} to {}", m.payload.kind(), m.from, m.to),
    }
}

/// Checks the transcript of a finished run: the operator never sees a key or
/// a plaintext, each gradient ciphertext reaches only its own agent, each
/// coefficient is encrypted exactly once by its partition owner, and the
/// per-iteration message counts match the protocol.
pub fn transcript_audit(run: &RunResult) -> Result<AuditSummary, AuditViolation> {
    let n_agents = run.dims.len();
    let n: usize = run.dims.iter().sum();
    let k_max = run.iterations();
    let mut coef_seen: BTreeMap<usize, usize> = BTreeMap::new();
    let mut per_step = vec![(0usize, 0usize); k_max];

    for (idx, m) in run.transcript.messages().iter().enumerate() {
        if let Some(k) = m.step {
            if k >= k_max {
                return Err(violation(idx, m, format!("step {k} beyond the run length")));
            }
        }
        match &m.payload {
            Payload::PlainState { .. } | Payload::PlainCoefficient { .. } | Payload::SecretKey { .. } => {
                return Err(violation(idx, m, "operator observes private data"));
            }
            Payload::PublicKey { owner, .. } => {
                if run.scheme != Scheme::Alg2 || m.step.is_some() || m.from != Participant::agent(*owner) {
                    return Err(violation(idx, m, "unexpected public key"));
                }
            }
            Payload::CoefficientCiphertext { coef, .. } => {
                let owner = run.coefficient_owners.get(*coef).copied();
                if run.scheme != Scheme::Alg1 || m.step.is_some() {
                    return Err(violation(
                        idx,
                        m,
                        format!("unexpected encryption of coefficient {coef}"),
                    ));
                }
                match owner {
                    Some(o) if o == m.from && !o.is_operator() && m.to.is_operator() => {}
                    _ => {
                        return Err(violation(
                            idx,
                            m,
                            format!("coefficient {coef} encrypted by someone other than its owner"),
                        ))
                    }
                }
                let seen = coef_seen.entry(*coef).or_default();
                *seen += 1;
                if *seen > 1 {
                    return Err(violation(
                        idx,
                        m,
                        format!("coefficient {coef} encrypted more than once"),
                    ));
                }
            }
            Payload::StateCiphertext { agent, key_owner, .. } => {
                let key_ok = match run.scheme {
                    Scheme::Alg1 => key_owner.is_none(),
                    Scheme::Alg2 => key_owner.is_some_and(|o| o < n_agents),
                    Scheme::Plain => false,
                };
                if !key_ok || m.from != Participant::agent(*agent) || !m.to.is_operator() {
                    return Err(violation(idx, m, format!("misrouted state of agent {}", agent + 1)));
                }
                match m.step {
                    Some(k) => per_step[k].0 += 1,
                    None => return Err(violation(idx, m, "state sent outside an iteration")),
                }
            }
            Payload::GradientCiphertext { agent, .. } => {
                if !m.from.is_operator() || m.to != Participant::agent(*agent) {
                    return Err(violation(
                        idx,
                        m,
                        format!("gradient of agent {} delivered to {}", agent + 1, m.to),
                    ));
                }
                match m.step {
                    Some(k) => per_step[k].1 += 1,
                    None => return Err(violation(idx, m, "gradient sent outside an iteration")),
                }
            }
        }
    }

    if run.scheme == Scheme::Alg1 {
        for (c, owner) in run.coefficient_owners.iter().enumerate() {
            if !owner.is_operator() && !coef_seen.contains_key(&c) {
                return Err(AuditViolation {
                    index: None,
                    reason: format!("coefficient {c} was never encrypted by {owner}"),
                });
            }
        }
    }

    let expected = match run.scheme {
        Scheme::Plain => (0, 0),
        Scheme::Alg1 => (n, n),
        Scheme::Alg2 => (n * n_agents, n),
    };
    for (k, counts) in per_step.iter().enumerate() {
        if *counts != expected {
            return Err(AuditViolation {
                index: None,
                reason: format!(
                    "step {k}: {} state and {} gradient ciphertexts, expected {} and {}",
                    counts.0, counts.1, expected.0, expected.1
                ),
            });
        }
    }

    Ok(AuditSummary {
        messages: run.transcript.len(),
        coefficient_ciphertexts: coef_seen.len(),
        per_step,
    })
}
