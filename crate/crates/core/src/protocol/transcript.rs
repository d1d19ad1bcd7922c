use serde::{Deserialize, Serialize};

use crate::fixedpoint::ScaledDecimal;
use crate::paillier::{PaillierCiphertext, PaillierPublicKey};
use crate::problem::Participant;
use crate::singlemod::SingleModCiphertext;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Ciphertext {
    SingleMod(SingleModCiphertext),
    Paillier(PaillierCiphertext),
}

/// Message contents. The last three kinds never occur in a correct run; they
/// exist so audits can be exercised on faulty transcripts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    PublicKey {
        owner: usize,
        key: PaillierPublicKey,
    },
    CoefficientCiphertext {
        coef: usize,
        ct: Ciphertext,
    },
    StateCiphertext {
        agent: usize,
        coord: usize,
        key_owner: Option<usize>,
        ct: Ciphertext,
    },
    GradientCiphertext {
        agent: usize,
        row: usize,
        ct: Ciphertext,
    },
    PlainState {
        agent: usize,
        coord: usize,
        value: ScaledDecimal,
    },
    PlainCoefficient {
        coef: usize,
        value: ScaledDecimal,
    },
    SecretKey {
        owner: Option<usize>,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::PublicKey { .. } => "public_key",
            Payload::CoefficientCiphertext { .. } => "coefficient_ciphertext",
            Payload::StateCiphertext { .. } => "state_ciphertext",
            Payload::GradientCiphertext { .. } => "gradient_ciphertext",
            Payload::PlainState { .. } => "plain_state",
            Payload::PlainCoefficient { .. } => "plain_coefficient",
            Payload::SecretKey { .. } => "secret_key",
        }
    }
}

/// One delivered message. `step` is `None` for setup traffic sent before the
/// first iteration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub step: Option<usize>,
    pub from: Participant,
    pub to: Participant,
    pub payload: Payload,
}

/// Ordered log of every message in a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, step: Option<usize>, from: Participant, to: Participant, payload: Payload) {
        self.messages.push(Message {
            step,
            from,
            to,
            payload,
        });
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Messages visible to `who`. The operator observes every link; an agent
    /// sees what it sends and receives.
    pub fn view(&self, who: Participant) -> Vec<&Message> {
        self.messages
            .iter()
            .filter(|m| who.is_operator() || m.from == who || m.to == who)
            .collect()
    }

    /// Mutable access for fault-injection tests.
    pub fn messages_mut(&mut self) -> &mut Vec<Message> {
        &mut self.messages
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&serde_json::to_string(m).expect("message serializes"));
            out.push('\n');
        }
        out
    }
}
