//! Embedded two-agent walkthroughs with fixed keys and randomness. Replaying
//! them checks every intermediate value of one iteration of each protocol.

use std::fmt;

use num_bigint::BigInt;

use crate::fixedpoint::{dec, encode};
use crate::paillier::{self, PaillierKeypair};
use crate::problem::{FeasibleSet, Participant, ProblemBuilder, ProblemInstance, Rounding};
use crate::protocol::{
    run_algorithm1, run_algorithm2, Ciphertext, Draw, Payload, ProtocolError, RunConfig, RunResult, ScriptedRandomness,
};
use crate::singlemod::{self, SingleModKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Walkthrough {
    Alg1,
    Alg2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub expected: String,
    pub actual: String,
}

impl GoldenCheck {
    pub fn ok(&self) -> bool {
        self.expected == self.actual
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldenReport {
    pub walkthrough: Walkthrough,
    pub checks: Vec<GoldenCheck>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(GoldenCheck::ok)
    }

    pub fn first_mismatch(&self) -> Option<&GoldenCheck> {
        self.checks.iter().find(|c| !c.ok())
    }
}

impl fmt::Display for GoldenReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.ok() {
                writeln!(f, "  ok        {:<22} {}", c.name, c.actual)?;
            } else {
                writeln!(f, "  MISMATCH  {:<22} {} (expected {})", c.name, c.actual, c.expected)?;
            }
        }
        Ok(())
    }
}

struct Checks(Vec<GoldenCheck>);

impl Checks {
    fn push(&mut self, name: &'static str, expected: &str, actual: impl ToString) {
        self.0.push(GoldenCheck {
            name,
            expected: expected.to_string(),
            actual: actual.to_string(),
        });
    }
}

/// `Phi_1 = c1 x1^2 + c2 x2^2 + c3 x1 x2 + c4 x1 + c5`, `sigma = 2`, unit
/// step. `c3` is held by both agents, `c5` by the operator.
pub fn polynomial_problem() -> ProblemInstance {
    let mut b = ProblemBuilder::new(2);
    let all = FeasibleSet::AllReals { dim: 1 };
    b.add_agent(all.clone(), vec![dec("0.76")]);
    b.add_agent(all, vec![dec("-2.35")]);
    let (a1, a2) = (Participant(1), Participant(2));
    let c1 = b.add_coefficient("c1", dec("3.32"), &[a1]);
    let c2 = b.add_coefficient("c2", dec("-1.53"), &[a2]);
    let c3 = b.add_coefficient("c3", dec("4.67"), &[a1, a2]);
    let c4 = b.add_coefficient("c4", dec("-0.28"), &[a1]);
    let c5 = b.add_coefficient("c5", dec("2.42"), &[Participant::OPERATOR]);
    let (x1, x2) = (b.x(0, 0), b.x(1, 0));
    let phi = &(&(&(&b.y(c1) * &(&x1 * &x1)) + &(&b.y(c2) * &(&x2 * &x2))) + &(&b.y(c3) * &(&x1 * &x2)))
        + &(&(&b.y(c4) * &x1) + &b.y(c5));
    b.set_gradient(0, 0, phi);
    b.rounding(Rounding::Exact);
    b.build().expect("walkthrough problem is valid")
}

/// `Phi_1 = 2.45 x1 - 3.03 x2 + 5.22`, `sigma = 2`, unit step.
pub fn affine_problem() -> ProblemInstance {
    let mut b = ProblemBuilder::new(2);
    let all = FeasibleSet::AllReals { dim: 1 };
    b.add_agent(all.clone(), vec![dec("1.36")]);
    b.add_agent(all, vec![dec("-1.42")]);
    let phi = &(&(&b.lit(dec("2.45")) * &b.x(0, 0)) + &(&b.lit(dec("-3.03")) * &b.x(1, 0))) + &b.lit(dec("5.22"));
    b.set_gradient(0, 0, phi);
    b.rounding(Rounding::Exact);
    b.build().expect("walkthrough problem is valid")
}

pub fn singlemod_key() -> SingleModKey {
    SingleModKey::from_modulus(BigInt::from(25_400_001)).expect("odd modulus")
}

/// Agent 1 uses the walkthrough primes; agent 2 has no gradient of its own
/// but still needs a keypair to receive ciphertexts under.
pub fn paillier_keys() -> Vec<PaillierKeypair> {
    vec![
        PaillierKeypair::from_primes(BigInt::from(733), BigInt::from(523)).expect("admissible primes"),
        PaillierKeypair::from_primes(BigInt::from(1009), BigInt::from(1013)).expect("admissible primes"),
    ]
}

fn state_draw(agent: usize, key_owner: Option<usize>) -> Draw {
    Draw::State {
        agent,
        coord: 0,
        step: 0,
        key_owner,
    }
}

pub fn alg1_randomness() -> ScriptedRandomness {
    ScriptedRandomness::new(0)
        .with(Draw::Coefficient { coef: 0 }, 103)
        .with(Draw::Coefficient { coef: 1 }, 501)
        .with(Draw::Coefficient { coef: 2 }, 307)
        .with(Draw::Coefficient { coef: 3 }, 205)
        .with(state_draw(0, None), 107)
        .with(state_draw(1, None), 409)
}

pub fn alg2_randomness() -> ScriptedRandomness {
    ScriptedRandomness::new(0)
        .with(state_draw(0, Some(0)), 196_827)
        .with(state_draw(1, Some(0)), 199_762)
}

fn coefficient_ct(run: &RunResult, coef: usize) -> String {
    run.transcript
        .messages()
        .iter()
        .find_map(|m| match &m.payload {
            Payload::CoefficientCiphertext {
                coef: c,
                ct: Ciphertext::SingleMod(ct),
            } if *c == coef => Some(ct.value.to_string()),
            _ => None,
        })
        .unwrap_or_else(|| "<missing>".into())
}

fn state_ct(run: &RunResult, agent: usize, key_owner: Option<usize>) -> Option<&Ciphertext> {
    run.transcript.messages().iter().find_map(|m| match &m.payload {
        Payload::StateCiphertext {
            agent: a,
            coord: 0,
            key_owner: o,
            ct,
        } if *a == agent && *o == key_owner && m.step == Some(0) => Some(ct),
        _ => None,
    })
}

fn gradient_ct(run: &RunResult, agent: usize) -> Option<&Ciphertext> {
    run.transcript.messages().iter().find_map(|m| match &m.payload {
        Payload::GradientCiphertext { agent: a, row: 0, ct } if *a == agent && m.step == Some(0) => Some(ct),
        _ => None,
    })
}

fn ct_value(ct: Option<&Ciphertext>) -> String {
    match ct {
        Some(Ciphertext::SingleMod(c)) => c.value.to_string(),
        Some(Ciphertext::Paillier(c)) => c.value.to_string(),
        None => "<missing>".into(),
    }
}

fn replay_alg1() -> Result<GoldenReport, ProtocolError> {
    let problem = polynomial_problem();
    let key = singlemod_key();
    let mut checks = Checks(Vec::new());
    let truth = problem.eval_gradients(&problem.initial_state())?[0][0].clone();
    checks.push("Phi_1(x(0))", "-12.665213", &truth);
    checks.push(
        "key bound",
        "25330427",
        singlemod::key_bound_threshold(&[truth], &[problem.gradient(0, 0).degree()], problem.sigma()),
    );

    let run = run_algorithm1(&problem, &key, &RunConfig::iterations(1), &mut alg1_randomness())?;
    checks.push("y1 ciphertext", "2616200435", coefficient_ct(&run, 0));
    checks.push("y3 ciphertext", "7797800774", coefficient_ct(&run, 2));
    checks.push("y4 ciphertext", "5207000177", coefficient_ct(&run, 3));
    checks.push("y2 ciphertext", "12725400348", coefficient_ct(&run, 1));
    checks.push(
        "y5 (operator)",
        "242",
        encode(&problem.coefficients()[4].value, problem.sigma())?,
    );
    checks.push("x1(0) ciphertext", "2717800183", ct_value(state_ct(&run, 0, None)));
    checks.push("x2(0) ciphertext", "10388600174", ct_value(state_ct(&run, 1, None)));
    let phi_bar = gradient_ct(&run, 0);
    checks.push("Phi_1 ciphertext", "1612852152286627752945361608571", ct_value(phi_bar));
    let residue = match phi_bar {
        Some(Ciphertext::SingleMod(ct)) => singlemod::residue(&key, ct).to_string(),
        _ => "<missing>".into(),
    };
    checks.push("residue mod w", "12734788", residue);
    checks.push("decrypted Phi_1", "-12.665213", &run.gradients[0][0]);
    checks.push("x1(1)", "13.425213", &run.trajectory[1][0]);
    Ok(GoldenReport {
        walkthrough: Walkthrough::Alg1,
        checks: checks.0,
    })
}

fn replay_alg2() -> Result<GoldenReport, ProtocolError> {
    let problem = affine_problem();
    let keys = paillier_keys();
    let kp = &keys[0];
    let mut checks = Checks(Vec::new());
    let truth = problem.eval_gradients(&problem.initial_state())?[0][0].clone();
    checks.push("Phi_1(x(0))", "12.8546", &truth);
    checks.push(
        "key bound",
        "257093",
        paillier::key_bound_threshold(&truth, problem.sigma()),
    );
    checks.push("alpha_1", "383359", kp.public().alpha());
    checks.push("nu_1", "63684", kp.nu());
    checks.push("beta_1", "383360", kp.public().beta());
    checks.push("pi_1", "198247", kp.pi());

    let run = run_algorithm2(&problem, &keys, &RunConfig::iterations(1), &mut alg2_randomness())?;
    checks.push("x1(0) ciphertext", "38891374903", ct_value(state_ct(&run, 0, Some(0))));
    checks.push("x2(0) ciphertext", "112847502000", ct_value(state_ct(&run, 1, Some(0))));
    let phi_bar = gradient_ct(&run, 0);
    checks.push("Phi_1 ciphertext", "125129165734", ct_value(phi_bar));
    let residue = match phi_bar {
        Some(Ciphertext::Paillier(ct)) => paillier::decrypt(kp, ct)?.to_string(),
        _ => "<missing>".into(),
    };
    checks.push("decrypted residue", "128546", residue);
    checks.push("decrypted Phi_1", "12.8546", &run.gradients[0][0]);
    checks.push("x1(1)", "-11.4946", &run.trajectory[1][0]);
    Ok(GoldenReport {
        walkthrough: Walkthrough::Alg2,
        checks: checks.0,
    })
}

/// Replays one walkthrough. Protocol errors mean the replay itself broke,
/// which is reported separately from value mismatches.
pub fn replay(which: Walkthrough) -> Result<GoldenReport, ProtocolError> {
    match which {
        Walkthrough::Alg1 => replay_alg1(),
        Walkthrough::Alg2 => replay_alg2(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walkthroughs_replay() {
        for w in [Walkthrough::Alg1, Walkthrough::Alg2] {
            let report = replay(w).unwrap();
            assert!(report.passed(), "{report}");
            assert_eq!(replay(w).unwrap(), report);
        }
    }
}
