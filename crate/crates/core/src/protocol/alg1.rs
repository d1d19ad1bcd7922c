use std::time::Instant;

use super::{
    check_state_bound, elapsed_ns, update_all, Ciphertext, Draw, Payload, PhaseTimes, ProtocolError, Randomness,
    RunConfig, RunResult, Scheme,
};
use crate::fixedpoint::{encode, ScaledDecimal};
use crate::problem::{Participant, PolynomialFunction, ProblemInstance};
use crate::singlemod::{
    decrypt, encrypt_with, eval_polynomial, key_bound_threshold, SingleModCiphertext, SingleModKey,
};

/// Upper bound on `|poly(x, c)|` over `|x_v| <= state_bound`.
fn magnitude_bound(poly: &PolynomialFunction, coeffs: &[ScaledDecimal], state_bound: &ScaledDecimal) -> ScaledDecimal {
    let b = state_bound.abs();
    poly.monomials()
        .iter()
        .map(|mono| {
            let mut term = mono.literal.abs();
            for (&c, &e) in &mono.y {
                for _ in 0..e {
                    term = &term * &coeffs[c].abs();
                }
            }
            for _ in 0..mono.state_degree() {
                term = &term * &b;
            }
            term
        })
        .sum()
}

/// Private-key protocol: agents share the odd modulus `w`, encrypt their
/// partition of the coefficients once, then encrypt their states every
/// iteration; the operator evaluates every gradient row over ciphertexts and
/// returns it to the owning agent for decryption.
pub fn run_algorithm1(
    problem: &ProblemInstance,
    key: &SingleModKey,
    config: &RunConfig,
    rand: &mut dyn Randomness,
) -> Result<RunResult, ProtocolError> {
    let sigma = problem.sigma();
    let n_agents = problem.num_agents();
    let bits_u = config.blinding_bits.unwrap_or_else(|| key.bit_length());
    let coeff_values = problem.coefficient_values();
    let degrees: Vec<Vec<u32>> = (0..n_agents)
        .map(|i| problem.gradients(i).iter().map(PolynomialFunction::degree).collect())
        .collect();

    if let Some(bound) = &config.state_bound {
        for (i, agent_degrees) in degrees.iter().enumerate() {
            let bounds: Vec<ScaledDecimal> = problem
                .gradients(i)
                .iter()
                .map(|p| magnitude_bound(p, &coeff_values, bound))
                .collect();
            let threshold = key_bound_threshold(&bounds, agent_degrees, sigma);
            if *key.modulus() < threshold {
                return Err(ProtocolError::KeyTooSmall {
                    agent: i + 1,
                    threshold: threshold.to_string(),
                });
            }
        }
    }

    let mut run = RunResult::start(Scheme::Alg1, problem);

    // coefficient encryption, once per run
    let mut y_cts = Vec::with_capacity(problem.m());
    for (c, value) in coeff_values.iter().enumerate() {
        let z = encode(value, sigma)?;
        let owner = problem.partition().owner(c);
        if owner.is_operator() {
            y_cts.push(Some(SingleModCiphertext::unblinded(z)));
            continue;
        }
        let u = rand.blinding(Draw::Coefficient { coef: c }, bits_u);
        let ct = encrypt_with(key, &z, &u)?;
        run.transcript.send(
            None,
            owner,
            Participant::OPERATOR,
            Payload::CoefficientCiphertext {
                coef: c,
                ct: Ciphertext::SingleMod(ct.clone()),
            },
        );
        y_cts.push(Some(ct));
    }

    for k in 0..config.iterations {
        let x = run.trajectory[k].clone();
        check_state_bound(problem, config.state_bound.as_ref(), &x, k)?;
        let mut times = vec![PhaseTimes::default(); n_agents];

        // state encryption
        let mut x_cts = Vec::with_capacity(x.len());
        for i in 0..n_agents {
            let t = Instant::now();
            for (l, v) in x[problem.agent_range(i)].iter().enumerate() {
                let z = encode(v, sigma)?;
                let draw = Draw::State {
                    agent: i,
                    coord: l,
                    step: k,
                    key_owner: None,
                };
                let u = rand.blinding(draw, bits_u);
                let ct = encrypt_with(key, &z, &u)?;
                run.transcript.send(
                    Some(k),
                    Participant::agent(i),
                    Participant::OPERATOR,
                    Payload::StateCiphertext {
                        agent: i,
                        coord: l,
                        key_owner: None,
                        ct: Ciphertext::SingleMod(ct.clone()),
                    },
                );
                x_cts.push(Some(ct));
            }
            times[i].encrypt += elapsed_ns(t);
        }

        // decryption is only correct while the key covers every gradient
        // value; the simulator knows the true values and stops otherwise
        let truth = problem.eval_gradients(&x)?;
        for i in 0..n_agents {
            for (l, value) in truth[i].iter().enumerate() {
                let threshold = key_bound_threshold(std::slice::from_ref(value), &[degrees[i][l]], sigma);
                if *key.modulus() < threshold {
                    return Err(ProtocolError::KeyBoundViolated {
                        step: k,
                        agent: i + 1,
                        row: l + 1,
                        threshold: threshold.to_string(),
                        modulus: key.modulus().to_string(),
                    });
                }
            }
        }

        // operator evaluation
        let mut outgoing: Vec<Vec<SingleModCiphertext>> = Vec::with_capacity(n_agents);
        for (i, agent_times) in times.iter_mut().enumerate() {
            let t = Instant::now();
            let mut rows = Vec::with_capacity(problem.agent(i).dim());
            for (l, poly) in problem.gradients(i).iter().enumerate() {
                let ct = eval_polynomial(&x_cts, &y_cts, poly, sigma)?;
                run.transcript.send(
                    Some(k),
                    Participant::OPERATOR,
                    Participant::agent(i),
                    Payload::GradientCiphertext {
                        agent: i,
                        row: l,
                        ct: Ciphertext::SingleMod(ct.clone()),
                    },
                );
                rows.push(ct);
            }
            agent_times.eval += elapsed_ns(t);
            outgoing.push(rows);
        }

        // decryption
        let mut phi = Vec::with_capacity(n_agents);
        for (i, rows) in outgoing.iter().enumerate() {
            let t = Instant::now();
            let values = rows
                .iter()
                .map(|ct| decrypt(key, ct, sigma))
                .collect::<Result<Vec<_>, _>>()?;
            times[i].decrypt += elapsed_ns(t);
            phi.push(values);
        }

        let next = update_all(problem, &x, k, &phi, &mut times)?;
        run.gradients.push(phi.into_iter().flatten().collect());
        run.trajectory.push(next);
        run.timings.push(times);
    }
    if let Some(last) = run.trajectory.last() {
        check_state_bound(problem, config.state_bound.as_ref(), last, config.iterations)?;
    }
    Ok(run)
}
