use std::time::Instant;

use num_integer::Integer;

use super::{
    check_state_bound, elapsed_ns, update_all, Ciphertext, Draw, Payload, PhaseTimes, ProtocolError, Randomness,
    RunConfig, RunResult, Scheme,
};
use crate::fixedpoint::{encode, t_transform};
use crate::paillier::{
    affine_worst_case, decrypt, encrypt_with, eval_affine, key_bound_threshold, PaillierCiphertext, PaillierKeypair,
};
use crate::problem::{AffineRow, Participant, ProblemError, ProblemInstance};

/// Affine rows of every gradient with weights checked against the
/// precision the protocol can carry: `sigma` digits for weights, `2 sigma`
/// for constants.
fn affine_rows(problem: &ProblemInstance) -> Result<Vec<Vec<AffineRow>>, ProtocolError> {
    let sigma = problem.sigma();
    let coeffs = problem.coefficient_values();
    let mut out = Vec::with_capacity(problem.num_agents());
    for i in 0..problem.num_agents() {
        let mut rows = Vec::with_capacity(problem.agent(i).dim());
        for (l, poly) in problem.gradients(i).iter().enumerate() {
            let row = match crate::problem::to_affine(poly, &coeffs) {
                Ok(row) => row,
                Err(ProblemError::NotAffine { degree }) => {
                    return Err(ProtocolError::NotAffine {
                        agent: i + 1,
                        row: l + 1,
                        degree,
                    })
                }
                Err(e) => return Err(e.into()),
            };
            for a in &row.a {
                encode(a, sigma)?;
            }
            encode(&row.b, 2 * sigma)?;
            rows.push(row);
        }
        out.push(rows);
    }
    Ok(out)
}

/// Public-key protocol for affine gradients: every agent encrypts its state
/// under every agent's Paillier key, and the operator combines the
/// ciphertexts under agent `i`'s key with the known weights of `Phi_i`.
pub fn run_algorithm2(
    problem: &ProblemInstance,
    keys: &[PaillierKeypair],
    config: &RunConfig,
    rand: &mut dyn Randomness,
) -> Result<RunResult, ProtocolError> {
    let sigma = problem.sigma();
    let n_agents = problem.num_agents();
    if keys.len() != n_agents {
        return Err(ProtocolError::KeyCount {
            expected: n_agents,
            got: keys.len(),
        });
    }
    let rows = affine_rows(problem)?;

    if let Some(bound) = &config.state_bound {
        for (i, kp) in keys.iter().enumerate() {
            let threshold = key_bound_threshold(&affine_worst_case(&rows[i], bound), sigma);
            if *kp.public().alpha() < threshold {
                return Err(ProtocolError::KeyTooSmall {
                    agent: i + 1,
                    threshold: threshold.to_string(),
                });
            }
        }
    }

    let mut run = RunResult::start(Scheme::Alg2, problem);

    // public keys go to the operator and to every other agent
    for (i, kp) in keys.iter().enumerate() {
        let from = Participant::agent(i);
        let mut recipients = vec![Participant::OPERATOR];
        recipients.extend((0..n_agents).filter(|&j| j != i).map(Participant::agent));
        for to in recipients {
            run.transcript.send(
                None,
                from,
                to,
                Payload::PublicKey {
                    owner: i,
                    key: kp.public().clone(),
                },
            );
        }
    }

    for k in 0..config.iterations {
        let x = run.trajectory[k].clone();
        check_state_bound(problem, config.state_bound.as_ref(), &x, k)?;
        let mut times = vec![PhaseTimes::default(); n_agents];

        // x_cts[owner][v]: state variable v encrypted under owner's key
        let mut x_cts: Vec<Vec<Option<PaillierCiphertext>>> = vec![Vec::with_capacity(x.len()); n_agents];
        for j in 0..n_agents {
            let t = Instant::now();
            for (v, value) in x[problem.agent_range(j)].iter().enumerate() {
                let z = encode(value, sigma)?;
                for (owner, kp) in keys.iter().enumerate() {
                    let pk = kp.public();
                    let draw = Draw::State {
                        agent: j,
                        coord: v,
                        step: k,
                        key_owner: Some(owner),
                    };
                    let r = rand.randomizer(draw, pk);
                    let ct = encrypt_with(pk, &z.mod_floor(pk.alpha()), &r)?;
                    run.transcript.send(
                        Some(k),
                        Participant::agent(j),
                        Participant::OPERATOR,
                        Payload::StateCiphertext {
                            agent: j,
                            coord: v,
                            key_owner: Some(owner),
                            ct: Ciphertext::Paillier(ct.clone()),
                        },
                    );
                    x_cts[owner].push(Some(ct));
                }
            }
            times[j].encrypt += elapsed_ns(t);
        }

        let truth = problem.eval_gradients(&x)?;
        for (i, kp) in keys.iter().enumerate() {
            for (l, value) in truth[i].iter().enumerate() {
                let threshold = key_bound_threshold(value, sigma);
                if *kp.public().alpha() < threshold {
                    return Err(ProtocolError::KeyBoundViolated {
                        step: k,
                        agent: i + 1,
                        row: l + 1,
                        threshold: threshold.to_string(),
                        modulus: kp.public().alpha().to_string(),
                    });
                }
            }
        }

        let mut outgoing = Vec::with_capacity(n_agents);
        for (i, kp) in keys.iter().enumerate() {
            let t = Instant::now();
            let mut cts = Vec::with_capacity(rows[i].len());
            for (l, row) in rows[i].iter().enumerate() {
                let ct = eval_affine(kp.public(), &x_cts[i], row, sigma)?;
                run.transcript.send(
                    Some(k),
                    Participant::OPERATOR,
                    Participant::agent(i),
                    Payload::GradientCiphertext {
                        agent: i,
                        row: l,
                        ct: Ciphertext::Paillier(ct.clone()),
                    },
                );
                cts.push(ct);
            }
            times[i].eval += elapsed_ns(t);
            outgoing.push(cts);
        }

        let mut phi = Vec::with_capacity(n_agents);
        for (i, kp) in keys.iter().enumerate() {
            let t = Instant::now();
            let values = outgoing[i]
                .iter()
                .map(|ct| {
                    let pt = decrypt(kp, ct)?;
                    Ok(t_transform(&pt, 2 * sigma, kp.public().alpha())?)
                })
                .collect::<Result<Vec<_>, ProtocolError>>()?;
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
