use hegrad_core::casestudies::{
    build_demand_response, build_opf, synth_network, DemandResponseConfig, OpfConfig, Topology,
};
use hegrad_core::paillier::PaillierKeypair;
use hegrad_core::problem::ProblemInstance;
use hegrad_core::protocol::{
    compare_runs, run_algorithm1, run_algorithm2, run_plain, timing_summary, transcript_audit, RunConfig, RunResult,
    SeededRandomness,
};
use hegrad_core::singlemod::SingleModKey;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn assert_feasible(problem: &ProblemInstance, run: &RunResult) {
    for k in 0..=run.iterations() {
        for i in 0..problem.num_agents() {
            assert!(
                problem.agent(i).feasible_set.contains(run.agent_state(k, i)),
                "agent {} infeasible at step {k}",
                i + 1
            );
        }
    }
}

#[test]
fn demand_response_under_algorithm1() {
    let net = synth_network(Topology::Ring, 6).unwrap();
    let problem = build_demand_response(&DemandResponseConfig::synthetic(&net, 2).unwrap()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let key = SingleModKey::generate(128, &mut rng).unwrap();
    let enc = run_algorithm1(
        &problem,
        &key,
        &RunConfig::iterations(30),
        &mut SeededRandomness::new(1),
    )
    .unwrap();
    let plain = run_plain(&problem, 30).unwrap();
    assert!(compare_runs(&enc, &plain).unwrap().is_zero());
    assert_feasible(&problem, &enc);
    transcript_audit(&enc).unwrap();
    // customers curtail because supply falls short of the intended load
    let reduced: f64 = (0..problem.num_agents())
        .map(|i| enc.agent_state(30, i)[0].to_f64())
        .sum();
    assert!(reduced > 0.0);
}

#[test]
fn opf_under_algorithm2() {
    let net = synth_network(Topology::Star, 4).unwrap();
    let problem = build_opf(&OpfConfig::uniform(&net)).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(32);
    let keys: Vec<_> = (0..problem.num_agents())
        .map(|_| PaillierKeypair::generate(128, &mut rng).unwrap())
        .collect();
    let enc = run_algorithm2(
        &problem,
        &keys,
        &RunConfig::iterations(30),
        &mut SeededRandomness::new(2),
    )
    .unwrap();
    let plain = run_plain(&problem, 30).unwrap();
    assert!(compare_runs(&enc, &plain).unwrap().is_zero());
    assert_feasible(&problem, &enc);
    transcript_audit(&enc).unwrap();
    let table = timing_summary(&enc);
    assert_eq!(table.rows.len(), 1);
}

#[test]
fn opf_also_runs_under_algorithm1() {
    let net = synth_network(Topology::Path, 3).unwrap();
    let problem = build_opf(&OpfConfig::uniform(&net)).unwrap();
    let key = SingleModKey::generate(128, &mut ChaCha20Rng::seed_from_u64(33)).unwrap();
    let enc = run_algorithm1(
        &problem,
        &key,
        &RunConfig::iterations(10),
        &mut SeededRandomness::new(3),
    )
    .unwrap();
    assert!(compare_runs(&enc, &run_plain(&problem, 10).unwrap()).unwrap().is_zero());
}

#[test]
fn demand_response_is_rejected_by_algorithm2() {
    let net = synth_network(Topology::Path, 3).unwrap();
    let problem = build_demand_response(&DemandResponseConfig::synthetic(&net, 1).unwrap()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(34);
    let keys: Vec<_> = (0..problem.num_agents())
        .map(|_| PaillierKeypair::generate(128, &mut rng).unwrap())
        .collect();
    assert!(run_algorithm2(
        &problem,
        &keys,
        &RunConfig::iterations(1),
        &mut SeededRandomness::new(4)
    )
    .is_err());
}
