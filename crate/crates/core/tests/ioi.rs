use hegrad_core::casestudies::{
    build_demand_response, build_opf, synth_network, DemandResponseConfig, OpfConfig, Topology,
};
use hegrad_core::ioi::{
    analyze, assess, default_ladder, family_from_json, family_to_json, planted_family, simulate, Dynamics, IoiError,
    PlantedSpec, QuadraticFamily, Scenario, Trajectory, Verdict,
};
use hegrad_core::protocol::run_plain;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[test]
fn family_files_roundtrip_with_their_scenario() {
    let mut rng = ChaCha20Rng::seed_from_u64(71);
    for _ in 0..10 {
        let p = planted_family(&mut rng, &PlantedSpec::default());
        let text = family_to_json(&p.family, Some(&p.scenario));
        let (family, scenario) = family_from_json(&text).unwrap();
        assert_eq!(family, p.family);
        assert_eq!(scenario.unwrap(), p.scenario);
    }
}

#[test]
fn simulation_agrees_with_the_plain_protocol_run() {
    let net = synth_network(Topology::Path, 3).unwrap();
    let problem = build_opf(&OpfConfig::uniform(&net)).unwrap();
    let family = QuadraticFamily::from_problem(&problem).unwrap();
    let dynamics = Dynamics::from_problem(&problem);
    // quantization is a no-op here because every step lands on the grid
    let simulated = simulate(&family, &dynamics, 4).unwrap();
    let plain = Trajectory::from_run(&run_plain(&problem, 4).unwrap());
    assert_eq!(simulated, plain);
}

#[test]
fn demand_response_is_quadratic_in_the_state() {
    let net = synth_network(Topology::Path, 3).unwrap();
    let problem = build_demand_response(&DemandResponseConfig::synthetic(&net, 1).unwrap()).unwrap();
    let family = QuadraticFamily::from_problem(&problem).unwrap();
    assert!(!family.is_affine());
    let scenario = Scenario {
        dynamics: Dynamics::from_problem(&problem),
        iterations: 2,
    };
    for i in 0..family.num_agents() {
        let a = analyze(&family, &scenario, i, &default_ladder()).unwrap();
        assert_eq!(
            a.resistant,
            matches!(assess(&family, i), Verdict::GuaranteedResistant { .. })
        );
        assert!(a.attack.is_none());
    }
}

#[test]
fn malformed_family_files_are_rejected() {
    let bad = r#"{"schema":"hegrad.family/1","dims":[1],"rows":[{"agent":2,"coordinate":1,"a":["1"],"b":"0"}]}"#;
    assert!(family_from_json(bad).is_err());
    let bad = r#"{"schema":"hegrad.family/1","dims":[1],"rows":[{"agent":1,"coordinate":1,"a":["x"],"b":"0"}]}"#;
    assert!(matches!(family_from_json(bad), Err(IoiError::Parse(_))));
    let bad = r#"{"schema":"other","dims":[1],"rows":[]}"#;
    assert!(family_from_json(bad).is_err());
}
