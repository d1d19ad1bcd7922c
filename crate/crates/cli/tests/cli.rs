use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hegrad(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hegrad"))
        .args(args)
        .current_dir(dir)
        .env_remove("HEGRAD_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn build(dir: &Path, which: &str, file: &str, extra: &[&str]) {
    let mut args = vec![which, "--out", file];
    args.extend_from_slice(extra);
    let o = hegrad(&args, dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn golden_walkthroughs_pass_and_are_deterministic() {
    let dir = TempDir::new().unwrap();
    for which in ["alg1", "alg2"] {
        let a = hegrad(&["golden", which], dir.path());
        let b = hegrad(&["golden", which], dir.path());
        assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
        assert_eq!(a.stdout, b.stdout);
        assert!(!stdout(&a).contains("MISMATCH"));
    }
    let alg1 = stdout(&hegrad(&["golden", "alg1"], dir.path()));
    for value in [
        "2616200435",
        "7797800774",
        "5207000177",
        "12725400348",
        "2717800183",
        "10388600174",
        "1612852152286627752945361608571",
        "12734788",
        "-12.665213",
        "13.425213",
    ] {
        assert!(alg1.contains(value), "missing {value}");
    }
    let alg2 = stdout(&hegrad(&["golden", "alg2"], dir.path()));
    for value in [
        "383359",
        "63684",
        "198247",
        "38891374903",
        "112847502000",
        "125129165734",
        "128546",
        "12.8546",
        "-11.4946",
    ] {
        assert!(alg2.contains(value), "missing {value}");
    }
}

#[test]
fn encrypted_opf_run_writes_artifacts_with_zero_deviation() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-opf",
        "opf.json",
        &["--topology", "path", "--size", "3"],
    );
    let o = hegrad(
        &[
            "run",
            "--problem",
            "opf.json",
            "--scheme",
            "alg2",
            "--bits",
            "500",
            "--iters",
            "30",
            "--out",
            "art",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let art = dir.path().join("art");
    let traj = std::fs::read_to_string(art.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("step,participant,coordinate,value\n"));
    let deviation = std::fs::read_to_string(art.join("deviation.csv")).unwrap();
    let rows: Vec<&str> = deviation.lines().skip(1).collect();
    assert_eq!(rows.len(), 31);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[1], "0", "{row}");
    }
    let transcript = std::fs::read_to_string(art.join("transcript.jsonl")).unwrap();
    assert!(transcript.lines().count() > 30);
    assert!(art.join("timing.csv").exists());
}

#[test]
fn zero_iterations_give_one_row_per_coordinate() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-opf",
        "opf.json",
        &["--topology", "path", "--size", "2"],
    );
    let o = hegrad(
        &["run", "--problem", "opf.json", "--iters", "0", "--out", "art"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = std::fs::read_to_string(dir.path().join("art/trajectory.csv")).unwrap();
    // two generators with one neighbour each: (P, theta, lambda, mu)
    assert_eq!(traj.lines().count(), 1 + 8);
}

#[test]
fn json_format_switches_the_summary_files() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-opf",
        "opf.json",
        &["--topology", "path", "--size", "2"],
    );
    let o = hegrad(
        &[
            "run",
            "--problem",
            "opf.json",
            "--scheme",
            "alg1",
            "--iters",
            "2",
            "--format",
            "json",
            "--out",
            "art",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let dev: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("art/deviation.json")).unwrap()).unwrap();
    assert_eq!(dev.as_array().unwrap().len(), 3);
    assert!(dir.path().join("art/timing.json").exists());
}

#[test]
fn public_key_protocol_rejects_demand_response() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-dr",
        "dr.json",
        &["--topology", "path", "--size", "3", "--supply", "1"],
    );
    let o = hegrad(&["run", "--problem", "dr.json", "--scheme", "alg2"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not affine"));
}

#[test]
fn runtime_aborts_and_validation_errors_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-dr",
        "dr.json",
        &["--topology", "path", "--size", "3", "--supply", "1"],
    );
    let small_key = hegrad(
        &[
            "run",
            "--problem",
            "dr.json",
            "--scheme",
            "alg1",
            "--bits",
            "40",
            "--iters",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(small_key.status.code(), Some(4));
    assert!(stderr(&small_key).contains("key bound"));

    let bits = hegrad(&["run", "--problem", "dr.json", "--bits", "9000"], dir.path());
    assert_eq!(bits.status.code(), Some(2));
    let missing = hegrad(&["run", "--problem", "nope.json"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    std::fs::write(dir.path().join("bad.json"), "{\"schema\": 3}").unwrap();
    let bad = hegrad(&["run", "--problem", "bad.json"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn runs_are_deterministic_given_the_seed() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-opf",
        "opf.json",
        &["--topology", "star", "--size", "3"],
    );
    let run = |out: &str, seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_hegrad"));
        cmd.args([
            "run",
            "--problem",
            "opf.json",
            "--scheme",
            "alg2",
            "--bits",
            "128",
            "--iters",
            "3",
            "--out",
            out,
        ])
        .current_dir(dir.path())
        .env_remove("HEGRAD_SEED");
        if let Some(s) = seed {
            cmd.env("HEGRAD_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read_to_string(dir.path().join(out).join("transcript.jsonl")).unwrap()
    };
    let a = run("a", Some("11"));
    let b = run("b", Some("11"));
    let c = run("c", Some("12"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn key_files_roundtrip_into_runs() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-opf",
        "opf.json",
        &["--topology", "path", "--size", "2"],
    );
    let o = hegrad(
        &[
            "keygen",
            "--scheme",
            "alg2",
            "--bits",
            "128",
            "--agents",
            "2",
            "--seed",
            "5",
            "--out",
            "keys.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = hegrad(
        &[
            "run",
            "--problem",
            "opf.json",
            "--scheme",
            "alg2",
            "--key-file",
            "keys.json",
            "--iters",
            "2",
            "--out",
            "art",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("zero at every step"));

    let wrong = hegrad(
        &[
            "run",
            "--problem",
            "opf.json",
            "--scheme",
            "alg1",
            "--key-file",
            "keys.json",
        ],
        dir.path(),
    );
    assert_eq!(wrong.status.code(), Some(2));

    let three = hegrad(
        &[
            "keygen",
            "--scheme",
            "alg2",
            "--bits",
            "128",
            "--agents",
            "3",
            "--out",
            "three.json",
        ],
        dir.path(),
    );
    assert!(three.status.success());
    let count = hegrad(
        &[
            "run",
            "--problem",
            "opf.json",
            "--scheme",
            "alg2",
            "--key-file",
            "three.json",
        ],
        dir.path(),
    );
    assert_eq!(count.status.code(), Some(2));
    assert!(stderr(&count).contains("expected 2 keypairs"));

    let text = std::fs::read_to_string(dir.path().join("keys.json")).unwrap();
    let stray = text.replacen("\"keypairs\"", "\"extra\": 1, \"keypairs\"", 1);
    std::fs::write(dir.path().join("stray.json"), stray).unwrap();
    let o = hegrad(
        &[
            "run",
            "--problem",
            "opf.json",
            "--scheme",
            "alg2",
            "--key-file",
            "stray.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_emits_one_row_per_key_length() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-opf",
        "opf.json",
        &["--topology", "path", "--size", "2"],
    );
    let o = hegrad(
        &[
            "bench",
            "--problem",
            "opf.json",
            "--scheme",
            "alg2",
            "--bits",
            "128,256",
            "--iters",
            "1",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "key bits,samples,avg_seconds,max_seconds");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        // one iteration per agent: a single sample per agent
        assert_eq!(f[1], "2");
    }
}

const FIRST_EXAMPLE: &str = r#"{"schema":"hegrad.family/1","dims":[1,1,1],"rows":[
 {"agent":1,"coordinate":1,"a":["0","-1","-1"],"b":"0"},
 {"agent":2,"coordinate":1,"a":["0","0","-2"],"b":"0"},
 {"agent":3,"coordinate":1,"a":["-1","0","0"],"b":"0"}],
 "scenario":{"feasible_sets":[{"kind":"all_reals","dim":1},{"kind":"all_reals","dim":1},{"kind":"all_reals","dim":1}],
  "step":{"constant":"1"},"initial_state":["1","-3/2","5/2"],"iterations":2}}"#;

#[test]
fn ioi_reports_the_first_example_attack() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("first.json"), FIRST_EXAMPLE).unwrap();
    let o = hegrad(&["ioi", "--problem", "first.json", "--adversary", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("no guarantee"));
    assert!(text.contains("x2.1(0) = -3/2"));
    assert!(text.contains("x3.1(0) = 5/2"));
    assert!(text.contains("matches the true states: yes"));
}

#[test]
fn ioi_finds_the_all_ones_witness_for_a_constant_family() {
    let dir = TempDir::new().unwrap();
    let family = r#"{"schema":"hegrad.family/1","dims":[1,2],"rows":[
      {"agent":1,"coordinate":1,"a":["0","0","0"],"b":"1"},
      {"agent":2,"coordinate":1,"a":["0","0","0"],"b":"0"},
      {"agent":2,"coordinate":2,"a":["0","0","0"],"b":"2"}]}"#;
    std::fs::write(dir.path().join("zero.json"), family).unwrap();
    let o = hegrad(
        &["ioi", "--problem", "zero.json", "--adversary", "1", "--format", "json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let a = &v[0];
    assert_eq!(a["resistant"], true);
    assert_eq!(a["witness"], serde_json::json!([["0"], ["1", "1"]]));
    let rungs = a["ladder"]["rungs"].as_array().unwrap();
    assert_eq!(rungs.len(), 4);
    assert!(rungs.iter().all(|r| r["verified"] == true));
}

#[test]
fn ioi_accepts_problem_files_and_rejects_bad_adversaries() {
    let dir = TempDir::new().unwrap();
    build(
        dir.path(),
        "build-opf",
        "opf.json",
        &["--topology", "path", "--size", "2"],
    );
    let o = hegrad(&["ioi", "--problem", "opf.json", "--iters", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches("adversary: agent").count(), 2);
    let o = hegrad(&["ioi", "--problem", "opf.json", "--adversary", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn builders_accept_configuration_files() {
    let dir = TempDir::new().unwrap();
    let opf = r#"{"generators":[
        {"a":"0.1","b":"10","p_min":"10","p_max":"100","load":"10","damping":"1"},
        {"a":"0.2","b":"12","p_min":"5","p_max":"90","load":"20","damping":"1"}],
      "lines":[{"from":1,"to":2,"t":"1.5","capacity":"80"}],"gamma":"0.01"}"#;
    std::fs::write(dir.path().join("opf-config.json"), opf).unwrap();
    build(dir.path(), "build-opf", "opf.json", &["--config", "opf-config.json"]);
    let problem = std::fs::read_to_string(dir.path().join("opf.json")).unwrap();
    assert!(problem.contains("hegrad.problem/1"));

    std::fs::write(
        dir.path().join("broken.json"),
        r#"{"generators":[],"lines":[],"gamma":"1"}"#,
    )
    .unwrap();
    let o = hegrad(&["build-opf", "--config", "broken.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = hegrad(&["build-dr", "--size", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
