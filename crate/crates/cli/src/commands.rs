use std::fs;
use std::path::{Path, PathBuf};

use hegrad_core::casestudies::{
    self, build_demand_response, demand_response_from_json, opf_from_json, synth_network, DemandResponseConfig,
    OpfConfig,
};
use hegrad_core::golden::{replay, Walkthrough};
use hegrad_core::ioi::{analyze, default_ladder, family_from_json, Dynamics, QuadraticFamily, Scenario, FAMILY_SCHEMA};
use hegrad_core::problem::ProblemInstance;
use hegrad_core::protocol::{
    compare_runs, deviation_csv, run_algorithm1, run_algorithm2, run_plain, trajectory_csv, DeviationReport, RunConfig,
    RunResult, SeededRandomness, TimingRow, TimingSummary,
};
use serde_json::json;

use crate::args::{BenchArgs, BuildArgs, Format, GoldenArgs, IoiArgs, KeygenArgs, RunArgs, SchemeArg, WalkthroughArg};
use crate::error::CliError;
use crate::keys;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&PathBuf>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_problem(path: &Path) -> Result<ProblemInstance, CliError> {
    let text = read(path)?;
    ProblemInstance::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Runs `problem` under `scheme`, generating keys of `bits` bits unless a
/// key file is given.
fn execute(
    problem: &ProblemInstance,
    scheme: SchemeArg,
    bits: u64,
    iters: usize,
    seed: u64,
    key_file: Option<&Path>,
) -> Result<RunResult, CliError> {
    let config = RunConfig::iterations(iters);
    let mut randomness = SeededRandomness::new(seed);
    let mut key_rng = keys::key_rng(seed);
    let run = match scheme {
        SchemeArg::Plain => run_plain(problem, iters)?,
        SchemeArg::Alg1 => {
            let key = match key_file {
                Some(path) => keys::load_singlemod(path)?,
                None => keys::singlemod_key(&mut key_rng, bits)?,
            };
            run_algorithm1(problem, &key, &config, &mut randomness)?
        }
        SchemeArg::Alg2 => {
            // the affine gate comes before the expensive key generation
            problem.affine_rows().map_err(|_| gate_error(problem))?;
            let keypairs = match key_file {
                Some(path) => keys::load_paillier(path)?,
                None => keys::paillier_keys(&mut key_rng, bits, problem.num_agents())?,
            };
            run_algorithm2(problem, &keypairs, &config, &mut randomness)?
        }
    };
    Ok(run)
}

fn gate_error(problem: &ProblemInstance) -> CliError {
    for i in 0..problem.num_agents() {
        for (l, g) in problem.gradients(i).iter().enumerate() {
            if g.state_degree() > 1 {
                return CliError::Gate(format!(
                    "gradient row {} of agent {} is not affine in the state (degree {}); \
                     the public-key protocol needs affine gradients",
                    l + 1,
                    i + 1,
                    g.state_degree()
                ));
            }
        }
    }
    CliError::Gate("gradients are not affine in the state".into())
}

fn deviation_json(report: &DeviationReport) -> String {
    let steps: Vec<_> = report
        .squared
        .iter()
        .zip(&report.norms)
        .enumerate()
        .map(|(k, (sq, norm))| json!({"step": k, "squared_deviation": sq.to_string(), "norm": norm}))
        .collect();
    serde_json::to_string_pretty(&steps).expect("deviation serializes") + "\n"
}

fn timing_text(table: &TimingSummary, format: Format) -> String {
    match format {
        Format::Text => table.to_text(),
        Format::Csv => table.to_csv(),
        Format::Json => serde_json::to_string_pretty(table).expect("timing table serializes") + "\n",
    }
}

pub fn run(args: RunArgs) -> Result<(), CliError> {
    keys::check_bits(args.bits)?;
    let problem = load_problem(&args.problem)?;
    let result = execute(
        &problem,
        args.scheme,
        args.bits,
        args.iters,
        args.seed.seed,
        args.key_file.as_deref(),
    )?;
    let plain = run_plain(&problem, args.iters)?;
    let deviation = compare_runs(&result, &plain)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let ext = if args.format == Format::Json { "json" } else { "csv" };
    write(&args.out.join("trajectory.csv"), &trajectory_csv(&result))?;
    write(&args.out.join("transcript.jsonl"), &result.transcript.to_jsonl())?;
    let mut table = TimingSummary::new("scheme");
    table.push(TimingRow::from_run(result.scheme.to_string(), &result));
    let timing_format = if args.format == Format::Json {
        Format::Json
    } else {
        Format::Csv
    };
    write(
        &args.out.join(format!("timing.{ext}")),
        &timing_text(&table, timing_format),
    )?;
    let deviation_text = match args.format {
        Format::Json => deviation_json(&deviation),
        _ => deviation_csv(&deviation),
    };
    write(&args.out.join(format!("deviation.{ext}")), &deviation_text)?;

    println!(
        "{}: {} agents, {} iterations, {} messages",
        result.scheme,
        problem.num_agents(),
        args.iters,
        result.transcript.len()
    );
    let finals: Vec<String> = result.final_state().iter().map(ToString::to_string).collect();
    println!("final state: [{}]", finals.join(", "));
    println!(
        "deviation from the plain run: {}",
        if deviation.is_zero() {
            "zero at every step".to_string()
        } else {
            format!("max {}", deviation.max_norm())
        }
    );
    println!("artifacts written to {}", args.out.display());
    Ok(())
}

pub fn golden(args: GoldenArgs) -> Result<(), CliError> {
    let which = match args.which {
        WalkthroughArg::Alg1 => Walkthrough::Alg1,
        WalkthroughArg::Alg2 => Walkthrough::Alg2,
    };
    let report = replay(which).map_err(|e| CliError::Runtime(format!("replay aborted: {e}")))?;
    print!("{report}");
    match report.first_mismatch() {
        Some(m) => Err(CliError::GoldenMismatch(format!(
            "golden mismatch in {}: got {}, expected {}",
            m.name, m.actual, m.expected
        ))),
        None => {
            println!("all {} values match", report.checks.len());
            Ok(())
        }
    }
}

pub fn bench(args: BenchArgs) -> Result<(), CliError> {
    if args.scheme == SchemeArg::Plain {
        return Err(CliError::Validation("bench needs --scheme alg1 or alg2".into()));
    }
    if args.bits.is_empty() {
        return Err(CliError::Validation("--bits needs at least one key length".into()));
    }
    for &bits in &args.bits {
        keys::check_bits(bits)?;
    }
    let problem = load_problem(&args.problem)?;
    let mut table = TimingSummary::new("key bits");
    for &bits in &args.bits {
        let run = execute(&problem, args.scheme, bits, args.iters, args.seed.seed, None)?;
        table.push(TimingRow::from_run(bits.to_string(), &run));
    }
    emit(args.out.as_ref(), &timing_text(&table, args.format))
}

fn load_ioi_input(path: &Path) -> Result<(QuadraticFamily, Scenario), CliError> {
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if value.get("schema").and_then(|s| s.as_str()) == Some(FAMILY_SCHEMA) {
        let (family, scenario) = family_from_json(&text)?;
        let scenario = scenario.unwrap_or_else(|| Scenario::default_for(&family));
        Ok((family, scenario))
    } else {
        let problem =
            ProblemInstance::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let family = QuadraticFamily::from_problem(&problem)?;
        let scenario = Scenario {
            dynamics: Dynamics::from_problem(&problem),
            iterations: 5,
        };
        Ok((family, scenario))
    }
}

pub fn ioi(args: IoiArgs) -> Result<(), CliError> {
    let (family, mut scenario) = load_ioi_input(&args.problem)?;
    if let Some(k) = args.iters {
        scenario.iterations = k;
    }
    let adversaries: Vec<usize> = match args.adversary {
        Some(a) if a == 0 || a > family.num_agents() => {
            return Err(CliError::Validation(format!(
                "--adversary must lie in 1..={}, got {a}",
                family.num_agents()
            )));
        }
        Some(a) => vec![a - 1],
        None => (0..family.num_agents()).collect(),
    };
    let ladder = default_ladder();
    let analyses = adversaries
        .iter()
        .map(|&i| analyze(&family, &scenario, i, &ladder))
        .collect::<Result<Vec<_>, _>>()?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&analyses).expect("analysis serializes") + "\n",
        _ => analyses.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"),
    };
    emit(args.out.as_ref(), &text)
}

pub fn build_dr(args: BuildArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => demand_response_from_json(&read(path)?)?,
        None => DemandResponseConfig::synthetic(&synth_network(args.topology.into(), args.size)?, args.supply)?,
    };
    let problem = build_demand_response(&cfg)?;
    emit(args.out.as_ref(), &(problem.to_json() + "\n"))
}

pub fn build_opf(args: BuildArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => opf_from_json(&read(path)?)?,
        None => OpfConfig::uniform(&synth_network(args.topology.into(), args.size)?),
    };
    let problem = casestudies::build_opf(&cfg)?;
    emit(args.out.as_ref(), &(problem.to_json() + "\n"))
}

pub fn keygen(args: KeygenArgs) -> Result<(), CliError> {
    keys::check_bits(args.bits)?;
    let mut rng = keys::key_rng(args.seed.seed);
    let material = match args.scheme {
        SchemeArg::Plain => return Err(CliError::Validation("plain runs need no keys".into())),
        SchemeArg::Alg1 => keys::describe_singlemod(&keys::singlemod_key(&mut rng, args.bits)?),
        SchemeArg::Alg2 => {
            if args.agents == 0 {
                return Err(CliError::Validation("--agents must be positive".into()));
            }
            keys::describe_paillier(&keys::paillier_keys(&mut rng, args.bits, args.agents)?)
        }
    };
    emit(args.out.as_ref(), &keys::to_file(material))
}
