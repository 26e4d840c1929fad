//! `dantzig-lab`: build the constructions, run Dantzig's rule on them,
//! audit the traces, and decide the circuit-iteration problems both ways.

mod config;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use config::{CliError, Instance, RunConfig};
use dantzig_lab::circuit::{decide_bitswitch, decide_circuitvalue, negated_form};
use dantzig_lab::construction::{
    build_clock, build_construction_z, build_from_function, gate_state_name, initial_policy, ConstructionParams,
    Manifest,
};
use dantzig_lab::lp::check_pi_simplex_equivalence;
use dantzig_lab::mdp::{decide_action_switch, decide_dantzig_mdp_sol, run_policy_iteration, Mdp, Policy};
use dantzig_lab::verify::{
    audit_appeal_catalog, check_all_transitions, end_to_end, record_run, run_clock_check, EndToEndOptions,
};

#[derive(Debug, Parser)]
#[command(name = "dantzig-lab", version, about = "Exponential Dantzig-rule constructions, exactly")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an instance and write its manifest and MDP as JSON.
    Build {
        /// clock:n=K, a builtin circuit name or a JSON file (circuit or Turing machine).
        instance: String,
        /// Add the terminal gadget for bit Z (needs the input for the exact W).
        #[arg(long)]
        z: Option<usize>,
        #[arg(long)]
        input: Option<String>,
    },
    /// Run policy iteration with Dantzig's rule from the initial policy.
    Run {
        instance: String,
        #[arg(long)]
        input: Option<String>,
    },
    /// Audit a run against the closed-form oracles.
    Verify {
        which: Check,
        instance: String,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        z: Option<usize>,
    },
    /// Decide a circuit-iteration problem or its MDP counterpart.
    Decide {
        problem: Problem,
        instance: String,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        z: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Clock,
    Catalog,
    Transition,
    Equivalence,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Problem {
    Bitswitch,
    Circuitvalue,
    Actionswitch,
    Dantzigsol,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("dantzig-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    let cfg = &cli.config;
    match &cli.command {
        Command::Build { instance, z, input } => build(cfg, &Instance::load(instance)?, input.as_deref(), *z),
        Command::Run { instance, input } => run(cfg, &Instance::load(instance)?, input.as_deref()),
        Command::Verify { which, instance, input, z } => {
            verify(cfg, *which, &Instance::load(instance)?, input.as_deref(), *z)
        }
        Command::Decide { problem, instance, input, z } => {
            decide(cfg, *problem, &Instance::load(instance)?, input.as_deref(), *z)
        }
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(cfg: &RunConfig, report: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)?;
    match &cfg.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
            }
            fs::write(path, text + "\n").map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// A built MDP together with its start policy.
struct Built {
    m: Mdp,
    sigma: Policy,
    manifest: Value,
}

fn build_instance(cfg: &RunConfig, inst: &Instance, input: Option<&str>, z: Option<usize>) -> Result<Built, CliError> {
    let ov = cfg.overrides();
    match inst {
        Instance::Clock(n) => {
            let params = ConstructionParams::new(*n, 0, &ov)?;
            let (m, clock) = build_clock(&params)?;
            let sigma = Policy::first_actions(&m)?;
            let manifest = json!({ "overrides": ov, "params": params, "clock": clock });
            Ok(Built { m, sigma, manifest })
        }
        Instance::Function { f, .. } => {
            let b = inst.input(input)?;
            let c = negated_form(f);
            let (m, idx, params) = match z {
                Some(z) => build_construction_z(&c, &b, inst.z(Some(z))?, &ov, cfg.w_mode)?,
                None => {
                    let (_, m, idx, params) = build_from_function(f, &ov)?;
                    (m, idx, params)
                }
            };
            let sigma = initial_policy(&m, &idx, &b)?;
            let manifest = serde_json::to_value(Manifest::new(&c, &ov, &m, &idx, &params))?;
            Ok(Built { m, sigma, manifest })
        }
    }
}

fn build(cfg: &RunConfig, inst: &Instance, input: Option<&str>, z: Option<usize>) -> Result<u8, CliError> {
    let built = build_instance(cfg, inst, input, z)?;
    let summary = json!({
        "states": built.m.state_count(),
        "actions": built.m.action_count(),
    });
    if let Some(dir) = &cfg.out {
        write_file(dir, "manifest.json", &serde_json::to_string_pretty(&built.manifest)?)?;
        write_file(dir, "mdp.json", &serde_json::to_string_pretty(&built.m.to_json())?)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn run(cfg: &RunConfig, inst: &Instance, input: Option<&str>) -> Result<u8, CliError> {
    let built = build_instance(cfg, inst, input, None)?;
    let m = &built.m;
    let out = run_policy_iteration(m, &built.sigma, &cfg.pi(inst.n(), m.state_count()), &mut [])?;
    let policy: serde_json::Map<String, Value> = (0..m.state_count())
        .map(|s| (m.state_name(s).to_string(), Value::String(m.action(out.policy.get(s)).label.clone())))
        .collect();
    let summary = json!({
        "states": m.state_count(),
        "switches": out.trace.len(),
        "optimal": out.optimal,
        "tie": cfg.tie.to_string(),
    });
    if let Some(dir) = &cfg.out {
        write_file(dir, "trace.jsonl", &out.trace.to_jsonl(m))?;
        write_file(dir, "final_policy.json", &serde_json::to_string_pretty(&policy)?)?;
        write_file(dir, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn verify(cfg: &RunConfig, which: Check, inst: &Instance, input: Option<&str>, z: Option<usize>) -> Result<u8, CliError> {
    let mut report = serde_json::Map::new();
    let mut passed = true;
    let wants = |c: Check| which == c || which == Check::All;
    let is_clock = matches!(inst, Instance::Clock(_));

    if wants(Check::Clock) && (is_clock || which == Check::Clock) {
        let r = run_clock_check(inst.n(), &cfg.overrides(), cfg.tie)?;
        passed &= r.passed || r.expected_fail;
        report.insert("clock".into(), serde_json::to_value(&r)?);
    }
    if wants(Check::Equivalence) {
        let built = build_instance(cfg, inst, input, None)?;
        let sink = built.m.state_id("si").ok_or_else(|| CliError::Invariant("no sink state".into()))?;
        let budget = cfg.pi(inst.n(), built.m.state_count()).budget;
        let r = check_pi_simplex_equivalence(&built.m, sink, &built.sigma, cfg.tie, budget)?;
        passed &= r.equivalent;
        report.insert("equivalence".into(), serde_json::to_value(&r)?);
    }
    if !is_clock && (wants(Check::Catalog) || wants(Check::Transition)) {
        let f = inst.function()?;
        let b = inst.input(input)?;
        let (c, m, idx, params) = build_from_function(f, &cfg.overrides())?;
        let sigma = initial_policy(&m, &idx, &b)?;
        let run = record_run(&m, &idx, &params, &sigma, &cfg.pi(inst.n(), m.state_count()))?;
        if wants(Check::Catalog) {
            let r = audit_appeal_catalog(&m, &idx, &params, &run);
            passed &= r.passed;
            report.insert("catalog".into(), serde_json::to_value(&r)?);
        }
        if wants(Check::Transition) {
            let rs = check_all_transitions(&m, &idx, &params, &c, &run, &b)?;
            passed &= rs.iter().all(|r| r.passed);
            report.insert("transition".into(), serde_json::to_value(&rs)?);
        }
    } else if is_clock && matches!(which, Check::Catalog | Check::Transition) {
        return Err(CliError::Input("catalog and transition checks need a circuit instance".into()));
    }
    if which == Check::All && !is_clock {
        let opts = EndToEndOptions {
            overrides: cfg.overrides(),
            tie: cfg.tie,
            budget: cfg.budget.map(|b| b as usize),
            ..EndToEndOptions::default()
        };
        let r = end_to_end(inst.function()?, &inst.input(input)?, inst.z(z)?, &opts)?;
        passed &= r.passed;
        report.insert("end_to_end".into(), serde_json::to_value(&r)?);
    }
    report.insert("passed".into(), Value::Bool(passed));
    emit(cfg, &Value::Object(report))?;
    Ok(if passed { 0 } else { 4 })
}

fn decide(cfg: &RunConfig, problem: Problem, inst: &Instance, input: Option<&str>, z: Option<usize>) -> Result<u8, CliError> {
    let f = inst.function()?;
    let b = inst.input(input)?;
    let z = inst.z(z)?;
    let ov = cfg.overrides();
    let (name, verdict, oracle) = match problem {
        Problem::Bitswitch => ("bitswitch", decide_bitswitch(f, &b, z)?, None),
        Problem::Circuitvalue => ("circuitvalue", decide_circuitvalue(f, &b, z)?, None),
        Problem::Actionswitch => {
            let (_, m, idx, _) = build_from_function(f, &ov)?;
            let sigma = initial_policy(&m, &idx, &b)?;
            let a = m
                .find_action(idx.o(z, 0), &gate_state_name('r', 0, z))
                .ok_or_else(|| CliError::Invariant(format!("o0_{z} has no action to r0_{z}")))?;
            let v = decide_action_switch(&m, &sigma, a, &cfg.pi(inst.n(), m.state_count()))?;
            ("actionswitch", v, Some(("bitswitch", decide_bitswitch(f, &b, z)?)))
        }
        Problem::Dantzigsol => {
            let (m, idx, _) = build_construction_z(&negated_form(f), &b, z, &ov, cfg.w_mode)?;
            let sigma = initial_policy(&m, &idx, &b)?;
            let a = idx.terminal.as_ref().map(|t| t.o_to_r).ok_or_else(|| CliError::Invariant("no terminal gadget".into()))?;
            let v = decide_dantzig_mdp_sol(&m, &sigma, a, &cfg.pi(inst.n(), m.state_count()))?;
            ("dantzigsol", v, Some(("circuitvalue", decide_circuitvalue(f, &b, z)?)))
        }
    };
    let agree = oracle.map(|(_, o)| o == verdict);
    match oracle {
        Some((oname, o)) => println!(
            "{name}: {verdict} ({oname} oracle: {o}, {})",
            if o == verdict { "agree" } else { "DISAGREE" }
        ),
        None => println!("{name}: {verdict}"),
    }
    if cfg.out.is_some() {
        let report = json!({
            "problem": name,
            "input": b.to_string(),
            "z": z,
            "tie": cfg.tie.to_string(),
            "verdict": verdict,
            "oracle": oracle.map(|(_, o)| o),
            "agree": agree,
        });
        emit(cfg, &report)?;
    }
    Ok(match agree {
        Some(false) => 4,
        _ if verdict => 0,
        _ => 1,
    })
}
