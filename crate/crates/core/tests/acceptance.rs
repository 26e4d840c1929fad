//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. All comparisons are exact rationals.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dantzig_lab::circuit::{
    compile_turing_machine, decide_circuitvalue, library, simulate, BitString, Circuit, Move, TmVerdict, Transition,
    TuringMachine,
};
use dantzig_lab::construction::{
    build_clock, build_from_function, initial_policy, AlphaMode, ConstructionParams, Overrides, WMode,
};
use dantzig_lab::lp::check_pi_simplex_equivalence;
use dantzig_lab::mdp::{
    add_gadget, appeals, default_budget, evaluate_values, Mdp, PiOptions, Policy, TieBreak,
};
use dantzig_lab::verify::{
    audit_appeal_catalog, end_to_end, record_run, run_clock_check, EndToEndOptions, EndToEndReport,
};
use dantzig_lab::Rational;

const CLOCK_LIMIT: Duration = Duration::from_secs(5);
const INSTANCE_LIMIT: Duration = Duration::from_secs(60);
const GADGET_SAMPLES: usize = 500;
const GADGET_SEED: u64 = 0x5eed_6ad6;

struct Instance {
    name: &'static str,
    f: Circuit,
    b: &'static str,
    z: usize,
}

fn instances() -> Vec<Instance> {
    vec![
        Instance { name: "rotation", f: library::rotation(), b: "11", z: 1 },
        Instance { name: "or-latch", f: library::or_latch(), b: "01", z: 2 },
        Instance { name: "and-shift", f: library::and_shift(), b: "11", z: 1 },
        Instance { name: "identity:n=2", f: library::builtin("identity:n=2").unwrap(), b: "11", z: 2 },
        Instance { name: "twisted-shift3", f: library::twisted_shift3(), b: "101", z: 1 },
    ]
}

struct Gate {
    results: Vec<(usize, &'static str, bool, String)>,
}

impl Gate {
    fn record(&mut self, id: usize, name: &'static str, ok: bool, detail: String) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} [{id:>2}] {name}: {detail}");
        self.results.push((id, name, ok, detail));
    }
}

fn clock_reproduction() -> (bool, String) {
    let mut worst = Duration::ZERO;
    let mut failures = Vec::new();
    for n in 1..=8 {
        let start = Instant::now();
        let report = run_clock_check(n, &Overrides::default(), TieBreak::default());
        let took = start.elapsed();
        worst = worst.max(took);
        match report {
            Ok(r) if r.passed && r.switches as u64 == (1u64 << n) - 1 => {}
            Ok(r) => failures.push(format!("n={n} first deviation {:?}", r.first_deviation)),
            Err(e) => failures.push(format!("n={n}: {e}")),
        }
        if n == 8 && took > CLOCK_LIMIT {
            failures.push(format!("n=8 took {took:?}"));
        }
    }
    let ok = failures.is_empty();
    let detail = if ok {
        format!("n=1..8 exact, slowest run {worst:.2?}")
    } else {
        failures.join("; ")
    };
    (ok, detail)
}

fn appeal_catalog() -> (bool, String) {
    let b: BitString = "11".parse().unwrap();
    let (_, m, idx, params) = match build_from_function(&library::rotation(), &Overrides::default()) {
        Ok(x) => x,
        Err(e) => return (false, e.to_string()),
    };
    let sigma = initial_policy(&m, &idx, &b).unwrap();
    let opts = PiOptions::new(TieBreak::default(), default_budget(idx.n(), m.state_count()));
    let run = match record_run(&m, &idx, &params, &sigma, &opts) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let report = audit_appeal_catalog(&m, &idx, &params, &run);
    let roles: Vec<String> = report
        .roles
        .iter()
        .map(|(name, s)| if s.min == s.max { format!("{name}={}", s.min) } else { format!("{name}∈[{}, {}]", s.min, s.max) })
        .collect();
    let detail = format!(
        "rotation B=11: {} switches, {} violations, {} at appeal 1, missing {:?}; {}",
        report.switches,
        report.violations.len(),
        report.appeal_one_switches.len(),
        report.missing_roles,
        roles.join(", ")
    );
    (report.passed, detail)
}

fn run_instances(tie: TieBreak) -> Vec<(String, Result<EndToEndReport, String>, Duration)> {
    let opts = EndToEndOptions { tie, ..EndToEndOptions::default() };
    instances()
        .into_iter()
        .map(|inst| {
            let b: BitString = inst.b.parse().unwrap();
            let start = Instant::now();
            let r = end_to_end(&inst.f, &b, inst.z, &opts).map_err(|e| e.to_string());
            (format!("{} B={} z={}", inst.name, inst.b, inst.z), r, start.elapsed())
        })
        .collect()
}

fn action_switch(runs: &[(String, Result<EndToEndReport, String>, Duration)]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, r, took) in runs {
        match r {
            Ok(r) => {
                let good = r.action_switch == r.oracle_bitswitch && r.phases_match && *took <= INSTANCE_LIMIT;
                ok &= good;
                parts.push(format!(
                    "{name}: switch={} oracle={} phases={} {took:.1?}",
                    r.action_switch, r.oracle_bitswitch, r.phases_match
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    (ok, parts.join("; "))
}

fn dantzig_sol(runs: &[(String, Result<EndToEndReport, String>, Duration)]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, r, _) in runs {
        let Ok(r) = r else {
            ok = false;
            parts.push(format!("{name}: no report"));
            continue;
        };
        let modes = [WMode::Exact, WMode::Bound];
        let covered = modes.iter().all(|w| r.terminal.iter().any(|t| t.w_mode == *w));
        let good = covered
            && r.terminal.iter().all(|t| t.optimal && t.terminal_fired && t.uses_o_to_r == r.oracle_circuitvalue);
        ok &= good;
        let got: Vec<String> = r.terminal.iter().map(|t| format!("{:?}:{}", t.w_mode, t.uses_o_to_r)).collect();
        parts.push(format!("{name}: oracle={} {}", r.oracle_circuitvalue, got.join(" ")));
    }
    (ok, parts.join("; "))
}

fn lp_equivalence() -> (bool, String) {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in 1..=3 {
        let params = ConstructionParams::new(n, 0, &Overrides::default()).unwrap();
        let (m, clock) = build_clock(&params).unwrap();
        let sigma = Policy::first_actions(&m).unwrap();
        match check_pi_simplex_equivalence(&m, clock.si, &sigma, TieBreak::default(), default_budget(n, m.state_count())) {
            Ok(r) => {
                ok &= r.equivalent;
                parts.push(format!("clock n={n}: {} pivots equivalent={}", r.pivots, r.equivalent));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("clock n={n}: {e}"));
            }
        }
    }
    let b: BitString = "11".parse().unwrap();
    let (_, m, idx, _) = build_from_function(&library::rotation(), &Overrides::default()).unwrap();
    let sigma = initial_policy(&m, &idx, &b).unwrap();
    match check_pi_simplex_equivalence(&m, idx.clock.si, &sigma, TieBreak::default(), default_budget(idx.n(), m.state_count())) {
        Ok(r) => {
            ok &= r.equivalent;
            parts.push(format!("Const(C) rotation B=11: {} pivots equivalent={}", r.pivots, r.equivalent));
        }
        Err(e) => {
            ok = false;
            parts.push(format!("Const(C) rotation: {e}"));
        }
    }
    (ok, parts.join("; "))
}

fn random_rational(rng: &mut ChaCha8Rng, span: i64) -> Rational {
    Rational::new(rng.gen_range(-span..=span), rng.gen_range(1..=12))
}

/// One random embedding: `s` has a direct edge to the sink and a gadget to
/// `t`; `t` reaches the sink through an intermediate state `u` so that its
/// value is a random combination rather than a single reward.
fn gadget_sample(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let mut m = Mdp::new();
    let si = m.add_state("si").map_err(|e| e.to_string())?;
    m.add_edge(si, si, Rational::from(0i64)).map_err(|e| e.to_string())?;
    let u = m.add_state("u").map_err(|e| e.to_string())?;
    let ru = random_rational(rng, 50);
    m.add_edge(u, si, ru.clone()).map_err(|e| e.to_string())?;
    let t = m.add_state("t").map_err(|e| e.to_string())?;
    let rt = random_rational(rng, 50);
    m.add_edge(t, u, rt.clone()).map_err(|e| e.to_string())?;
    let s = m.add_state("s").map_err(|e| e.to_string())?;
    let rs = random_rational(rng, 50);
    let direct = m.add_edge(s, si, rs.clone()).map_err(|e| e.to_string())?;
    let rd = random_rational(rng, 20);
    let rf = random_rational(rng, 20);
    let p = Rational::new(rng.gen_range(1..=1000), 1000);
    let g = add_gadget(&mut m, s, t, rd.clone(), rf.clone(), p.clone()).map_err(|e| e.to_string())?;

    let val_t = &ru + &rt;
    let mut sigma = Policy::first_actions(&m).map_err(|e| e.to_string())?;
    if !sigma.uses(&m, direct) {
        return Err("first-action policy does not start at the direct edge".into());
    }
    let v = evaluate_values(&m, &sigma).map_err(|e| e.to_string())?;
    if v[t] != val_t || v[s] != rs {
        return Err(format!("values {} {} differ from hand values {val_t} {rs}", v[t], v[s]));
    }
    let b = &val_t - &rs;
    let ap = appeals(&m, &sigma, &v);
    let want = &p * (&b + &rf) + &rd;
    if ap[g] != want {
        return Err(format!("unused gadget appeal {} expected {want}", ap[g]));
    }
    sigma.switch_to(&m, g);
    let v = evaluate_values(&m, &sigma).map_err(|e| e.to_string())?;
    let want = &val_t + &rf + &rd / &p;
    if v[s] != want {
        return Err(format!("used gadget value {} expected {want}", v[s]));
    }
    Ok(())
}

fn gadget_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(GADGET_SEED);
    let mut failures = Vec::new();
    for k in 0..GADGET_SAMPLES {
        if let Err(e) = gadget_sample(&mut rng) {
            failures.push(format!("sample {k}: {e}"));
        }
    }
    let ok = failures.is_empty();
    let detail = if ok {
        format!("{GADGET_SAMPLES} embeddings, both clauses exact")
    } else {
        format!("{} of {GADGET_SAMPLES} failed, first {}", failures.len(), failures[0])
    };
    (ok, detail)
}

fn zero_gain(runs: &[(String, Result<EndToEndReport, String>, Duration)]) -> (bool, String) {
    let mut ok = true;
    let mut bad = Vec::new();
    for (name, r, _) in runs {
        let good = r
            .as_ref()
            .is_ok_and(|r| r.gain_zero && r.terminal.iter().all(|t| t.gain_zero_initial && t.gain_zero_final));
        if !good {
            ok = false;
            bad.push(name.clone());
        }
    }
    let detail = if ok {
        format!("{} instances, Const(C) and Const(C,z) under both W", runs.len())
    } else {
        format!("nonzero gain or missing report on {bad:?}")
    };
    (ok, detail)
}

type Verdicts = Vec<(bool, Vec<bool>)>;

fn verdicts(runs: &[(String, Result<EndToEndReport, String>, Duration)]) -> Option<Verdicts> {
    runs.iter()
        .map(|(_, r, _)| r.as_ref().ok().map(|r| (r.action_switch, r.terminal.iter().map(|t| t.uses_o_to_r).collect())))
        .collect()
}

fn tie_invariance(base: &[(String, Result<EndToEndReport, String>, Duration)]) -> (bool, String) {
    let Some(reference) = verdicts(base) else {
        return (false, "a reference run failed".into());
    };
    let rules = [TieBreak::HighestStateThenAction, TieBreak::SeededRandom(1), TieBreak::SeededRandom(2)];
    let mut ok = true;
    let mut parts = Vec::new();
    for rule in rules {
        let runs = run_instances(rule);
        let Some(got) = verdicts(&runs) else {
            ok = false;
            parts.push(format!("{rule}: a run failed"));
            continue;
        };
        let differing: Vec<String> = base
            .iter()
            .zip(reference.iter().zip(&got))
            .filter(|(_, (a, b))| a != b)
            .map(|((name, _, _), _)| name.clone())
            .collect();
        let rewritten: Vec<String> = runs
            .iter()
            .filter(|(_, r, _)| r.as_ref().is_ok_and(|r| r.terminal.iter().any(|t| t.stored_bit_rewritten)))
            .map(|(name, _, _)| name.clone())
            .collect();
        if differing.is_empty() {
            parts.push(format!("{rule}: identical"));
        } else {
            ok = false;
            parts.push(format!("{rule}: differs on {differing:?}, o0_z switched after b2->b1 on {rewritten:?}"));
        }
    }
    (ok, parts.join("; "))
}

fn tr(state: &str, read: u8, write: u8, movement: Move, next: &str) -> Transition {
    Transition { state: state.into(), read, write, movement, next: next.into() }
}

fn machine(states: &[&str], accept: &[&str], transitions: Vec<Transition>) -> TuringMachine {
    TuringMachine {
        states: states.iter().map(|s| s.to_string()).collect(),
        start: states[0].to_string(),
        accept: accept.iter().map(|s| s.to_string()).collect(),
        transitions,
        head_start: 0,
        space_bound: 3,
        input: None,
    }
}

fn turing_pipeline() -> (bool, String) {
    let seek_one = machine(
        &["scan", "yes"],
        &["yes"],
        vec![tr("scan", 0, 0, Move::Right, "scan"), tr("scan", 1, 1, Move::Right, "yes")],
    );
    let parity = machine(
        &["even", "odd", "yes"],
        &["yes"],
        vec![
            tr("even", 0, 0, Move::Right, "even"),
            tr("even", 1, 0, Move::Right, "odd"),
            tr("odd", 0, 0, Move::Right, "odd"),
            tr("odd", 1, 0, Move::Right, "even"),
        ],
    );
    let bouncer = machine(
        &["r", "l", "yes"],
        &["yes"],
        vec![tr("r", 0, 1, Move::Right, "l"), tr("r", 1, 1, Move::Right, "yes"), tr("l", 0, 0, Move::Left, "r"), tr("l", 1, 1, Move::Left, "r")],
    );
    let cases: Vec<(&str, &TuringMachine, Vec<bool>)> = vec![
        ("seek-one 001", &seek_one, vec![false, false, true]),
        ("seek-one 000", &seek_one, vec![false, false, false]),
        ("parity 110", &parity, vec![true, true, false]),
        ("bouncer 000", &bouncer, vec![false, false, false]),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, tm, input) in cases {
        let verdict = simulate(tm, &input, 3);
        let compiled = compile_turing_machine(tm, &input, 3).and_then(|(c, b, z)| decide_circuitvalue(&c, &b, z).map(|v| (v, c.n())));
        match (verdict, compiled) {
            (Ok(v), Ok((accepts, n))) => {
                let good = accepts == (v == TmVerdict::Accept);
                ok &= good;
                parts.push(format!("{name}: simulator {v:?}, circuit n={n} accepts={accepts}"));
            }
            (v, c) => {
                ok = false;
                parts.push(format!("{name}: {:?} {:?}", v.err(), c.err()));
            }
        }
    }
    (ok, parts.join("; "))
}

fn calibration() -> (bool, String) {
    let printed = Overrides { alpha: AlphaMode::Printed, ..Overrides::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [3, 8] {
        let p = run_clock_check(n, &printed, TieBreak::default());
        let c = run_clock_check(n, &Overrides::default(), TieBreak::default());
        match (p, c) {
            (Ok(p), Ok(c)) => {
                let good = !p.passed && p.expected_fail && !p.appeal_band_holds && c.passed;
                ok &= good;
                parts.push(format!(
                    "n={n}: printed band={} expected-fail={}, calibrated passed={}",
                    p.appeal_band_holds, p.expected_fail, c.passed
                ));
            }
            (p, c) => {
                ok = false;
                parts.push(format!("n={n}: {:?} {:?}", p.err(), c.err()));
            }
        }
    }
    (ok, parts.join("; "))
}

fn main() -> ExitCode {
    let mut gate = Gate { results: Vec::new() };
    let (ok, d) = clock_reproduction();
    gate.record(1, "clock reproduction", ok, d);
    let (ok, d) = appeal_catalog();
    gate.record(2, "appeal catalog", ok, d);
    let base = run_instances(TieBreak::default());
    let (ok, d) = action_switch(&base);
    gate.record(3, "end-to-end ActionSwitch", ok, d);
    let (ok, d) = dantzig_sol(&base);
    gate.record(4, "end-to-end DantzigMdpSol", ok, d);
    let (ok, d) = lp_equivalence();
    gate.record(5, "PI-simplex lockstep", ok, d);
    let (ok, d) = gadget_suite();
    gate.record(6, "gadget property suite", ok, d);
    let (ok, d) = zero_gain(&base);
    gate.record(7, "zero gain", ok, d);
    let (ok, d) = tie_invariance(&base);
    gate.record(8, "tie-break invariance", ok, d);
    let (ok, d) = turing_pipeline();
    gate.record(9, "TM pipeline", ok, d);
    let (ok, d) = calibration();
    gate.record(10, "calibration regression", ok, d);
    let passed = gate.results.iter().filter(|r| r.2).count();
    println!("acceptance: {passed}/{} criteria passed", gate.results.len());
    if passed == gate.results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
