//! End-to-end agreement between policy iteration on the construction and
//! direct simulation of the circuit.

use serde::{Deserialize, Serialize};

use super::{decode_inputs, record_run, RecordedRun, VerifyError};
use crate::circuit::{decide_bitswitch, decide_circuitvalue, negated_form, orbit, BitString, Circuit};
use crate::construction::{
    build_construction, build_construction_z, gate_state_name, initial_policy, ConstructionIndex, Overrides, WMode,
};
use crate::mdp::{default_budget, evaluate_gain, run_policy_iteration, Mdp, PiOptions, Policy, TieBreak};
use crate::numerics::Rational;

/// Run settings shared by every policy-iteration run of an end-to-end check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndToEndOptions {
    pub overrides: Overrides,
    pub tie: TieBreak,
    /// Switch budget; the default is `10 · 2^n · |S|`.
    pub budget: Option<usize>,
    pub w_modes: Vec<WMode>,
}

impl Default for EndToEndOptions {
    fn default() -> Self {
        EndToEndOptions {
            overrides: Overrides::default(),
            tie: TieBreak::default(),
            budget: None,
            w_modes: vec![WMode::Exact, WMode::Bound],
        }
    }
}

impl EndToEndOptions {
    fn pi(&self, n: usize, m: &Mdp) -> PiOptions {
        PiOptions::new(self.tie, self.budget.unwrap_or_else(|| default_budget(n, m.state_count())))
    }
}

/// Outcome of the run on `Const(C, z)` for one choice of `W`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalOutcome {
    pub w_mode: WMode,
    pub w: Rational,
    pub switches: usize,
    pub optimal: bool,
    /// Whether `b2` ends at `b1`.
    pub terminal_fired: bool,
    /// DantzigMdpSol: the optimal policy uses `o0_z → r0_z`.
    pub uses_o_to_r: bool,
    /// `o0_z` was switched after `b2` moved to `b1`, so the stored bit was
    /// overwritten by a later tie rather than fixed by the clock run.
    pub stored_bit_rewritten: bool,
    pub gain_zero_initial: bool,
    pub gain_zero_final: bool,
}

/// Result of an end-to-end check on one instance `(F, B, z)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndToEndReport {
    pub n: usize,
    pub input: BitString,
    pub z: usize,
    pub states: usize,
    pub actions: usize,
    pub switches: usize,
    pub clock_switches: usize,
    /// `B` followed by the string copied at the end of every phase.
    pub phases_decoded: Vec<BitString>,
    /// `B, F(B), …, F^{2^n}(B)`.
    pub phases_expected: Vec<BitString>,
    pub phases_match: bool,
    /// ActionSwitch: policy iteration on `Const(C)` installs `o0_z → r0_z`.
    pub action_switch: bool,
    pub oracle_bitswitch: bool,
    pub oracle_circuitvalue: bool,
    /// The gain of `Const(C)` is zero everywhere under `σ_init` and `σ*`.
    pub gain_zero: bool,
    pub terminal: Vec<TerminalOutcome>,
    pub passed: bool,
}

/// Bit strings held by the run: index 0 is what copy 0 holds initially and
/// index `p + 1` is what the copying circuit holds once phase `p` has
/// finished computing, read just before its first switch with appeal below
/// `7/2` (or at the end of the run).
pub fn phases_decoded(m: &Mdp, idx: &ConstructionIndex, run: &RecordedRun) -> Vec<BitString> {
    let policies = run.trace.policies(m);
    let mut out = vec![decode_inputs(m, idx, &run.trace.initial, 0)];
    let threshold = Rational::new(7, 2);
    let switches = run.clock_switches();
    let mut start = 0;
    for p in 0..=switches.len() {
        let end = switches.get(p).copied().unwrap_or(run.trace.len());
        let settle = (start..end).find(|&k| run.trace.events[k].appeal < threshold).unwrap_or(end);
        out.push(decode_inputs(m, idx, &policies[settle], 1 - p % 2));
        start = end + 1;
    }
    out
}

/// Builds `Const(C)` for the negated form of `f`, runs policy iteration from
/// `σ_init(b)`, decodes the phases, then runs `Const(C, z)` for every
/// requested `W` and compares every answer with the circuit oracles.
pub fn end_to_end(f: &Circuit, b: &BitString, z: usize, opts: &EndToEndOptions) -> Result<EndToEndReport, VerifyError> {
    let oracle_bitswitch = decide_bitswitch(f, b, z)?;
    let oracle_circuitvalue = decide_circuitvalue(f, b, z)?;
    let c = negated_form(f);
    let (m, idx, params) = build_construction(&c, &opts.overrides)?;
    let sigma = initial_policy(&m, &idx, b)?;
    let run = record_run(&m, &idx, &params, &sigma, &opts.pi(idx.n(), &m))?;
    let gain_zero = all_zero(&evaluate_gain(&m, &sigma)?) && all_zero(&evaluate_gain(&m, &run.final_policy)?);
    let decoded = phases_decoded(&m, &idx, &run);
    let expected = orbit(f, b)?;
    let phases_match = decoded == expected;
    let o_z = idx.o(z, 0);
    let r_z = gate_state_name('r', 0, z);
    let action_switch =
        run.trace.events.iter().any(|e| e.state == o_z && m.action(e.new_action).label == r_z);
    let mut terminal = Vec::new();
    for &w_mode in &opts.w_modes {
        terminal.push(run_terminal(&c, b, z, opts, w_mode)?);
    }
    let passed = phases_match
        && run.optimal
        && gain_zero
        && action_switch == oracle_bitswitch
        && terminal.iter().all(|t| {
            t.optimal && t.uses_o_to_r == oracle_circuitvalue && t.gain_zero_initial && t.gain_zero_final
        });
    Ok(EndToEndReport {
        n: idx.n(),
        input: b.clone(),
        z,
        states: m.state_count(),
        actions: m.action_count(),
        switches: run.trace.len(),
        clock_switches: run.clock_switches().len(),
        phases_decoded: decoded,
        phases_expected: expected,
        phases_match,
        action_switch,
        oracle_bitswitch,
        oracle_circuitvalue,
        gain_zero,
        terminal,
        passed,
    })
}

fn all_zero(g: &[Rational]) -> bool {
    g.iter().all(Rational::is_zero)
}

fn run_terminal(
    c: &Circuit,
    b: &BitString,
    z: usize,
    opts: &EndToEndOptions,
    w_mode: WMode,
) -> Result<TerminalOutcome, VerifyError> {
    let (m, idx, _) = build_construction_z(c, b, z, &opts.overrides, w_mode)?;
    let t = idx.terminal.clone().expect("terminal gadget was added");
    let sigma: Policy = initial_policy(&m, &idx, b)?;
    let out = run_policy_iteration(&m, &sigma, &opts.pi(idx.n(), &m), &mut [])?;
    let o_z = idx.o(z, 0);
    let fired_at = out.trace.events.iter().position(|e| e.state == t.b2 && e.new_action == t.b2_to_b1);
    let stored_bit_rewritten = fired_at.is_some_and(|k| out.trace.events[k + 1..].iter().any(|e| e.state == o_z));
    Ok(TerminalOutcome {
        w_mode,
        w: t.w.clone(),
        switches: out.trace.len(),
        optimal: out.optimal,
        terminal_fired: out.policy.get(t.b2) == t.b2_to_b1,
        uses_o_to_r: out.policy.uses(&m, t.o_to_r),
        stored_bit_rewritten,
        gain_zero_initial: all_zero(&evaluate_gain(&m, &sigma)?),
        gain_zero_final: all_zero(&evaluate_gain(&m, &out.policy)?),
    })
}
