//! Checks of the hand-over between consecutive phases: the policy reached
//! before the transition starts is final for the phase input, the
//! transition switches happen in their fixed order without touching the
//! copied outputs, and the clock switch leaves the initial policy of the
//! next phase for the next input.

use serde::{Deserialize, Serialize};

use super::{final_policy_violations, initial_policy_violations, RecordedRun, Role, VerifyError};
use crate::circuit::{BitString, Circuit};
use crate::construction::{ConstructionIndex, ConstructionParams, GateStates};
use crate::mdp::Mdp;
use crate::numerics::Rational;

/// Result of checking one phase boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionReport {
    /// Zero-based index of the clock switch that ends the phase.
    pub boundary: usize,
    /// Parity `j` of the phase being left.
    pub parity: usize,
    /// Input held by the computing circuit during the phase.
    pub input: BitString,
    /// Iteration of the first switch with appeal below `7/2`; the policy in
    /// force just before it is checked for finality.
    pub transition_start: usize,
    pub clock_switch: usize,
    pub final_violations: Vec<String>,
    /// Transition switches at output states of the copying circuit.
    pub copy_output_switches: Vec<usize>,
    /// Re-selections at OR output and operand states and at NOT outputs
    /// caused by the value changes of the transition.
    pub cascade_switches: usize,
    /// Transition switches that are neither one of the eight ordered steps
    /// nor a cascade.
    pub foreign_switches: Vec<usize>,
    /// Transition switches whose step number is smaller than a previous
    /// one. Reported only; it does not affect `passed`.
    pub out_of_order: Vec<usize>,
    pub post_violations: Vec<String>,
    pub passed: bool,
}

impl TransitionReport {
    pub fn ensure(&self) -> Result<(), VerifyError> {
        if self.passed {
            return Ok(());
        }
        let detail = format!(
            "final {:?}; copy-output switches {:?}; foreign {:?}; post {:?}",
            self.final_violations, self.copy_output_switches, self.foreign_switches, self.post_violations
        );
        Err(VerifyError::TransitionViolation { boundary: self.boundary, detail })
    }
}

/// `F(B)` for the function whose negated form is `c`.
fn step(c: &Circuit, b: &BitString) -> Result<BitString, VerifyError> {
    let out = c.apply(b)?;
    Ok(BitString::new(out.iter().map(|x| !x).collect()))
}

/// Checks the phase that ends at clock switch number `boundary` of `run`,
/// in which the computing circuit holds `input`.
pub fn check_phase_transition(
    m: &Mdp,
    idx: &ConstructionIndex,
    params: &ConstructionParams,
    c: &Circuit,
    run: &RecordedRun,
    boundary: usize,
    input: &BitString,
) -> Result<TransitionReport, VerifyError> {
    let switches = run.clock_switches();
    let Some(&clock_switch) = switches.get(boundary) else {
        return Err(VerifyError::TransitionViolation {
            boundary,
            detail: format!("the run has only {} clock switches", switches.len()),
        });
    };
    let start = if boundary == 0 { 0 } else { switches[boundary - 1] + 1 };
    let parity = run.phases[clock_switch].parity;
    let threshold = Rational::new(7, 2);
    let events = &run.trace.events;
    let transition_start = (start..=clock_switch).find(|&k| events[k].appeal < threshold).unwrap_or(clock_switch);
    let policies = run.trace.policies(m);
    let final_violations =
        final_policy_violations(m, idx, params, c, &policies[transition_start], input, parity)?;
    let copy_outputs: Vec<_> = (1..=idx.n())
        .map(|i| match *idx.gate(i, 1 - parity) {
            GateStates::Input { o, .. } => o,
            _ => unreachable!("gates 1..=n are input bits"),
        })
        .collect();
    let mut copy_output_switches = Vec::new();
    let mut cascade_switches = 0;
    let mut foreign_switches = Vec::new();
    let mut out_of_order = Vec::new();
    let mut last_step = 0;
    for k in transition_start..=clock_switch {
        if copy_outputs.contains(&events[k].state) {
            copy_output_switches.push(k);
        }
        match run.roles[k].transition_step() {
            Some(s) => {
                if s < last_step {
                    out_of_order.push(k);
                }
                last_step = s;
            }
            None if run.roles[k] == Role::GateCompute => cascade_switches += 1,
            None => foreign_switches.push(k),
        }
    }
    let next = step(c, input)?;
    let post_violations = if matches!(run.roles[clock_switch], Role::ClockAdvance { .. }) {
        initial_policy_violations(m, idx, &policies[clock_switch + 1], &next, 1 - parity)?
    } else {
        vec![format!("event {clock_switch} is not a clock switch")]
    };
    let passed = final_violations.is_empty()
        && copy_output_switches.is_empty()
        && foreign_switches.is_empty()
        && post_violations.is_empty();
    Ok(TransitionReport {
        boundary,
        parity,
        input: input.clone(),
        transition_start,
        clock_switch,
        final_violations,
        copy_output_switches,
        cascade_switches,
        foreign_switches,
        out_of_order,
        post_violations,
        passed,
    })
}

/// Checks every phase boundary of a run that started from the initial
/// policy for `b`.
pub fn check_all_transitions(
    m: &Mdp,
    idx: &ConstructionIndex,
    params: &ConstructionParams,
    c: &Circuit,
    run: &RecordedRun,
    b: &BitString,
) -> Result<Vec<TransitionReport>, VerifyError> {
    let mut input = b.clone();
    let mut out = Vec::new();
    for boundary in 0..run.clock_switches().len() {
        out.push(check_phase_transition(m, idx, params, c, run, boundary, &input)?);
        input = step(c, &input)?;
    }
    Ok(out)
}
