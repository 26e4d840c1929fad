//! Independent oracles and trace auditors: the Gray-code clock oracle, the
//! coherence / correctness / finality predicates, the appeal catalog, the
//! phase-transition checker, and end-to-end agreement with the circuit
//! oracles.

mod catalog;
mod clock;
mod end_to_end;
mod policy;
mod transition;

pub use catalog::{audit_appeal_catalog, classify, CatalogReport, Classifier, Expectation, Role, RoleStats, ViolationEntry};
pub use clock::{
    bit, check_clock_trace, clock_expected_values, gray_code, lsz, run_clock_check, shift, ClockReport, ClockValues,
    Orientation,
};
pub use end_to_end::{end_to_end, phases_decoded, EndToEndOptions, EndToEndReport, TerminalOutcome};
pub use policy::{
    check_b_correct, check_coherent, check_final, decode_inputs, final_policy_violations, initial_policy_violations,
    CoherenceReport,
};
pub use transition::{check_phase_transition, check_all_transitions, TransitionReport};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::CircuitError;
use crate::construction::{ConstructionError, ConstructionIndex, ConstructionParams};
use crate::lp::LpError;
use crate::mdp::{run_policy_iteration, MdpError, PiOptions, Policy, Trace, TraceEvent, Valuation, Watch};
use crate::numerics::Rational;

/// Errors raised by the auditors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("clock deviates at iteration {iteration}: {detail}")]
    ClockDeviation { iteration: usize, detail: String },
    #[error("appeal catalog violated at iteration {iteration}: {detail}")]
    CatalogViolation { iteration: usize, detail: String },
    #[error("phase transition {boundary} violated: {detail}")]
    TransitionViolation { boundary: usize, detail: String },
    #[error("phase cannot be read from the clock outputs at iteration {iteration}")]
    PhaseUndetermined { iteration: usize },
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// The clock phase of a policy: `index` counts completed phases, and
/// `parity` is `j` in "phase `j`" (`val(c_{1−j}) = val(c_j) + T`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseInfo {
    pub index: usize,
    pub parity: usize,
}

/// Reads the phase from the values of `c0` and `c1`.
pub fn phase_of(values: &Valuation, idx: &ConstructionIndex, params: &ConstructionParams) -> Option<PhaseInfo> {
    let c0 = &values[idx.clock.c[0]];
    let c1 = &values[idx.clock.c[1]];
    let diff = c1 - c0;
    let parity = if diff == params.t {
        0
    } else if diff == -params.t.clone() {
        1
    } else {
        return None;
    };
    let low = c0.clone().min(c1.clone()) / &params.t;
    if !low.is_integer() || low.is_negative() {
        return None;
    }
    let index = low.numer().to_usize()?;
    (index % 2 == parity).then_some(PhaseInfo { index, parity })
}

/// A policy-iteration run on a construction, with the phase and gadget role
/// of every switch.
#[derive(Debug, Clone)]
pub struct RecordedRun {
    /// Events carry `phase=…`, `role=…` and `stage=…` annotations.
    pub trace: Trace,
    /// Phase of the policy in force just before each event.
    pub phases: Vec<PhaseInfo>,
    /// Role of each event.
    pub roles: Vec<Role>,
    pub final_policy: Policy,
    pub final_values: Valuation,
    pub optimal: bool,
}

impl RecordedRun {
    /// Indices of the events that advance the clock.
    pub fn clock_switches(&self) -> Vec<usize> {
        self.roles.iter().enumerate().filter(|(_, r)| matches!(r, Role::ClockAdvance { .. })).map(|(k, _)| k).collect()
    }
}

/// Runs policy iteration from `sigma0`, recording the phase and role of
/// every switch as it happens.
pub fn record_run(
    m: &crate::mdp::Mdp,
    idx: &ConstructionIndex,
    params: &ConstructionParams,
    sigma0: &Policy,
    opts: &PiOptions,
) -> Result<RecordedRun, VerifyError> {
    let classifier = Classifier::new(m, idx, params);
    let mut phases = Vec::new();
    let mut roles = Vec::new();
    let mut annotations: Vec<Vec<String>> = Vec::new();
    let mut failure: Option<usize> = None;
    let mut watch = |e: &TraceEvent, before: &Policy, values: &Valuation, _: &[Rational]| {
        let Some(phase) = phase_of(values, idx, params) else {
            failure.get_or_insert(e.iteration);
            return Watch::Stop;
        };
        let role = classifier.classify(e.state, e.new_action, phase.parity, before);
        annotations.push(vec![
            format!("phase={}", phase.index),
            format!("role={}", role.name()),
            format!("stage={}", role.stage()),
        ]);
        phases.push(phase);
        roles.push(role);
        Watch::Continue
    };
    let out = run_policy_iteration(m, sigma0, opts, &mut [&mut watch])?;
    if let Some(iteration) = failure {
        return Err(VerifyError::PhaseUndetermined { iteration });
    }
    let mut trace = out.trace;
    for (e, a) in trace.events.iter_mut().zip(annotations) {
        e.annotations = a;
    }
    Ok(RecordedRun { trace, phases, roles, final_policy: out.policy, final_values: out.values, optimal: out.optimal })
}
