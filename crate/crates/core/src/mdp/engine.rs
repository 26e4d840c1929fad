//! Policy iteration under Dantzig's rule, with tie-breaking, traces,
//! watchers, and the two MDP decision problems.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{appeals, evaluate_values};
use super::model::{ActionId, Mdp, Policy, StateId, Valuation};
use super::MdpError;
use crate::numerics::Rational;

/// How to choose among several actions of equal maximal appeal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    LowestStateThenAction,
    HighestStateThenAction,
    SeededRandom(u64),
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TieBreak::LowestStateThenAction => f.write_str("lowest"),
            TieBreak::HighestStateThenAction => f.write_str("highest"),
            TieBreak::SeededRandom(seed) => write!(f, "seeded:{seed}"),
        }
    }
}

/// Parses `lowest`, `highest`, or `seeded:<u64>`.
impl FromStr for TieBreak {
    type Err = MdpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "lowest" => Ok(TieBreak::LowestStateThenAction),
            "highest" => Ok(TieBreak::HighestStateThenAction),
            other => other
                .strip_prefix("seeded:")
                .and_then(|x| x.parse().ok())
                .map(TieBreak::SeededRandom)
                .ok_or_else(|| MdpError::Malformed(format!("unknown tie-break rule '{other}'"))),
        }
    }
}

/// Stateful tie-breaker. Two breakers built from the same rule make the
/// same choices when offered the same candidate sets, which is what lets the
/// simplex and policy-iteration engines run in lockstep.
#[derive(Debug, Clone)]
pub struct TieBreaker {
    rule: TieBreak,
    rng: Option<ChaCha8Rng>,
}

impl TieBreaker {
    pub fn new(rule: TieBreak) -> Self {
        let rng = match rule {
            TieBreak::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        TieBreaker { rule, rng }
    }

    pub fn rule(&self) -> TieBreak {
        self.rule
    }

    /// Picks one `(state, action)` pair. Candidates are ordered by state then
    /// action first; the random rule draws only when there is a real tie.
    pub fn pick(&mut self, mut candidates: Vec<(StateId, ActionId)>) -> Option<(StateId, ActionId)> {
        candidates.sort_unstable();
        match (self.rule, candidates.len()) {
            (_, 0) => None,
            (_, 1) => Some(candidates[0]),
            (TieBreak::LowestStateThenAction, _) => candidates.first().copied(),
            (TieBreak::HighestStateThenAction, _) => candidates.last().copied(),
            (TieBreak::SeededRandom(_), len) => {
                let rng = self.rng.as_mut().expect("seeded rule has an rng");
                Some(candidates[rng.gen_range(0..len)])
            }
        }
    }
}

/// Picks the action of maximal positive appeal, or `None` at optimality.
fn select_dantzig(
    m: &Mdp,
    appeal: &[Rational],
    tie: &mut TieBreaker,
) -> Option<(StateId, ActionId, Rational)> {
    let best = appeal.iter().filter(|x| x.is_positive()).max()?.clone();
    let candidates: Vec<(StateId, ActionId)> =
        appeal.iter().enumerate().filter(|(_, x)| **x == best).map(|(a, _)| (m.action(a).state, a)).collect();
    tie.pick(candidates).map(|(s, a)| (s, a, best))
}

/// One switch performed by policy iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Zero-based index of the switch within its run.
    pub iteration: usize,
    pub state: StateId,
    pub old_action: ActionId,
    pub new_action: ActionId,
    pub appeal: Rational,
    /// Free-form tags added by auditors (phase, gadget role, ...).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<String>,
}

/// The starting policy plus every switch made from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: Policy,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Policies `σ_0, σ_1, …, σ_k` visited by the run (k + 1 entries).
    pub fn policies(&self, m: &Mdp) -> Vec<Policy> {
        let mut cur = self.initial.clone();
        let mut out = Vec::with_capacity(self.events.len() + 1);
        out.push(cur.clone());
        for e in &self.events {
            cur.switch_to(m, e.new_action);
            out.push(cur.clone());
        }
        out
    }

    pub fn final_policy(&self, m: &Mdp) -> Policy {
        let mut cur = self.initial.clone();
        for e in &self.events {
            cur.switch_to(m, e.new_action);
        }
        cur
    }

    /// One JSON object per line, with state and action names resolved.
    pub fn to_jsonl(&self, m: &Mdp) -> String {
        let mut out = String::new();
        for e in &self.events {
            let line = serde_json::json!({
                "iteration": e.iteration,
                "state": m.state_name(e.state),
                "old": m.action(e.old_action).label,
                "new": m.action(e.new_action).label,
                "old_action": e.old_action,
                "new_action": e.new_action,
                "appeal": e.appeal,
                "annotations": e.annotations,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Answer of a [`Watcher`] after observing a switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Watch {
    Continue,
    Stop,
}

/// Online observer of a policy-iteration run. `before`, `values` and
/// `appeal` describe the policy in force just before `event` is applied.
pub trait Watcher {
    fn observe(&mut self, event: &TraceEvent, before: &Policy, values: &Valuation, appeal: &[Rational]) -> Watch;
}

impl<F> Watcher for F
where
    F: FnMut(&TraceEvent, &Policy, &Valuation, &[Rational]) -> Watch,
{
    fn observe(&mut self, event: &TraceEvent, before: &Policy, values: &Valuation, appeal: &[Rational]) -> Watch {
        self(event, before, values, appeal)
    }
}

/// Run configuration for policy iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiOptions {
    pub tie: TieBreak,
    /// Maximum number of switches before giving up.
    pub budget: usize,
    /// Assert value monotonicity after every switch.
    pub check_monotone: bool,
}

impl PiOptions {
    pub fn new(tie: TieBreak, budget: usize) -> Self {
        PiOptions { tie, budget, check_monotone: true }
    }
}

/// Default switch budget `10 · 2^n · |S|`, saturating.
pub fn default_budget(n_bits: usize, states: usize) -> usize {
    let pow = 1usize.checked_shl(n_bits as u32).unwrap_or(usize::MAX);
    10usize.saturating_mul(pow).saturating_mul(states)
}

/// Result of a policy-iteration run.
#[derive(Debug, Clone)]
pub struct PiOutcome {
    pub policy: Policy,
    pub values: Valuation,
    pub trace: Trace,
    /// True when the run stopped because no action had positive appeal.
    pub optimal: bool,
}

/// Outcome of a single Dantzig step.
#[derive(Debug, Clone)]
pub enum Step {
    Optimal,
    Switched { policy: Policy, event: TraceEvent },
}

/// Evaluates `sigma` and switches one action of maximal positive appeal.
pub fn dantzig_step(m: &Mdp, sigma: &Policy, tie: &mut TieBreaker) -> Result<Step, MdpError> {
    let v = evaluate_values(m, sigma)?;
    let ap = appeals(m, sigma, &v);
    Ok(match select_dantzig(m, &ap, tie) {
        None => Step::Optimal,
        Some((s, a, appeal)) => {
            let event = TraceEvent { iteration: 0, state: s, old_action: sigma.get(s), new_action: a, appeal, annotations: vec![] };
            let mut next = sigma.clone();
            next.switch_to(m, a);
            Step::Switched { policy: next, event }
        }
    })
}

fn check_monotone(m: &Mdp, iteration: usize, old: &Valuation, new: &Valuation) -> Result<(), MdpError> {
    let mut strict = false;
    for s in 0..m.state_count() {
        match new[s].cmp(&old[s]) {
            std::cmp::Ordering::Less => {
                return Err(MdpError::MonotonicityViolation { iteration, state: m.state_name(s).to_string() })
            }
            std::cmp::Ordering::Greater => strict = true,
            std::cmp::Ordering::Equal => {}
        }
    }
    if strict {
        Ok(())
    } else {
        Err(MdpError::MonotonicityViolation { iteration, state: "<no strict increase>".into() })
    }
}

/// Runs Dantzig-rule policy iteration from `sigma0` until no action has
/// positive appeal. A watcher may stop it early; exceeding the budget is an error.
pub fn run_policy_iteration(
    m: &Mdp,
    sigma0: &Policy,
    opts: &PiOptions,
    watchers: &mut [&mut dyn Watcher],
) -> Result<PiOutcome, MdpError> {
    let mut tie = TieBreaker::new(opts.tie);
    let mut sigma = sigma0.clone();
    let mut values = evaluate_values(m, &sigma)?;
    let mut events = Vec::new();
    loop {
        let ap = appeals(m, &sigma, &values);
        let Some((s, a, appeal)) = select_dantzig(m, &ap, &mut tie) else {
            return Ok(PiOutcome { policy: sigma, values, trace: Trace { initial: sigma0.clone(), events }, optimal: true });
        };
        if events.len() >= opts.budget {
            return Err(MdpError::IterationBudgetExceeded { budget: opts.budget });
        }
        let event =
            TraceEvent { iteration: events.len(), state: s, old_action: sigma.get(s), new_action: a, appeal, annotations: vec![] };
        let mut stop = false;
        for w in watchers.iter_mut() {
            if w.observe(&event, &sigma, &values, &ap) == Watch::Stop {
                stop = true;
            }
        }
        sigma.switch_to(m, a);
        let next = evaluate_values(m, &sigma)?;
        if opts.check_monotone {
            check_monotone(m, event.iteration, &values, &next)?;
        }
        values = next;
        events.push(event);
        if stop {
            return Ok(PiOutcome { policy: sigma, values, trace: Trace { initial: sigma0.clone(), events }, optimal: false });
        }
    }
}

/// ActionSwitch: does policy iteration from `sigma0` ever install `a`?
pub fn decide_action_switch(m: &Mdp, sigma0: &Policy, a: ActionId, opts: &PiOptions) -> Result<bool, MdpError> {
    let mut hit = false;
    let mut watch = |e: &TraceEvent, _: &Policy, _: &Valuation, _: &[Rational]| {
        if e.new_action == a {
            hit = true;
            Watch::Stop
        } else {
            Watch::Continue
        }
    };
    run_policy_iteration(m, sigma0, opts, &mut [&mut watch])?;
    Ok(hit)
}

/// DantzigMdpSol: does the optimal policy found from `sigma0` use `a`?
pub fn decide_dantzig_mdp_sol(m: &Mdp, sigma0: &Policy, a: ActionId, opts: &PiOptions) -> Result<bool, MdpError> {
    let out = run_policy_iteration(m, sigma0, opts, &mut [])?;
    Ok(out.policy.uses(m, a))
}
