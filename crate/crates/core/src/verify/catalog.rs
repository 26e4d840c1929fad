//! Classification of every policy-iteration switch on a construction by the
//! gadget it belongs to, and the audit of the observed appeals against the
//! expected value or range of each class.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{RecordedRun, VerifyError};
use crate::construction::{AlphaMode, ConstructionIndex, ConstructionParams, GateStates};
use crate::mdp::{ActionId, Mdp, Policy, StateId};
use crate::numerics::Rational;

/// The gadget class of a switch, relative to the phase `j` in which it
/// happens. "Own" and "other" refer to the clock outputs `c_j`, `c_{1−j}`
/// seen from the copy that owns the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum Role {
    /// Clock state `i` flips.
    ClockAdvance { i: usize },
    /// `l^{1−j} → c_{1−j}`.
    LCopyToOwn,
    /// `r^{1−j} → c_{1−j}`.
    RCopyToOwn,
    /// `l^j → c_{1−j}`.
    LOutToOther,
    /// `o^j → l^j` for a bit that held 0.
    Rehome,
    /// `r^j → o^{1−j}`.
    ROutToOther,
    /// `a^{1−j} → c_{1−j}`.
    NotResetOther,
    /// `x → c_{1−j}` in either copy.
    OrReset,
    /// `o^{1−j} → r^{1−j}`: the copying circuit records a 1 output of `C`.
    Copy,
    /// `o^{1−j} → l^{1−j}`.
    Residual,
    /// `a^j → c_{1−j}` for a NOT gate of depth `d`.
    NotActivate { d: usize },
    /// `o^j → a^j`.
    NotOutput,
    /// An OR output or operand state, or a NOT output moving to its operand,
    /// or a copy-`(1−j)` NOT output moving to its activation state.
    GateCompute,
    /// `b2 → b1`.
    Terminal,
    /// `l0_z → b2` or `r0_z → b2`.
    TerminalEntry,
    /// Any switch made after `b2` has moved to `b1`.
    TerminalSettle,
    /// Anything not listed above.
    Unexpected,
}

impl Role {
    pub fn name(&self) -> String {
        match self {
            Role::ClockAdvance { i } => format!("clock-advance[{i}]"),
            Role::NotActivate { d } => format!("not-activate[{d}]"),
            Role::LCopyToOwn => "l-copy-to-own".into(),
            Role::RCopyToOwn => "r-copy-to-own".into(),
            Role::LOutToOther => "l-out-to-other".into(),
            Role::Rehome => "rehome".into(),
            Role::ROutToOther => "r-out-to-other".into(),
            Role::NotResetOther => "not-reset-other".into(),
            Role::OrReset => "or-reset".into(),
            Role::Copy => "copy".into(),
            Role::Residual => "residual".into(),
            Role::NotOutput => "not-output".into(),
            Role::GateCompute => "gate-compute".into(),
            Role::Terminal => "terminal".into(),
            Role::TerminalEntry => "terminal-entry".into(),
            Role::TerminalSettle => "terminal-settle".into(),
            Role::Unexpected => "unexpected".into(),
        }
    }

    /// Position of the role in the ordered phase transition (1 to 8).
    pub fn transition_step(&self) -> Option<u8> {
        Some(match self {
            Role::LCopyToOwn => 1,
            Role::RCopyToOwn => 2,
            Role::LOutToOther => 3,
            Role::Rehome => 4,
            Role::ROutToOther => 5,
            Role::NotResetOther => 6,
            Role::OrReset => 7,
            Role::ClockAdvance { .. } => 8,
            _ => return None,
        })
    }

    pub fn stage(&self) -> String {
        if let Some(k) = self.transition_step() {
            return format!("transition-{k}");
        }
        match self {
            Role::Copy | Role::Residual => "copy",
            Role::NotActivate { .. } | Role::NotOutput | Role::GateCompute => "compute",
            Role::Terminal | Role::TerminalEntry | Role::TerminalSettle => "terminal",
            _ => "unexpected",
        }
        .into()
    }

    /// The appeal this role is expected to have.
    pub fn expectation(&self, params: &ConstructionParams, w: Option<&Rational>) -> Expectation {
        let r = Rational::new;
        let half_t = &params.t * r(1, 2);
        match *self {
            Role::ClockAdvance { i } => {
                let base = ConstructionParams::clock_appeal(i);
                Expectation::Exact(match params.alpha_mode {
                    AlphaMode::Calibrated => base,
                    AlphaMode::Printed => base * Rational::integer(2),
                })
            }
            Role::LCopyToOwn => Expectation::Exact(r(17, 5)),
            Role::RCopyToOwn => Expectation::Range { lo: r(16, 5), hi: params.rjprime.clone() },
            Role::LOutToOther => Expectation::Exact(r(8, 5)),
            Role::Rehome => Expectation::Exact(&params.p3 * (&half_t + params.mid())),
            Role::ROutToOther => Expectation::Range {
                lo: &params.ro * &half_t / (&half_t + &params.h[params.d_c]),
                hi: params.ro.clone(),
            },
            Role::NotResetOther => Expectation::Exact(r(19, 20)),
            Role::OrReset => Expectation::Exact(r(9, 10)),
            Role::Copy => Expectation::Exact(r(9, 2)),
            Role::Residual => Expectation::Below(params.magic.clone()),
            Role::NotActivate { d } => Expectation::Exact(ConstructionParams::not_activation_appeal(d)),
            Role::NotOutput => Expectation::Exact(Rational::integer(4)),
            Role::GateCompute => Expectation::AtLeast(r(7, 2)),
            Role::Terminal => Expectation::Exact(r(1, 5)),
            Role::TerminalEntry => match w {
                Some(w) => Expectation::AtLeast(w.clone()),
                None => Expectation::Any,
            },
            Role::TerminalSettle => Expectation::Any,
            Role::Unexpected => Expectation::Never,
        }
    }
}

/// Expected appeal of a role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Expectation {
    Exact(Rational),
    /// Inclusive on both ends.
    Range { lo: Rational, hi: Rational },
    AtLeast(Rational),
    /// Strictly below.
    Below(Rational),
    Any,
    Never,
}

impl Expectation {
    pub fn holds(&self, x: &Rational) -> bool {
        match self {
            Expectation::Exact(v) => x == v,
            Expectation::Range { lo, hi } => lo <= x && x <= hi,
            Expectation::AtLeast(v) => x >= v,
            Expectation::Below(v) => x < v,
            Expectation::Any => true,
            Expectation::Never => false,
        }
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Exact(v) => write!(f, "= {v}"),
            Expectation::Range { lo, hi } => write!(f, "in [{lo}, {hi}]"),
            Expectation::AtLeast(v) => write!(f, ">= {v}"),
            Expectation::Below(v) => write!(f, "< {v}"),
            Expectation::Any => write!(f, "any"),
            Expectation::Never => write!(f, "never"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Owner {
    Level(usize),
    Input { kind: char, copy: usize },
    Or { copy: usize },
    Not { kind: char, copy: usize, d: usize },
    B2,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Clock(usize),
    Gate { kind: char, copy: usize },
    B1,
    B2,
    Other,
}

/// Maps switches of one construction to their [`Role`].
#[derive(Debug, Clone)]
pub struct Classifier<'a> {
    m: &'a Mdp,
    idx: &'a ConstructionIndex,
    owner: Vec<Owner>,
    target_of: Vec<Target>,
}

impl<'a> Classifier<'a> {
    pub fn new(m: &'a Mdp, idx: &'a ConstructionIndex, _params: &ConstructionParams) -> Self {
        let mut owner = vec![Owner::Other; m.state_count()];
        let mut target = vec![Target::Other; m.state_count()];
        for k in 1..=idx.n() {
            owner[idx.clock.level(k)] = Owner::Level(k);
        }
        target[idx.clock.c[0]] = Target::Clock(0);
        target[idx.clock.c[1]] = Target::Clock(1);
        for i in 1..=idx.gate_count() {
            for copy in 0..2 {
                let mut mark = |s: StateId, kind: char, o: Owner| {
                    owner[s] = o;
                    target[s] = Target::Gate { kind, copy };
                };
                match *idx.gate(i, copy) {
                    GateStates::Input { o, l, r } => {
                        mark(o, 'o', Owner::Input { kind: 'o', copy });
                        mark(l, 'l', Owner::Input { kind: 'l', copy });
                        mark(r, 'r', Owner::Input { kind: 'r', copy });
                    }
                    GateStates::Or { o, v, x } => {
                        mark(o, 'o', Owner::Or { copy });
                        mark(v, 'v', Owner::Or { copy });
                        mark(x, 'x', Owner::Or { copy });
                    }
                    GateStates::Not { o, a } => {
                        let d = idx.depth(i);
                        mark(o, 'o', Owner::Not { kind: 'o', copy, d });
                        mark(a, 'a', Owner::Not { kind: 'a', copy, d });
                    }
                }
            }
        }
        if let Some(t) = &idx.terminal {
            owner[t.b2] = Owner::B2;
            target[t.b1] = Target::B1;
            target[t.b2] = Target::B2;
        }
        Classifier { m, idx, owner, target_of: target }
    }

    fn target(&self, a: ActionId) -> Target {
        self.m.state_id(&self.m.action(a).label).map_or(Target::Other, |t| self.target_of[t])
    }

    /// Role of switching `state` to `action` in phase `j`, given the policy
    /// in force just before the switch.
    pub fn classify(&self, state: StateId, action: ActionId, j: usize, before: &Policy) -> Role {
        if let Some(t) = &self.idx.terminal {
            if before.get(t.b2) == t.b2_to_b1 {
                return Role::TerminalSettle;
            }
        }
        let other = 1 - j;
        let target = self.target(action);
        match (self.owner[state], target) {
            (Owner::Level(i), _) => Role::ClockAdvance { i },
            (Owner::Input { kind: 'l' | 'r', copy }, Target::B2) if copy == 0 => Role::TerminalEntry,
            (Owner::Input { kind: 'l', copy }, Target::Clock(c)) if c == other => {
                if copy == other {
                    Role::LCopyToOwn
                } else {
                    Role::LOutToOther
                }
            }
            (Owner::Input { kind: 'r', copy }, Target::Clock(c)) if copy == other && c == other => Role::RCopyToOwn,
            (Owner::Input { kind: 'r', copy }, Target::Gate { kind: 'o', copy: tc }) if copy == j && tc == other => {
                Role::ROutToOther
            }
            (Owner::Input { kind: 'o', copy }, Target::Gate { kind: 'l', .. }) if copy == j => Role::Rehome,
            (Owner::Input { kind: 'o', copy }, Target::Gate { kind: 'l', .. }) if copy == other => Role::Residual,
            (Owner::Input { kind: 'o', copy }, Target::Gate { kind: 'r', .. }) if copy == other => Role::Copy,
            (Owner::Or { .. }, Target::Clock(c)) if c == other => Role::OrReset,
            (Owner::Or { .. }, Target::Gate { .. }) => Role::GateCompute,
            (Owner::Not { kind: 'a', copy, .. }, Target::Clock(c)) if copy == other && c == other => Role::NotResetOther,
            (Owner::Not { kind: 'a', copy, d }, Target::Clock(c)) if copy == j && c == other => Role::NotActivate { d },
            (Owner::Not { kind: 'o', copy, .. }, Target::Gate { kind: 'a', .. }) if copy == j => Role::NotOutput,
            (Owner::Not { kind: 'o', .. }, Target::Gate { .. }) => Role::GateCompute,
            (Owner::B2, Target::B1) => Role::Terminal,
            _ => Role::Unexpected,
        }
    }
}

/// Classifies one switch without keeping a [`Classifier`] around.
pub fn classify(
    m: &Mdp,
    idx: &ConstructionIndex,
    params: &ConstructionParams,
    state: StateId,
    action: ActionId,
    j: usize,
    before: &Policy,
) -> Role {
    Classifier::new(m, idx, params).classify(state, action, j, before)
}

/// Count and observed appeal range of one role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleStats {
    pub count: usize,
    pub min: Rational,
    pub max: Rational,
    pub expectation: Expectation,
}

/// A switch whose appeal is outside its role's expectation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationEntry {
    pub iteration: usize,
    pub state: String,
    pub action: String,
    pub role: String,
    pub appeal: Rational,
    pub expected: String,
}

/// Result of auditing a recorded run against the appeal catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogReport {
    pub switches: usize,
    pub roles: BTreeMap<String, RoleStats>,
    pub violations: Vec<ViolationEntry>,
    /// Switches whose appeal is exactly 1.
    pub appeal_one_switches: Vec<usize>,
    /// Roles that every run of this construction must exhibit but this one
    /// did not.
    pub missing_roles: Vec<String>,
    /// In every phase, the switches with appeal at least `7/2` come before
    /// all others, cascades at gate output and operand states aside.
    pub threshold_ordering: bool,
    /// In every phase, NOT activations happen in order of increasing depth.
    pub not_depth_ordering: bool,
    pub passed: bool,
}

impl CatalogReport {
    pub fn ensure(&self) -> Result<(), VerifyError> {
        if self.passed {
            return Ok(());
        }
        let (iteration, detail) = match self.violations.first() {
            Some(v) => (v.iteration, format!("{}: {} -> {}, appeal {} expected {}", v.role, v.state, v.action, v.appeal, v.expected)),
            None => (
                self.appeal_one_switches.first().copied().unwrap_or(self.switches),
                format!(
                    "missing roles {:?}, appeal-one switches {:?}, threshold ordering {}",
                    self.missing_roles, self.appeal_one_switches, self.threshold_ordering
                ),
            ),
        };
        Err(VerifyError::CatalogViolation { iteration, detail })
    }
}

/// Audits every switch of `run` against the catalog.
pub fn audit_appeal_catalog(
    m: &Mdp,
    idx: &ConstructionIndex,
    params: &ConstructionParams,
    run: &RecordedRun,
) -> CatalogReport {
    let w = idx.terminal.as_ref().map(|t| &t.w);
    let mut roles: BTreeMap<String, RoleStats> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut appeal_one_switches = Vec::new();
    let mut seen = HashSet::new();
    for (e, role) in run.trace.events.iter().zip(&run.roles) {
        let expectation = role.expectation(params, w);
        seen.insert(std::mem::discriminant(role));
        let st = roles.entry(role.name()).or_insert_with(|| RoleStats {
            count: 0,
            min: e.appeal.clone(),
            max: e.appeal.clone(),
            expectation: expectation.clone(),
        });
        st.count += 1;
        st.min = st.min.clone().min(e.appeal.clone());
        st.max = st.max.clone().max(e.appeal.clone());
        if !expectation.holds(&e.appeal) {
            violations.push(ViolationEntry {
                iteration: e.iteration,
                state: m.state_name(e.state).to_string(),
                action: m.action(e.new_action).label.clone(),
                role: role.name(),
                appeal: e.appeal.clone(),
                expected: expectation.to_string(),
            });
        }
        if e.appeal.is_one() && *role != Role::TerminalSettle {
            appeal_one_switches.push(e.iteration);
        }
    }
    let has_or = idx.gates.iter().any(|g| matches!(g[0], GateStates::Or { .. }));
    let has_not = idx.gates.iter().any(|g| matches!(g[0], GateStates::Not { .. }));
    let clock_runs = run.roles.iter().any(|r| matches!(r, Role::ClockAdvance { .. }));
    let mut required = vec![Role::LCopyToOwn, Role::RCopyToOwn, Role::LOutToOther, Role::ROutToOther];
    if has_or {
        required.push(Role::OrReset);
    }
    if has_not {
        required.push(Role::NotResetOther);
    }
    let missing_roles = if clock_runs {
        required.iter().filter(|r| !seen.contains(&std::mem::discriminant(*r))).map(Role::name).collect()
    } else {
        vec![Role::ClockAdvance { i: 1 }.name()]
    };
    let (threshold_ordering, not_depth_ordering) = phase_orderings(run);
    let passed = violations.is_empty() && missing_roles.is_empty() && appeal_one_switches.is_empty() && threshold_ordering;
    CatalogReport {
        switches: run.trace.len(),
        roles,
        violations,
        appeal_one_switches,
        missing_roles,
        threshold_ordering,
        not_depth_ordering,
        passed,
    }
}

fn phase_orderings(run: &RecordedRun) -> (bool, bool) {
    let threshold = Rational::new(7, 2);
    let mut threshold_ok = true;
    let mut depth_ok = true;
    let mut below_seen = false;
    let mut last_depth = 0;
    let mut phase = None;
    for ((e, role), ph) in run.trace.events.iter().zip(&run.roles).zip(&run.phases) {
        if matches!(role, Role::GateCompute | Role::Terminal | Role::TerminalEntry | Role::TerminalSettle) {
            continue;
        }
        if phase != Some(ph.index) {
            phase = Some(ph.index);
            below_seen = false;
            last_depth = 0;
        }
        if e.appeal < threshold {
            below_seen = true;
        } else if below_seen {
            threshold_ok = false;
        }
        if let Role::NotActivate { d } = role {
            depth_ok &= *d >= last_depth;
            last_depth = *d;
        }
    }
    (threshold_ok, depth_ok)
}
