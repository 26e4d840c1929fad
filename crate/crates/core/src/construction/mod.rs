//! Compiles a normalized negated-form circuit into the MDP `Const(C)`: a
//! binary-counter clock with output states `c0` and `c1`, and two cross-wired
//! copies of the circuit built from input-bit, OR and NOT gadgets. Also
//! builds the extended MDP `Const(C, z)` and the initial policy `σ_init`.
//!
//! State names follow one scheme throughout: the clock uses `si`, `si'`,
//! `0`, `i`, `i'`, `c0`, `c1`; gate `i` of circuit copy `j` uses `o{j}_{i}`
//! together with `l{j}_{i}`/`r{j}_{i}` (input bits), `v{j}_{i}`/`x{j}_{i}`
//! (OR gates) or `a{j}_{i}` (NOT gates); gadget intermediates are `(s,t)`.
//! Every action is labelled with the name of the state it leads towards.

mod params;

pub use params::{derive_params, AlphaMode, ConstructionParams, Overrides, WMode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{negated_form, BitString, Circuit, CircuitError, Gate};
use crate::mdp::{
    add_gadget, default_budget, run_policy_iteration, ActionId, Mdp, MdpError, MdpJson, PiOptions, Policy, StateId,
    TieBreak,
};
use crate::numerics::Rational;

/// Errors raised while building a construction.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructionError {
    #[error("circuit is not normalized (equal OR operand depths, NOT depth ≥ 2, common output depth)")]
    NotNormalized,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state {0} must be built before it is referenced")]
    MissingDependency(String),
    #[error("length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("manifest does not match its rebuild: {0}")]
    ManifestMismatch(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Name of clock level `k`: `0` for the bottom, otherwise `k`.
pub fn level_name(k: usize) -> String {
    k.to_string()
}

/// Name of the primed clock state `k'`.
pub fn prime_name(k: usize) -> String {
    format!("{k}'")
}

/// Name of a gate state, e.g. `gate_state_name('o', 0, 5)` is `o0_5`.
pub fn gate_state_name(kind: char, j: usize, i: usize) -> String {
    format!("{kind}{j}_{i}")
}

/// Clock state ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockIndex {
    pub n: usize,
    pub si: StateId,
    pub si_prime: StateId,
    /// Level states `0, 1, …, n` (entry `k` is level `k`).
    pub levels: Vec<StateId>,
    /// Primed states `1', …, n'` (entry `k − 1` is `k'`).
    pub primes: Vec<StateId>,
    /// Output states `c0`, `c1`.
    pub c: [StateId; 2],
}

impl ClockIndex {
    pub fn level(&self, k: usize) -> StateId {
        self.levels[k]
    }

    pub fn prime(&self, k: usize) -> StateId {
        self.primes[k - 1]
    }
}

/// States of one copy of one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateStates {
    Input { o: StateId, l: StateId, r: StateId },
    Or { o: StateId, v: StateId, x: StateId },
    Not { o: StateId, a: StateId },
}

impl GateStates {
    pub fn o(&self) -> StateId {
        match *self {
            GateStates::Input { o, .. } | GateStates::Or { o, .. } | GateStates::Not { o, .. } => o,
        }
    }
}

/// The extra states and actions of `Const(C, z)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalIndex {
    pub z: usize,
    pub w: Rational,
    pub b1: StateId,
    pub b2: StateId,
    /// The action `b2 → b1` (the gadget).
    pub b2_to_b1: ActionId,
    /// The action `l0_z → b2`.
    pub l_to_b2: ActionId,
    /// The action `r0_z → b2`.
    pub r_to_b2: ActionId,
    /// The action `o0_z → r0_z`, whose switching encodes a 0 at bit `z`.
    pub o_to_r: ActionId,
}

/// Typed map from construction roles to state ids. State names are kept by
/// the [`Mdp`] itself, so the name/id correspondence is bijective.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionIndex {
    pub clock: ClockIndex,
    /// `gates[i − 1][j]` holds gate `i` of circuit copy `j`.
    pub gates: Vec<[GateStates; 2]>,
    /// `depths[i − 1]` is `d(i)`.
    pub depths: Vec<usize>,
    pub terminal: Option<TerminalIndex>,
}

impl ConstructionIndex {
    pub fn gate(&self, i: usize, j: usize) -> &GateStates {
        &self.gates[i - 1][j]
    }

    pub fn o(&self, i: usize, j: usize) -> StateId {
        self.gate(i, j).o()
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depths[i - 1]
    }

    pub fn n(&self) -> usize {
        self.clock.n
    }

    /// Number of gates in the circuit.
    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }
}

fn need(m: &Mdp, name: &str) -> Result<StateId, ConstructionError> {
    m.state_id(name).ok_or_else(|| ConstructionError::MissingDependency(name.to_string()))
}

fn need_action(m: &Mdp, s: StateId, label: &str) -> Result<ActionId, ConstructionError> {
    m.find_action(s, label)
        .ok_or_else(|| ConstructionError::MissingDependency(format!("{} -> {label}", m.state_name(s))))
}

/// Adds the clock to `m` and returns its index.
pub fn add_clock(m: &mut Mdp, params: &ConstructionParams) -> Result<ClockIndex, ConstructionError> {
    let n = params.n;
    let zero = Rational::zero;
    let half = Rational::new(1, 2);
    let si = m.add_state("si")?;
    m.add_edge(si, si, zero())?;
    let si_prime = m.add_state("si'")?;
    m.add_edge(si_prime, si, &params.t * Rational::pow2(n as u32 + 1))?;
    let bottom = m.add_state(level_name(0))?;
    m.add_edge(bottom, si, zero())?;
    let mut levels = vec![bottom];
    let mut primes = Vec::with_capacity(n);
    for i in 1..=n {
        let p = m.add_state(prime_name(i))?;
        let dist = if i == 1 {
            vec![(si, half.clone()), (si_prime, half.clone())]
        } else {
            vec![(primes[i - 2], half.clone()), (levels[i - 2], half.clone())]
        };
        let label = format!("{}|{}", m.state_name(dist[0].0), m.state_name(dist[1].0));
        m.add_action(p, zero(), dist, label)?;
        primes.push(p);
        let s = m.add_state(level_name(i))?;
        add_gadget(m, s, levels[i - 1], zero(), zero(), params.alpha(i).clone())?;
        add_gadget(m, s, p, zero(), zero(), params.alpha(i).clone())?;
        levels.push(s);
    }
    let c0 = m.add_state("c0")?;
    m.add_edge(c0, levels[n], zero())?;
    let c1 = m.add_state("c1")?;
    let dist = vec![(levels[n - 1], half.clone()), (primes[n - 1], half)];
    m.add_action(c1, zero(), dist, format!("{}|{}", level_name(n - 1), prime_name(n)))?;
    Ok(ClockIndex { n, si, si_prime, levels, primes, c: [c0, c1] })
}

/// Builds the clock alone as an MDP with `params.n` bits.
pub fn build_clock(params: &ConstructionParams) -> Result<(Mdp, ClockIndex), ConstructionError> {
    let mut m = Mdp::new();
    let idx = add_clock(&mut m, params)?;
    Ok((m, idx))
}

/// Adds the (action-less) states of gate `i`, copy `j`.
pub fn declare_gate(m: &mut Mdp, c: &Circuit, i: usize, j: usize) -> Result<GateStates, ConstructionError> {
    let mut add = |kind: char| m.add_state(gate_state_name(kind, j, i));
    Ok(match c.gate(i)? {
        Gate::Input => GateStates::Input { l: add('l')?, r: add('r')?, o: add('o')? },
        Gate::Or(..) => GateStates::Or { x: add('x')?, v: add('v')?, o: add('o')? },
        Gate::Not(_) => GateStates::Not { a: add('a')?, o: add('o')? },
    })
}

fn clock_outputs(m: &Mdp, j: usize) -> Result<(StateId, StateId), ConstructionError> {
    Ok((need(m, &format!("c{j}"))?, need(m, &format!("c{}", 1 - j))?))
}

/// Wires input bit `i` of copy `j`. Its `r` gadget reads the output gate of
/// the other copy that feeds bit `i`, so that state must be declared.
pub fn build_input_bit(
    m: &mut Mdp,
    params: &ConstructionParams,
    c: &Circuit,
    i: usize,
    j: usize,
) -> Result<(), ConstructionError> {
    let (cj, cother) = clock_outputs(m, j)?;
    let l = need(m, &gate_state_name('l', j, i))?;
    let r = need(m, &gate_state_name('r', j, i))?;
    let o = need(m, &gate_state_name('o', j, i))?;
    let src = need(m, &gate_state_name('o', 1 - j, c.copy_source(i)?))?;
    let zero = Rational::zero;
    let half_t = &params.t * Rational::new(1, 2);
    add_gadget(m, l, cother, zero(), params.mid() - &half_t, params.p5.clone())?;
    add_gadget(m, l, cj, zero(), params.h[0].clone(), params.p4.clone())?;
    add_gadget(m, r, cj, zero(), params.l[0].clone(), params.p6.clone())?;
    add_gadget(m, r, src, zero(), -half_t, params.p7.clone())?;
    m.add_edge(o, r, zero())?;
    add_gadget(m, o, l, zero(), zero(), params.p3.clone())?;
    Ok(())
}

/// Wires OR gate `i` of copy `j`; both operand outputs must already exist.
pub fn build_or_gate(
    m: &mut Mdp,
    params: &ConstructionParams,
    c: &Circuit,
    i: usize,
    j: usize,
) -> Result<(), ConstructionError> {
    let Gate::Or(a, b) = c.gate(i)? else {
        return Err(ConstructionError::InvalidParameter(format!("gate {i} is not an OR gate")));
    };
    let d = c.depth(i)?;
    let (cj, cother) = clock_outputs(m, j)?;
    let x = need(m, &gate_state_name('x', j, i))?;
    let v = need(m, &gate_state_name('v', j, i))?;
    let o = need(m, &gate_state_name('o', j, i))?;
    let in1 = need(m, &gate_state_name('o', j, a))?;
    let in2 = need(m, &gate_state_name('o', j, b))?;
    let zero = Rational::zero;
    add_gadget(m, x, cj, zero(), zero(), params.px.clone())?;
    add_gadget(m, x, cother, zero(), zero(), params.px.clone())?;
    m.add_edge(v, in1, zero())?;
    m.add_edge(v, in2, zero())?;
    m.add_edge(o, x, params.l[d].clone())?;
    m.add_edge(o, v, params.b[d].clone())?;
    Ok(())
}

/// Wires NOT gate `i` of copy `j`; its operand output must already exist.
pub fn build_not_gate(
    m: &mut Mdp,
    params: &ConstructionParams,
    c: &Circuit,
    i: usize,
    j: usize,
) -> Result<(), ConstructionError> {
    let Gate::Not(a) = c.gate(i)? else {
        return Err(ConstructionError::InvalidParameter(format!("gate {i} is not a NOT gate")));
    };
    let d = c.depth(i)?;
    let (cj, cother) = clock_outputs(m, j)?;
    let act = need(m, &gate_state_name('a', j, i))?;
    let o = need(m, &gate_state_name('o', j, i))?;
    let inp = need(m, &gate_state_name('o', j, a))?;
    let zero = Rational::zero;
    add_gadget(m, act, cj, zero(), zero(), params.p2(d)?.clone())?;
    add_gadget(m, act, cother, zero(), &params.h[d - 1] - &params.t, params.p1(d)?.clone())?;
    m.add_edge(o, inp, zero())?;
    add_gadget(m, o, act, Rational::one(), zero(), Rational::one() / &params.b[d])?;
    Ok(())
}

/// Builds `Const(C)` for a normalized negated-form circuit.
pub fn build_construction(
    c: &Circuit,
    ov: &Overrides,
) -> Result<(Mdp, ConstructionIndex, ConstructionParams), ConstructionError> {
    let params = derive_params(c, ov)?;
    let mut m = Mdp::new();
    let clock = add_clock(&mut m, &params)?;
    let mut gates = Vec::with_capacity(c.len());
    for i in 1..=c.len() {
        gates.push([declare_gate(&mut m, c, i, 0)?, declare_gate(&mut m, c, i, 1)?]);
    }
    for i in 1..=c.len() {
        for j in 0..2 {
            match c.gate(i)? {
                Gate::Input => build_input_bit(&mut m, &params, c, i, j)?,
                Gate::Or(..) => build_or_gate(&mut m, &params, c, i, j)?,
                Gate::Not(_) => build_not_gate(&mut m, &params, c, i, j)?,
            }
        }
    }
    m.validate()?;
    let idx = ConstructionIndex { clock, gates, depths: c.depths(), terminal: None };
    Ok((m, idx, params))
}

/// Builds `Const(C)` from the circuit of `F` itself: takes the negated form
/// (which also normalizes depths) first.
pub fn build_from_function(
    f: &Circuit,
    ov: &Overrides,
) -> Result<(Circuit, Mdp, ConstructionIndex, ConstructionParams), ConstructionError> {
    let c = negated_form(f);
    let (m, idx, params) = build_construction(&c, ov)?;
    Ok((c, m, idx, params))
}

/// The largest optimal value of `Const(C)`, found by running policy
/// iteration from `σ_init(b)` to optimality.
pub fn exact_w(m: &Mdp, idx: &ConstructionIndex, b: &BitString) -> Result<Rational, ConstructionError> {
    let sigma = initial_policy(m, idx, b)?;
    let opts = PiOptions { tie: TieBreak::default(), budget: default_budget(idx.n(), m.state_count()), check_monotone: false };
    let out = run_policy_iteration(m, &sigma, &opts, &mut [])?;
    Ok(out.values.max())
}

/// The analytic bound `T · 2^{n+2}` on every state value of `Const(C)`.
pub fn bound_w(params: &ConstructionParams) -> Rational {
    &params.t * Rational::pow2(params.n as u32 + 2)
}

/// Adds the terminal gadget of `Const(C, z)` with an explicit weight `w`.
pub fn add_terminal(
    m: &mut Mdp,
    idx: &mut ConstructionIndex,
    z: usize,
    w: Rational,
) -> Result<(), ConstructionError> {
    if z == 0 || z > idx.n() {
        return Err(ConstructionError::InvalidParameter(format!("bit index z = {z} outside 1..={}", idx.n())));
    }
    if !w.is_positive() {
        return Err(ConstructionError::InvalidParameter(format!("W = {w} must be positive")));
    }
    let GateStates::Input { o, l, r } = *idx.gate(z, 0) else {
        return Err(ConstructionError::InvalidParameter(format!("gate {z} is not an input bit")));
    };
    let si = idx.clock.si;
    let b1 = m.add_state("b1")?;
    m.add_edge(b1, si, &w * Rational::integer(2))?;
    let b2 = m.add_state("b2")?;
    m.add_edge(b2, si, Rational::zero())?;
    let b2_to_b1 = add_gadget(m, b2, b1, Rational::zero(), Rational::zero(), Rational::new(1, 5) / (&w * Rational::integer(2)))?;
    let l_to_b2 = m.add_edge(l, b2, Rational::zero())?;
    let r_to_b2 = m.add_edge(r, b2, Rational::zero())?;
    let o_to_r = need_action(m, o, &gate_state_name('r', 0, z))?;
    idx.terminal = Some(TerminalIndex { z, w, b1, b2, b2_to_b1, l_to_b2, r_to_b2, o_to_r });
    Ok(())
}

/// Builds `Const(C, z)`. With [`WMode::Exact`], `W` is the largest optimal
/// value of `Const(C)`, computed by policy iteration from `σ_init(b)`.
pub fn build_construction_z(
    c: &Circuit,
    b: &BitString,
    z: usize,
    ov: &Overrides,
    w_mode: WMode,
) -> Result<(Mdp, ConstructionIndex, ConstructionParams), ConstructionError> {
    let (mut m, mut idx, params) = build_construction(c, ov)?;
    let w = match w_mode {
        WMode::Exact => exact_w(&m, &idx, b)?,
        WMode::Bound => bound_w(&params),
    };
    add_terminal(&mut m, &mut idx, z, w)?;
    m.validate()?;
    Ok((m, idx, params))
}

/// The initial policy `σ_init` for input `b`: the clock at its start, circuit
/// 0 in output mode holding `b`, circuit 1 in copy mode, every `a` and `x`
/// state at `c0`, every OR output at `x`, every `v` at its first operand,
/// every NOT output at its operand, and `b2` at the sink.
pub fn initial_policy(m: &Mdp, idx: &ConstructionIndex, b: &BitString) -> Result<Policy, ConstructionError> {
    if b.len() != idx.n() {
        return Err(ConstructionError::LengthMismatch { expected: idx.n(), got: b.len() });
    }
    let mut sigma = Policy::first_actions(m)?;
    let choose = |sigma: &mut Policy, s: StateId, target: String| -> Result<(), ConstructionError> {
        sigma.switch_to(m, need_action(m, s, &target)?);
        Ok(())
    };
    for k in 1..=idx.n() {
        choose(&mut sigma, idx.clock.level(k), level_name(k - 1))?;
    }
    let n = idx.n();
    let gate_count = idx.gate_count();
    for i in 1..=gate_count {
        for j in 0..2 {
            match *idx.gate(i, j) {
                GateStates::Input { o, l, r } => {
                    choose(&mut sigma, l, "c0".into())?;
                    if j == 0 {
                        choose(&mut sigma, r, "c0".into())?;
                        let kind = if b.get(i) { 'l' } else { 'r' };
                        choose(&mut sigma, o, gate_state_name(kind, 0, i))?;
                    } else {
                        choose(&mut sigma, r, gate_state_name('o', 0, gate_count - n + i))?;
                        choose(&mut sigma, o, gate_state_name('l', 1, i))?;
                    }
                }
                GateStates::Or { o, v, x } => {
                    choose(&mut sigma, x, "c0".into())?;
                    sigma.switch_to(m, m.actions_of(v)[0]);
                    choose(&mut sigma, o, gate_state_name('x', j, i))?;
                }
                GateStates::Not { o, a } => {
                    choose(&mut sigma, a, "c0".into())?;
                    sigma.switch_to(m, m.actions_of(o)[0]);
                }
            }
        }
    }
    if let Some(t) = &idx.terminal {
        choose(&mut sigma, t.b2, "si".into())?;
    }
    Ok(sigma)
}

/// Everything needed to rebuild a construction and check it bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// The normalized negated-form circuit, in circuit JSON.
    pub circuit: serde_json::Value,
    pub overrides: Overrides,
    pub params: ConstructionParams,
    pub index: ConstructionIndex,
    pub mdp: MdpJson,
}

impl Manifest {
    pub fn new(c: &Circuit, ov: &Overrides, m: &Mdp, idx: &ConstructionIndex, params: &ConstructionParams) -> Self {
        Manifest {
            circuit: serde_json::from_str(&c.to_json()).expect("circuit JSON is valid"),
            overrides: ov.clone(),
            params: params.clone(),
            index: idx.clone(),
            mdp: m.to_json(),
        }
    }

    /// Rebuilds the construction from the stored circuit, overrides and `W`,
    /// and checks that parameters, index and MDP all agree with the stored
    /// copies.
    pub fn verify(&self) -> Result<(), ConstructionError> {
        let c = Circuit::from_json(&self.circuit.to_string())?;
        let (mut m, mut idx, params) = build_construction(&c, &self.overrides)?;
        if let Some(t) = &self.index.terminal {
            add_terminal(&mut m, &mut idx, t.z, t.w.clone())?;
        }
        if params != self.params {
            return Err(ConstructionError::ManifestMismatch("parameters differ".into()));
        }
        if idx != self.index {
            return Err(ConstructionError::ManifestMismatch("state index differs".into()));
        }
        let stored = Mdp::from_json(&self.mdp)?;
        if stored != m {
            return Err(ConstructionError::ManifestMismatch("MDP differs".into()));
        }
        Ok(())
    }
}
