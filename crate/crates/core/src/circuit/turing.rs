//! Space-bounded Turing machines compiled to one-step successor circuits.
//!
//! A configuration is laid out as `tape (N cells) ∥ flag cell ∥ head ∥ state`
//! where `N` is the space bound. The flag cell starts at 1. When the machine
//! is in an accepting state the successor function clears the flag and
//! otherwise leaves the configuration alone, so the machine accepts exactly
//! when the flag bit of `F^{2^{n'}}(B^I)` is 0 (a CircuitValue instance).

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{normalize_depths, BitString, Circuit, CircuitError, Gate};

/// Head movement of a transition. Moves off either end of the tape leave the
/// head where it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: String,
    pub read: u8,
    pub write: u8,
    #[serde(rename = "move")]
    pub movement: Move,
    pub next: String,
}

/// A deterministic machine over the binary alphabet. A missing transition
/// halts without accepting; accepting states halt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuringMachine {
    pub states: Vec<String>,
    pub start: String,
    pub accept: Vec<String>,
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub head_start: usize,
    pub space_bound: usize,
    /// Optional initial tape contents (bit 1 first); missing cells are 0.
    #[serde(default)]
    pub input: Option<BitString>,
}

/// Outcome of the direct simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TmVerdict {
    Accept,
    Reject,
    Loops,
}

struct Checked {
    state_code: HashMap<String, usize>,
    accepting: Vec<bool>,
    delta: HashMap<(usize, bool), (bool, Move, usize)>,
}

fn bad(msg: impl Into<String>) -> CircuitError {
    CircuitError::MalformedMachine(msg.into())
}

impl TuringMachine {
    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))
    }

    fn check(&self, input: &[bool], space_bound: usize) -> Result<Checked, CircuitError> {
        if space_bound == 0 {
            return Err(bad("space bound must be positive"));
        }
        if self.states.is_empty() {
            return Err(bad("no states"));
        }
        if input.len() > space_bound {
            return Err(bad(format!("input of {} cells exceeds space bound {}", input.len(), space_bound)));
        }
        if self.head_start >= space_bound {
            return Err(bad(format!("head start {} outside tape 0..{}", self.head_start, space_bound)));
        }
        let mut state_code = HashMap::new();
        for (k, s) in self.states.iter().enumerate() {
            if state_code.insert(s.clone(), k).is_some() {
                return Err(bad(format!("duplicate state '{s}'")));
            }
        }
        let code = |s: &str| state_code.get(s).copied().ok_or_else(|| bad(format!("unknown state '{s}'")));
        code(&self.start)?;
        let mut accepting = vec![false; self.states.len()];
        for s in &self.accept {
            accepting[code(s)?] = true;
        }
        let mut delta = HashMap::new();
        for t in &self.transitions {
            if t.read > 1 || t.write > 1 {
                return Err(bad("tape symbols must be 0 or 1"));
            }
            let q = code(&t.state)?;
            let next = code(&t.next)?;
            if accepting[q] {
                return Err(bad(format!("accepting state '{}' must not have transitions", t.state)));
            }
            if delta.insert((q, t.read == 1), (t.write == 1, t.movement, next)).is_some() {
                return Err(bad(format!("two transitions for ('{}', {})", t.state, t.read)));
            }
        }
        Ok(Checked { state_code, accepting, delta })
    }
}

fn bits_for(count: usize) -> usize {
    let mut b = 1;
    while (1usize << b) < count {
        b += 1;
    }
    b
}

/// Direct step-by-step simulation, independent of the circuit encoding.
pub fn simulate(tm: &TuringMachine, input: &[bool], space_bound: usize) -> Result<TmVerdict, CircuitError> {
    let ck = tm.check(input, space_bound)?;
    let mut tape = vec![false; space_bound];
    tape[..input.len()].copy_from_slice(input);
    let mut head = tm.head_start;
    let mut q = ck.state_code[&tm.start];
    let mut seen = HashSet::new();
    loop {
        if ck.accepting[q] {
            return Ok(TmVerdict::Accept);
        }
        if !seen.insert((tape.clone(), head, q)) {
            return Ok(TmVerdict::Loops);
        }
        let Some(&(w, mv, next)) = ck.delta.get(&(q, tape[head])) else {
            return Ok(TmVerdict::Reject);
        };
        tape[head] = w;
        head = match mv {
            Move::Left => head.saturating_sub(1),
            Move::Right => (head + 1).min(space_bound - 1),
        };
        q = next;
    }
}

/// Hash-consing OR/NOT gate builder with De Morgan conjunction.
struct Synth {
    gates: Vec<Gate>,
    memo: HashMap<Gate, usize>,
}

impl Synth {
    fn new(n: usize) -> Self {
        Synth { gates: vec![Gate::Input; n], memo: HashMap::new() }
    }

    fn push(&mut self, g: Gate) -> usize {
        if let Some(&id) = self.memo.get(&g) {
            return id;
        }
        self.gates.push(g);
        let id = self.gates.len();
        self.memo.insert(g, id);
        id
    }

    fn not(&mut self, a: usize) -> usize {
        if let Gate::Not(x) = self.gates[a - 1] {
            return x;
        }
        self.push(Gate::Not(a))
    }

    fn or(&mut self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.push(Gate::Or(a, b))
    }

    fn and(&mut self, a: usize, b: usize) -> usize {
        let na = self.not(a);
        let nb = self.not(b);
        let o = self.or(na, nb);
        self.not(o)
    }

    fn or_all(&mut self, xs: &[usize]) -> Option<usize> {
        let mut it = xs.iter().copied();
        let first = it.next()?;
        Some(it.fold(first, |acc, x| self.or(acc, x)))
    }

    fn and_all(&mut self, xs: &[usize]) -> Option<usize> {
        let mut it = xs.iter().copied();
        let first = it.next()?;
        Some(it.fold(first, |acc, x| self.and(acc, x)))
    }

    fn constant_false(&mut self) -> usize {
        let n1 = self.not(1);
        self.and(1, n1)
    }

    /// `sel ? a : b`.
    fn mux(&mut self, sel: usize, a: usize, b: usize) -> usize {
        let t = self.and(sel, a);
        let ns = self.not(sel);
        let e = self.and(ns, b);
        self.or(t, e)
    }

    /// Conjunction of literals matching `value` on the given bit gates.
    fn decode(&mut self, bits: &[usize], value: usize) -> usize {
        let lits: Vec<usize> =
            bits.iter().enumerate().map(|(k, &g)| if (value >> k) & 1 == 1 { g } else { self.not(g) }).collect();
        self.and_all(&lits).expect("at least one bit")
    }
}

/// Compiles `tm` on `input` with the given space bound into the instance
/// `(F, B^I, z)`: `F` is the normalized one-step successor circuit, `B^I`
/// the initial configuration, and `z` the flag cell, so that
/// `decide_circuitvalue(F, B^I, z)` holds exactly when the machine accepts.
pub fn compile_turing_machine(
    tm: &TuringMachine,
    input: &[bool],
    space_bound: usize,
) -> Result<(Circuit, BitString, usize), CircuitError> {
    let ck = tm.check(input, space_bound)?;
    let cells = space_bound;
    let flag = cells + 1;
    let head_bits = bits_for(cells);
    let state_bits = bits_for(tm.states.len());
    let n = cells + 1 + head_bits + state_bits;
    let tape: Vec<usize> = (1..=cells).collect();
    let head: Vec<usize> = (flag + 1..=flag + head_bits).collect();
    let state: Vec<usize> = (flag + head_bits + 1..=n).collect();

    let mut s = Synth::new(n);
    let f = s.constant_false();
    let head_is: Vec<usize> = (0..cells).map(|h| s.decode(&head, h)).collect();
    let state_is: Vec<usize> = (0..tm.states.len()).map(|q| s.decode(&state, q)).collect();
    let reads: Vec<usize> = (0..cells).map(|h| s.and(head_is[h], tape[h])).collect();
    let sym = s.or_all(&reads).expect("at least one cell");
    let nsym = s.not(sym);

    let mut fired = Vec::new();
    let mut write_one = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut next_bit: Vec<Vec<usize>> = vec![Vec::new(); state_bits];
    let mut keys: Vec<_> = ck.delta.iter().collect();
    keys.sort_by_key(|(k, _)| **k);
    for (&(q, read), &(w, mv, next)) in keys {
        let act = s.and(state_is[q], if read { sym } else { nsym });
        fired.push(act);
        if w {
            write_one.push(act);
        }
        match mv {
            Move::Left => left.push(act),
            Move::Right => right.push(act),
        }
        for (b, list) in next_bit.iter_mut().enumerate() {
            if (next >> b) & 1 == 1 {
                list.push(act);
            }
        }
    }
    let active = s.or_all(&fired).unwrap_or(f);
    let write_one = s.or_all(&write_one).unwrap_or(f);
    let left = s.or_all(&left).unwrap_or(f);
    let right = s.or_all(&right).unwrap_or(f);
    let accepting: Vec<usize> = (0..tm.states.len()).filter(|&q| ck.accepting[q]).map(|q| state_is[q]).collect();
    let acc = s.or_all(&accepting).unwrap_or(f);

    let mut outputs = Vec::with_capacity(n);
    for h in 0..cells {
        let here = s.and(active, head_is[h]);
        outputs.push(s.mux(here, write_one, tape[h]));
    }
    let nacc = s.not(acc);
    outputs.push(s.and(flag, nacc));

    let mut new_head_is = Vec::with_capacity(cells);
    for h in 0..cells {
        let mut terms = Vec::new();
        if h > 0 {
            terms.push(s.and(right, head_is[h - 1]));
        }
        if h + 1 < cells {
            terms.push(s.and(left, head_is[h + 1]));
        }
        if h == 0 {
            terms.push(s.and(left, head_is[0]));
        }
        if h + 1 == cells {
            terms.push(s.and(right, head_is[h]));
        }
        new_head_is.push(s.or_all(&terms).unwrap_or(f));
    }
    for (b, &hb) in head.iter().enumerate() {
        let ones: Vec<usize> = (0..cells).filter(|h| (h >> b) & 1 == 1).map(|h| new_head_is[h]).collect();
        let moved = s.or_all(&ones).unwrap_or(f);
        outputs.push(s.mux(active, moved, hb));
    }
    for (b, &sb) in state.iter().enumerate() {
        let moved = s.or_all(&next_bit[b]).unwrap_or(f);
        outputs.push(s.mux(active, moved, sb));
    }

    let mut gates = s.gates;
    for g in outputs {
        gates.push(Gate::Or(g, g));
    }
    let circuit = normalize_depths(&Circuit::new(n, gates)?);

    let mut init = BitString::zeros(n);
    for (k, &b) in input.iter().enumerate() {
        init.set(k + 1, b);
    }
    init.set(flag, true);
    for (b, &g) in head.iter().enumerate() {
        init.set(g, (tm.head_start >> b) & 1 == 1);
    }
    let q0 = ck.state_code[&tm.start];
    for (b, &g) in state.iter().enumerate() {
        init.set(g, (q0 >> b) & 1 == 1);
    }
    Ok((circuit, init, flag))
}

#[cfg(test)]
mod tests {
    use super::super::decide_circuitvalue;
    use super::*;

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
            space_bound: 2,
            input: None,
        }
    }

    #[test]
    fn immediate_accept() {
        let tm = machine(&["go", "yes"], &["yes"], vec![tr("go", 0, 0, Move::Right, "yes"), tr("go", 1, 1, Move::Right, "yes")]);
        let (c, b, z) = compile_turing_machine(&tm, &[], 2).unwrap();
        assert!(c.is_normalized());
        assert!(decide_circuitvalue(&c, &b, z).unwrap());
        assert_eq!(simulate(&tm, &[], 2).unwrap(), TmVerdict::Accept);
    }

    #[test]
    fn bouncing_machine_never_accepts() {
        let tm = machine(
            &["r", "l", "yes"],
            &["yes"],
            vec![
                tr("r", 0, 0, Move::Right, "l"),
                tr("r", 1, 1, Move::Right, "l"),
                tr("l", 0, 0, Move::Left, "r"),
                tr("l", 1, 1, Move::Left, "r"),
            ],
        );
        let (c, b, z) = compile_turing_machine(&tm, &[], 2).unwrap();
        assert!(!decide_circuitvalue(&c, &b, z).unwrap());
        assert_eq!(simulate(&tm, &[], 2).unwrap(), TmVerdict::Loops);
    }

    #[test]
    fn successor_matches_simulator_step() {
        // Writes 1 and moves right until it reads a 1, then accepts.
        let tm = machine(&["scan", "yes"], &["yes"], vec![tr("scan", 0, 1, Move::Right, "scan"), tr("scan", 1, 1, Move::Right, "yes")]);
        let (c, b, z) = compile_turing_machine(&tm, &[false, true], 2).unwrap();
        let step1 = c.apply(&b).unwrap();
        assert!(step1.get(1), "cell 1 written");
        assert!(step1.get(z), "flag still set");
        assert!(decide_circuitvalue(&c, &b, z).unwrap());
    }

    #[test]
    fn malformed_machines() {
        let mut tm = machine(&["a"], &[], vec![tr("a", 0, 2, Move::Left, "a")]);
        assert!(matches!(compile_turing_machine(&tm, &[], 2), Err(CircuitError::MalformedMachine(_))));
        tm.transitions = vec![tr("a", 0, 0, Move::Left, "zz")];
        assert!(compile_turing_machine(&tm, &[], 2).is_err());
        tm.transitions = vec![];
        assert!(compile_turing_machine(&tm, &[true, true, true], 2).is_err());
        assert!(compile_turing_machine(&tm, &[], 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let tm = machine(&["a", "b"], &["b"], vec![tr("a", 1, 0, Move::Left, "b")]);
        let text = serde_json::to_string(&tm).unwrap();
        assert!(text.contains("\"move\":\"L\""));
        assert_eq!(TuringMachine::from_json(&text).unwrap(), tm);
    }
}
