//! Boolean circuits over OR and NOT gates, depth normalization, negated form,
//! evaluation, and the circuit-iteration decision oracles.
//!
//! Gates are numbered from 1. Gates `1..=n` are the input bits; every later
//! gate is an OR or a NOT of earlier gates, and the last `n` gates are the
//! outputs. Output `i` feeds input bit `i` when the circuit is iterated.

mod turing;

pub use turing::{compile_turing_machine, simulate, Move, Transition, TuringMachine, TmVerdict};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised by circuit operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("gate index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed circuit: {0}")]
    Malformed(String),
    #[error("malformed Turing machine: {0}")]
    MalformedMachine(String),
}

/// A gate of the circuit. Operands are 1-based gate indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Input,
    Or(usize, usize),
    Not(usize),
}

/// A circuit `C` over `n` input bits with outputs in its last `n` gates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

/// Fixed-length bit string, bits numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn zeros(n: usize) -> Self {
        BitString(vec![false; n])
    }

    /// Bits of `value`, where bit `i` (1-based) is the `2^{i-1}` place.
    pub fn from_u64(value: u64, n: usize) -> Self {
        BitString((0..n).map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit `i`, 1-based. Panics when out of range.
    pub fn get(&self, i: usize) -> bool {
        self.0[i - 1]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i - 1] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }
}

/// Renders bit 1 first, e.g. `B = (1, 0)` prints as `10`.
impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CircuitError::Malformed(format!("bit string contains '{other}'"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct GateJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    inp: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    n: usize,
    gates: Vec<GateJson>,
}

impl Circuit {
    /// Validates and wraps a gate list: `n` leading inputs, no later inputs,
    /// topological operands, and at least `n` gates.
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        if n == 0 {
            return Err(CircuitError::Malformed("a circuit needs at least one input bit".into()));
        }
        if gates.len() < n {
            return Err(CircuitError::Malformed(format!("{} gates cannot hold {} inputs", gates.len(), n)));
        }
        for (pos, g) in gates.iter().enumerate() {
            let idx = pos + 1;
            let in_range = |x: usize| x >= 1 && x < idx;
            match *g {
                Gate::Input if idx > n => {
                    return Err(CircuitError::Malformed(format!("gate {idx} is an input but only gates 1..={n} may be")))
                }
                Gate::Input => {}
                _ if idx <= n => return Err(CircuitError::Malformed(format!("gate {idx} must be an input bit"))),
                Gate::Or(a, b) if !(in_range(a) && in_range(b)) => {
                    return Err(CircuitError::Malformed(format!("gate {idx} = Or({a}, {b}) is not topological")))
                }
                Gate::Not(a) if !in_range(a) => {
                    return Err(CircuitError::Malformed(format!("gate {idx} = Not({a}) is not topological")))
                }
                _ => {}
            }
        }
        Ok(Circuit { n, gates })
    }

    /// The circuit computing the identity on `n` bits (outputs are the inputs).
    pub fn identity(n: usize) -> Self {
        Circuit { n, gates: vec![Gate::Input; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Gate `i`, 1-based.
    pub fn gate(&self, i: usize) -> Result<Gate, CircuitError> {
        self.check_index(i)?;
        Ok(self.gates[i - 1])
    }

    fn check_index(&self, i: usize) -> Result<(), CircuitError> {
        if i == 0 || i > self.gates.len() {
            Err(CircuitError::IndexOutOfRange { index: i, len: self.gates.len() })
        } else {
            Ok(())
        }
    }

    /// Indices of the output gates, in output order.
    pub fn outputs(&self) -> std::ops::RangeInclusive<usize> {
        (self.gates.len() - self.n + 1)..=self.gates.len()
    }

    /// The output gate whose value input bit `i` copies when iterating.
    pub fn copy_source(&self, i: usize) -> Result<usize, CircuitError> {
        if i == 0 || i > self.n {
            return Err(CircuitError::IndexOutOfRange { index: i, len: self.n });
        }
        Ok(self.gates.len() - self.n + i)
    }

    /// Depth of every gate (index 0 holds gate 1).
    pub fn depths(&self) -> Vec<usize> {
        let mut d: Vec<usize> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let v = match *g {
                Gate::Input => 0,
                Gate::Or(a, b) => 1 + d[a - 1].max(d[b - 1]),
                Gate::Not(a) => 1 + d[a - 1],
            };
            d.push(v);
        }
        d
    }

    /// Depth `d(i)`: length of the longest path from gate `i` to an input bit.
    pub fn depth(&self, i: usize) -> Result<usize, CircuitError> {
        depth(self, i)
    }

    /// Common depth of the outputs, if they share one.
    pub fn output_depth(&self) -> Option<usize> {
        let d = self.depths();
        let mut it = self.outputs().map(|i| d[i - 1]);
        let first = it.next()?;
        it.all(|x| x == first).then_some(first)
    }

    /// Whether the three depth assumptions hold: equal OR operand depths,
    /// NOT depth at least 2, and one shared output depth.
    pub fn is_normalized(&self) -> bool {
        let d = self.depths();
        let gates_ok = self.gates.iter().enumerate().all(|(pos, g)| match *g {
            Gate::Input => true,
            Gate::Or(a, b) => d[a - 1] == d[b - 1],
            Gate::Not(_) => d[pos] >= 2,
        });
        gates_ok && self.output_depth().is_some()
    }

    /// `F(B)`: the output bits under input `b`.
    pub fn apply(&self, b: &BitString) -> Result<BitString, CircuitError> {
        let v = evaluate(self, b)?;
        Ok(BitString(self.outputs().map(|i| v[i - 1]).collect()))
    }

    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        let raw: CircuitJson = serde_json::from_str(text).map_err(|e| CircuitError::Malformed(e.to_string()))?;
        let gates = raw
            .gates
            .iter()
            .enumerate()
            .map(|(pos, g)| match (g.kind.as_str(), g.inp.as_slice()) {
                ("input", []) => Ok(Gate::Input),
                ("or", [a, b]) => Ok(Gate::Or(*a, *b)),
                ("not", [a]) => Ok(Gate::Not(*a)),
                (kind, inp) => Err(CircuitError::Malformed(format!(
                    "gate {}: kind '{kind}' with {} operands",
                    pos + 1,
                    inp.len()
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Circuit::new(raw.n, gates)
    }

    pub fn to_json(&self) -> String {
        let gates = self
            .gates
            .iter()
            .map(|g| match *g {
                Gate::Input => GateJson { kind: "input".into(), inp: vec![] },
                Gate::Or(a, b) => GateJson { kind: "or".into(), inp: vec![a, b] },
                Gate::Not(a) => GateJson { kind: "not".into(), inp: vec![a] },
            })
            .collect();
        serde_json::to_string_pretty(&CircuitJson { n: self.n, gates }).expect("circuit serializes")
    }
}

/// Depth `d(i)` of gate `i`; input bits have depth 0.
pub fn depth(c: &Circuit, i: usize) -> Result<usize, CircuitError> {
    c.check_index(i)?;
    Ok(c.depths()[i - 1])
}

/// Incrementally appends gates while tracking depths, reusing padding chains.
struct Rebuilder {
    gates: Vec<Gate>,
    depth: Vec<usize>,
    pads: HashMap<usize, Vec<usize>>,
}

impl Rebuilder {
    fn new(n: usize) -> Self {
        Rebuilder { gates: vec![Gate::Input; n], depth: vec![0; n], pads: HashMap::new() }
    }

    fn push(&mut self, g: Gate) -> usize {
        let d = match g {
            Gate::Input => 0,
            Gate::Or(a, b) => 1 + self.depth[a - 1].max(self.depth[b - 1]),
            Gate::Not(a) => 1 + self.depth[a - 1],
        };
        self.gates.push(g);
        self.depth.push(d);
        self.gates.len()
    }

    fn d(&self, g: usize) -> usize {
        self.depth[g - 1]
    }

    /// Returns a gate equivalent to `g` with depth exactly `target`, built
    /// from dummy `Or(x, x)` gates stacked on top of `g`.
    fn pad(&mut self, g: usize, target: usize) -> usize {
        let base = self.d(g);
        if base >= target {
            return g;
        }
        let need = target - base;
        let mut chain = self.pads.remove(&g).unwrap_or_default();
        while chain.len() < need {
            let top = chain.last().copied().unwrap_or(g);
            let id = self.push(Gate::Or(top, top));
            chain.push(id);
        }
        let out = chain[need - 1];
        self.pads.insert(g, chain);
        out
    }
}

/// Inserts dummy OR gates so that OR operands share a depth, every NOT gate
/// has depth at least 2, and all outputs share one depth. Truth values of
/// all original gates are preserved, and an already-normalized circuit comes
/// back unchanged.
pub fn normalize_depths(c: &Circuit) -> Circuit {
    let n = c.n;
    let mut rb = Rebuilder::new(n);
    let mut map: Vec<usize> = (1..=n).collect();
    for g in &c.gates[n..] {
        let id = match *g {
            Gate::Input => unreachable!("validated circuit has inputs only up front"),
            Gate::Or(a, b) => {
                let (a, b) = (map[a - 1], map[b - 1]);
                let target = rb.d(a).max(rb.d(b));
                let a = rb.pad(a, target);
                let b = rb.pad(b, target);
                rb.push(Gate::Or(a, b))
            }
            Gate::Not(a) => {
                let a = map[a - 1];
                let a = rb.pad(a, 1);
                rb.push(Gate::Not(a))
            }
        };
        map.push(id);
    }
    let outs: Vec<usize> = c.outputs().map(|i| map[i - 1]).collect();
    let target = outs.iter().map(|&g| rb.d(g)).max().unwrap_or(0);
    let total = rb.gates.len();
    let in_place = outs.iter().enumerate().all(|(k, &g)| g == total - n + 1 + k && rb.d(g) == target);
    if !in_place {
        let padded: Vec<usize> = outs.iter().map(|&g| rb.pad(g, target)).collect();
        for g in padded {
            rb.push(Gate::Or(g, g));
        }
    }
    Circuit { n, gates: rb.gates }
}

/// The negated form: one NOT appended per output, the NOTs become the new
/// outputs, and depths are re-normalized. For every `B` and output `i`,
/// `C(B, i) = 1 − F(B)_i`.
pub fn negated_form(c: &Circuit) -> Circuit {
    let mut gates = c.gates.clone();
    for i in c.outputs() {
        gates.push(Gate::Not(i));
    }
    normalize_depths(&Circuit { n: c.n, gates })
}

/// Truth value of every gate under input `b` (index 0 holds gate 1).
pub fn evaluate(c: &Circuit, b: &BitString) -> Result<Vec<bool>, CircuitError> {
    if b.len() != c.n {
        return Err(CircuitError::LengthMismatch { expected: c.n, got: b.len() });
    }
    let mut v = Vec::with_capacity(c.gates.len());
    for (pos, g) in c.gates.iter().enumerate() {
        let x = match *g {
            Gate::Input => b.0[pos],
            Gate::Or(a, bb) => v[a - 1] || v[bb - 1],
            Gate::Not(a) => !v[a - 1],
        };
        v.push(x);
    }
    Ok(v)
}

/// `F^steps(B)`.
pub fn iterate(c: &Circuit, b: &BitString, steps: u64) -> Result<BitString, CircuitError> {
    let mut cur = b.clone();
    for _ in 0..steps {
        cur = c.apply(&cur)?;
    }
    if cur.len() != c.n {
        return Err(CircuitError::LengthMismatch { expected: c.n, got: cur.len() });
    }
    Ok(cur)
}

/// The orbit `B, F(B), …, F^{2^n}(B)`.
pub fn orbit(c: &Circuit, b: &BitString) -> Result<Vec<BitString>, CircuitError> {
    let steps = 1u64 << c.n;
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(b.clone());
    for _ in 0..steps {
        let next = c.apply(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

fn check_bit(c: &Circuit, z: usize) -> Result<(), CircuitError> {
    if z == 0 || z > c.n {
        Err(CircuitError::IndexOutOfRange { index: z, len: c.n })
    } else {
        Ok(())
    }
}

/// BitSwitch: whether some even `i` with `0 ≤ i ≤ 2^n` has `F^i(B)_z = 0`.
///
/// The question is only meaningful when `B_z = 1`; for `B_z = 0` the
/// predicate is still evaluated literally and holds at `i = 0`.
pub fn decide_bitswitch(c: &Circuit, b: &BitString, z: usize) -> Result<bool, CircuitError> {
    check_bit(c, z)?;
    let orbit = orbit(c, b)?;
    Ok(orbit.iter().step_by(2).any(|x| !x.get(z)))
}

/// CircuitValue: whether `F^{2^n}(B)_z = 0`.
pub fn decide_circuitvalue(c: &Circuit, b: &BitString, z: usize) -> Result<bool, CircuitError> {
    check_bit(c, z)?;
    let last = iterate(c, b, 1u64 << c.n)?;
    Ok(!last.get(z))
}

/// Small builder for hand-written circuits used by examples and tests.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    n: usize,
    gates: Vec<Gate>,
}

impl CircuitBuilder {
    pub fn new(n: usize) -> Self {
        CircuitBuilder { n, gates: vec![Gate::Input; n] }
    }

    /// Gate index of input bit `i` (1-based).
    pub fn input(&self, i: usize) -> usize {
        assert!(i >= 1 && i <= self.n, "input bit {i} out of range");
        i
    }

    pub fn or(&mut self, a: usize, b: usize) -> usize {
        self.gates.push(Gate::Or(a, b));
        self.gates.len()
    }

    pub fn not(&mut self, a: usize) -> usize {
        self.gates.push(Gate::Not(a));
        self.gates.len()
    }

    /// `a ∧ b` via De Morgan.
    pub fn and(&mut self, a: usize, b: usize) -> usize {
        let na = self.not(a);
        let nb = self.not(b);
        let o = self.or(na, nb);
        self.not(o)
    }

    /// Finishes the circuit with one buffer gate `Or(g, g)` per output so the
    /// outputs occupy the last gates in order.
    pub fn finish(mut self, outputs: &[usize]) -> Result<Circuit, CircuitError> {
        if outputs.len() != self.n {
            return Err(CircuitError::LengthMismatch { expected: self.n, got: outputs.len() });
        }
        for &g in outputs {
            self.gates.push(Gate::Or(g, g));
        }
        Circuit::new(self.n, self.gates)
    }
}

/// Ready-made circuits used by the CLI builtins and the test-suites.
pub mod library {
    use super::*;

    /// Names accepted by [`builtin`]; `identity`, `bitwise-not` and
    /// `counter` take a size suffix such as `counter:n=3`.
    pub const BUILTIN_NAMES: &[&str] =
        &["identity:n=K", "bitwise-not:n=K", "rotation", "or-latch", "and-shift", "twisted-shift3", "counter:n=K"];

    /// Looks up a library circuit by name.
    pub fn builtin(label: &str) -> Result<Circuit, CircuitError> {
        let (name, size) = match label.split_once(":n=") {
            Some((name, k)) => {
                let k: usize = k.parse().map_err(|_| CircuitError::Malformed(format!("bad size in {label:?}")))?;
                if k == 0 {
                    return Err(CircuitError::Malformed(format!("size must be positive in {label:?}")));
                }
                (name, Some(k))
            }
            None => (label, None),
        };
        match (name, size) {
            ("identity", Some(k)) => Ok(identity(k)),
            ("bitwise-not", Some(k)) => Ok(bitwise_not(k)),
            ("counter", Some(k)) => Ok(counter(k)),
            ("rotation", None) => Ok(rotation()),
            ("or-latch", None) => Ok(or_latch()),
            ("and-shift", None) => Ok(and_shift()),
            ("twisted-shift3", None) => Ok(twisted_shift3()),
            _ => Err(CircuitError::Malformed(format!(
                "unknown builtin circuit {label:?}; expected one of {}",
                BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    /// `F(B) = B`.
    pub fn identity(n: usize) -> Circuit {
        Circuit::identity(n)
    }

    /// `F(B) = ¬B` bitwise.
    pub fn bitwise_not(n: usize) -> Circuit {
        let mut b = CircuitBuilder::new(n);
        let outs: Vec<usize> = (1..=n).map(|i| b.not(i)).collect();
        b.finish(&outs).expect("well-formed")
    }

    /// `F(b₁, b₂) = (b₂, ¬b₁)`, a permutation of period 4.
    pub fn rotation() -> Circuit {
        let mut b = CircuitBuilder::new(2);
        let nb1 = b.not(1);
        b.finish(&[2, nb1]).expect("well-formed")
    }

    /// `F(b₁, b₂) = (b₁ ∨ b₂, ¬b₂)`.
    pub fn or_latch() -> Circuit {
        let mut b = CircuitBuilder::new(2);
        let o = b.or(1, 2);
        let n2 = b.not(2);
        b.finish(&[o, n2]).expect("well-formed")
    }

    /// `F(b₁, b₂) = (b₂, b₁ ∧ ¬b₂)`: settles into the 2-cycle `10 ↔ 01`.
    pub fn and_shift() -> Circuit {
        let mut b = CircuitBuilder::new(2);
        let n2 = b.not(2);
        let masked = b.and(1, n2);
        b.finish(&[2, masked]).expect("well-formed")
    }

    /// Three-bit cyclic shift with one inversion: `(b₁,b₂,b₃) ↦ (¬b₃, b₁, b₂)`.
    pub fn twisted_shift3() -> Circuit {
        let mut b = CircuitBuilder::new(3);
        let n3 = b.not(3);
        b.finish(&[n3, 1, 2]).expect("well-formed")
    }

    /// Binary increment modulo `2^n` (bit 1 least significant).
    pub fn counter(n: usize) -> Circuit {
        let mut b = CircuitBuilder::new(n);
        let mut outs = Vec::with_capacity(n);
        let mut carry: Option<usize> = None;
        for i in 1..=n {
            match carry {
                None => {
                    outs.push(b.not(i));
                    carry = Some(i);
                }
                Some(c) => {
                    let both = b.and(i, c);
                    let either = b.or(i, c);
                    let nboth = b.not(both);
                    outs.push(b.and(either, nboth));
                    carry = Some(both);
                }
            }
        }
        b.finish(&outs).expect("well-formed")
    }
}
