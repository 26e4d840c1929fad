//! Predicates on construction policies: coherence with a phase, correctness
//! of the computing circuit for an input, finality of gates, and the initial
//! and final policy shapes of a phase.

use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::circuit::{evaluate, BitString, Circuit};
use crate::construction::{gate_state_name, ConstructionIndex, ConstructionParams, GateStates};
use crate::mdp::{appeals, evaluate_values, Mdp, Policy, StateId, Valuation};
use crate::numerics::Rational;

fn target_name<'a>(m: &'a Mdp, sigma: &Policy, s: StateId) -> &'a str {
    &m.action(sigma.get(s)).label
}

fn expect(m: &Mdp, sigma: &Policy, s: StateId, want: &str, out: &mut Vec<String>) {
    let got = target_name(m, sigma, s);
    if got != want {
        out.push(format!("{} uses {got}, expected {want}", m.state_name(s)));
    }
}

/// Violations of coherence with phase `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub phase: usize,
    pub violations: Vec<String>,
}

impl CoherenceReport {
    pub fn is_coherent(&self) -> bool {
        self.violations.is_empty()
    }
}

fn coherence_violations(m: &Mdp, idx: &ConstructionIndex, sigma: &Policy, j: usize, out: &mut Vec<String>) {
    let cj = format!("c{j}");
    let n = idx.n();
    let gates = idx.gate_count();
    for i in 1..=gates {
        for copy in 0..2 {
            match *idx.gate(i, copy) {
                GateStates::Input { l, r, .. } => {
                    expect(m, sigma, l, &cj, out);
                    if copy == j {
                        expect(m, sigma, r, &cj, out);
                    } else {
                        expect(m, sigma, r, &gate_state_name('o', j, gates - n + i), out);
                    }
                }
                GateStates::Or { x, .. } => expect(m, sigma, x, &cj, out),
                GateStates::Not { a, .. } => {
                    if copy != j {
                        expect(m, sigma, a, &cj, out);
                    }
                }
            }
        }
    }
}

/// Checks that `sigma` is coherent with phase `j`.
pub fn check_coherent(m: &Mdp, idx: &ConstructionIndex, sigma: &Policy, j: usize) -> CoherenceReport {
    let mut violations = Vec::new();
    coherence_violations(m, idx, sigma, j, &mut violations);
    CoherenceReport { phase: j, violations }
}

/// Gates of copy `j` whose output value relative to `c_j` is not `H_d` for
/// a true gate and `L_d` for a false one under input `b`.
pub fn check_b_correct(
    idx: &ConstructionIndex,
    params: &ConstructionParams,
    c: &Circuit,
    values: &Valuation,
    b: &BitString,
    j: usize,
) -> Result<Vec<usize>, VerifyError> {
    let truth = evaluate(c, b)?;
    let cj = &values[idx.clock.c[j]];
    Ok((1..=idx.gate_count())
        .filter(|&i| {
            let d = idx.depth(i);
            let want = if truth[i - 1] { &params.h[d] } else { &params.l[d] };
            &(&values[idx.o(i, j)] - cj) != want
        })
        .collect())
}

fn states_of(g: &GateStates) -> Vec<StateId> {
    match *g {
        GateStates::Input { o, l, r } => vec![o, l, r],
        GateStates::Or { o, v, x } => vec![o, v, x],
        GateStates::Not { o, a } => vec![o, a],
    }
}

/// Gates of copy `j` that are not final: some state of the gate, or of a
/// gate of lower depth, has an action with appeal above `7/2`.
pub fn check_final(m: &Mdp, idx: &ConstructionIndex, appeal: &[Rational], j: usize) -> Vec<usize> {
    let threshold = Rational::new(7, 2);
    let settled: Vec<bool> = (1..=idx.gate_count())
        .map(|i| states_of(idx.gate(i, j)).iter().all(|&s| m.actions_of(s).iter().all(|&a| appeal[a] <= threshold)))
        .collect();
    (1..=idx.gate_count())
        .filter(|&i| {
            let d = idx.depth(i);
            !settled[i - 1] || (1..=idx.gate_count()).any(|g| idx.depth(g) < d && !settled[g - 1])
        })
        .collect()
}

/// Reads the bit string held by the input bits of copy `k`: a bit is 1 when
/// its output state takes the action towards `l`.
pub fn decode_inputs(m: &Mdp, idx: &ConstructionIndex, sigma: &Policy, k: usize) -> BitString {
    BitString::new((1..=idx.n()).map(|i| target_name(m, sigma, idx.o(i, k)) == gate_state_name('l', k, i)).collect())
}

fn computing_side(m: &Mdp, idx: &ConstructionIndex, sigma: &Policy, b: &BitString, j: usize, out: &mut Vec<String>) {
    coherence_violations(m, idx, sigma, j, out);
    for i in 1..=idx.n() {
        let kind = if b.get(i) { 'l' } else { 'r' };
        expect(m, sigma, idx.o(i, j), &gate_state_name(kind, j, i), out);
    }
}

fn nots_waiting(m: &Mdp, idx: &ConstructionIndex, sigma: &Policy, j: usize, out: &mut Vec<String>) {
    for i in 1..=idx.gate_count() {
        if let GateStates::Not { a, .. } = *idx.gate(i, j) {
            expect(m, sigma, a, &format!("c{j}"), out);
        }
    }
}

/// Ways in which `sigma` fails to be the initial policy for `b` in phase
/// `j`: coherent, copy `j` holding `b`, every copy-`(1−j)` input output at
/// its `l` state, and every NOT of copy `j` waiting at `c_j`.
pub fn initial_policy_violations(
    m: &Mdp,
    idx: &ConstructionIndex,
    sigma: &Policy,
    b: &BitString,
    j: usize,
) -> Result<Vec<String>, VerifyError> {
    check_len(idx, b)?;
    let mut out = Vec::new();
    computing_side(m, idx, sigma, b, j, &mut out);
    nots_waiting(m, idx, sigma, j, &mut out);
    for i in 1..=idx.n() {
        expect(m, sigma, idx.o(i, 1 - j), &gate_state_name('l', 1 - j, i), &mut out);
    }
    Ok(out)
}

/// Ways in which `sigma` fails to be the final policy for `b` in phase `j`:
/// coherent with copy `j` holding `b`, every gate of copy `j`
/// is final and correct for `b`, and copy `1 − j` has copied the circuit
/// outputs (`l` for a 0 output, `r` for a 1 output).
pub fn final_policy_violations(
    m: &Mdp,
    idx: &ConstructionIndex,
    params: &ConstructionParams,
    c: &Circuit,
    sigma: &Policy,
    b: &BitString,
    j: usize,
) -> Result<Vec<String>, VerifyError> {
    check_len(idx, b)?;
    let mut out = Vec::new();
    computing_side(m, idx, sigma, b, j, &mut out);
    let values = evaluate_values(m, sigma)?;
    let ap = appeals(m, sigma, &values);
    for i in check_final(m, idx, &ap, j) {
        out.push(format!("gate {i} of copy {j} is not final"));
    }
    for i in check_b_correct(idx, params, c, &values, b, j)? {
        out.push(format!("gate {i} of copy {j} is not correct for {b}"));
    }
    let truth = evaluate(c, b)?;
    for i in 1..=idx.n() {
        let kind = if truth[c.copy_source(i)? - 1] { 'r' } else { 'l' };
        expect(m, sigma, idx.o(i, 1 - j), &gate_state_name(kind, 1 - j, i), &mut out);
    }
    Ok(out)
}

fn check_len(idx: &ConstructionIndex, b: &BitString) -> Result<(), VerifyError> {
    if b.len() != idx.n() {
        return Err(crate::circuit::CircuitError::LengthMismatch { expected: idx.n(), got: b.len() }.into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library;
    use crate::construction::{build_from_function, initial_policy, Overrides};

    #[test]
    fn initial_policy_is_coherent_and_initial() {
        let (c, m, idx, params) = build_from_function(&library::rotation(), &Overrides::default()).unwrap();
        for b in ["00", "01", "10", "11"] {
            let b: BitString = b.parse().unwrap();
            let sigma = initial_policy(&m, &idx, &b).unwrap();
            assert!(check_coherent(&m, &idx, &sigma, 0).is_coherent());
            assert!(!check_coherent(&m, &idx, &sigma, 1).is_coherent());
            assert!(initial_policy_violations(&m, &idx, &sigma, &b, 0).unwrap().is_empty());
            assert_eq!(decode_inputs(&m, &idx, &sigma, 0), b);
            let v = evaluate_values(&m, &sigma).unwrap();
            let wrong = check_b_correct(&idx, &params, &c, &v, &b, 0).unwrap();
            assert!(wrong.iter().all(|&i| i > idx.n()));
            assert!(!final_policy_violations(&m, &idx, &params, &c, &sigma, &b, 0).unwrap().is_empty());
        }
    }
}
