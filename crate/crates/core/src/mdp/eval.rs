//! Exact evaluation of a fixed policy and of the appeals of its actions.
//!
//! The policy graph is split into strongly connected components and solved
//! in reverse topological order. Singleton components with a self-return
//! (the usual gadget shape) are closed by a single division; larger transient
//! components fall back to dense exact elimination.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::model::{Mdp, Policy, StateId, Valuation};
use super::MdpError;
use crate::numerics::{solve_linear_system, Matrix, Rational};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Value,
    Gain,
}

fn policy_graph(m: &Mdp, sigma: &Policy) -> DiGraph<(), ()> {
    let mut g = DiGraph::with_capacity(m.state_count(), m.state_count() * 2);
    for _ in 0..m.state_count() {
        g.add_node(());
    }
    for s in 0..m.state_count() {
        for (t, _) in &m.action(sigma.get(s)).transitions {
            if *t != s {
                g.add_edge(NodeIndex::new(s), NodeIndex::new(*t), ());
            }
        }
    }
    g
}

fn solve(m: &Mdp, sigma: &Policy, what: Quantity) -> Result<Vec<Rational>, MdpError> {
    let n = m.state_count();
    let graph = policy_graph(m, sigma);
    let comps = tarjan_scc(&graph);
    let mut comp_of = vec![usize::MAX; n];
    for (k, c) in comps.iter().enumerate() {
        for v in c {
            comp_of[v.index()] = k;
        }
    }
    let mut out: Vec<Option<Rational>> = vec![None; n];
    for (k, comp) in comps.iter().enumerate() {
        let members: Vec<StateId> = comp.iter().map(|v| v.index()).collect();
        let closed = members
            .iter()
            .all(|&s| m.action(sigma.get(s)).transitions.iter().all(|(t, _)| comp_of[*t] == k));
        if closed {
            let s = members[0];
            let act = m.action(sigma.get(s));
            if members.len() > 1 {
                return Err(match what {
                    Quantity::Value => MdpError::NonZeroGainPolicy(format!(
                        "recurrent class of size {} containing {}",
                        members.len(),
                        m.state_name(s)
                    )),
                    Quantity::Gain => MdpError::UnsupportedChainStructure(format!(
                        "recurrent class of size {} containing {}",
                        members.len(),
                        m.state_name(s)
                    )),
                });
            }
            out[s] = Some(match what {
                Quantity::Value if act.reward.is_zero() => Rational::zero(),
                Quantity::Value => {
                    return Err(MdpError::NonZeroGainPolicy(format!(
                        "absorbing state {} has reward {}",
                        m.state_name(s),
                        act.reward
                    )))
                }
                Quantity::Gain => act.reward.clone(),
            });
            continue;
        }
        if members.len() == 1 {
            let s = members[0];
            let act = m.action(sigma.get(s));
            let mut acc = if what == Quantity::Value { act.reward.clone() } else { Rational::zero() };
            let mut stay = Rational::zero();
            for (t, p) in &act.transitions {
                if *t == s {
                    stay = p.clone();
                } else {
                    acc += p * out[*t].as_ref().expect("successor solved earlier");
                }
            }
            out[s] = Some(acc / (Rational::one() - stay));
            continue;
        }
        let local: std::collections::HashMap<StateId, usize> =
            members.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let size = members.len();
        let mut a = Matrix::identity(size);
        let mut rhs = Vec::with_capacity(size);
        for (row, &s) in members.iter().enumerate() {
            let act = m.action(sigma.get(s));
            let mut acc = if what == Quantity::Value { act.reward.clone() } else { Rational::zero() };
            for (t, p) in &act.transitions {
                match local.get(t) {
                    Some(&col) => {
                        let cur = a.get(row, col).clone();
                        a.set(row, col, cur - p);
                    }
                    None => acc += p * out[*t].as_ref().expect("successor solved earlier"),
                }
            }
            rhs.push(acc);
        }
        let x = solve_linear_system(&a, &rhs)?;
        for (s, v) in members.iter().zip(x) {
            out[*s] = Some(v);
        }
    }
    Ok(out.into_iter().map(|v| v.expect("every state solved")).collect())
}

/// Values `val^σ` solving the value equation, with every absorbing
/// zero-reward state pinned to 0.
///
/// Fails with `NonZeroGainPolicy` when a recurrent class has nonzero reward
/// or more than one state.
pub fn evaluate_values(m: &Mdp, sigma: &Policy) -> Result<Valuation, MdpError> {
    solve(m, sigma, Quantity::Value).map(Valuation)
}

/// Gains `G^σ(s)`: the probability-weighted reward of the absorbing loops
/// reached from `s`. Requires every recurrent class to be a single state.
pub fn evaluate_gain(m: &Mdp, sigma: &Policy) -> Result<Vec<Rational>, MdpError> {
    solve(m, sigma, Quantity::Gain)
}

/// `appeal^σ(a) = r(a) + Σ p(s', a)·val(s') − val(s)` for every action.
/// Chosen actions get exactly 0.
pub fn appeals(m: &Mdp, sigma: &Policy, v: &Valuation) -> Vec<Rational> {
    m.actions()
        .iter()
        .enumerate()
        .map(|(id, a)| {
            if sigma.get(a.state) == id {
                return Rational::zero();
            }
            let mut x = a.reward.clone();
            for (t, p) in &a.transitions {
                x += p * v.get(*t);
            }
            x - v.get(a.state)
        })
        .collect()
}

/// Residual of the value equation at every state (all zero for a correct
/// valuation of `sigma`).
pub fn value_equation_residuals(m: &Mdp, sigma: &Policy, v: &Valuation) -> Vec<Rational> {
    (0..m.state_count())
        .map(|s| {
            let a = m.action(sigma.get(s));
            let mut x = a.reward.clone();
            for (t, p) in &a.transitions {
                x += p * v.get(*t);
            }
            x - v.get(s)
        })
        .collect()
}
