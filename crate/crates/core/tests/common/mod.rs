#![allow(dead_code)]

use dantzig_lab::mdp::{Mdp, StateId};
use dantzig_lab::Rational;
use proptest::prelude::*;

/// Shape of one random action: reward numerator, optional self-loop weight,
/// and up to two lower targets with weights.
pub type RandomAction = (i64, u8, Vec<(u32, u8)>);

pub fn rational(span: i64) -> impl Strategy<Value = Rational> {
    (-span..=span, 1i64..=8).prop_map(|(p, q)| Rational::new(p, q))
}

fn random_action() -> impl Strategy<Value = RandomAction> {
    (-30i64..=30, 0u8..=3, proptest::collection::vec((any::<u32>(), 1u8..=4), 1..=2))
}

/// Random MDP in which every policy reaches the sink (state 0) with
/// probability 1: actions move to lower states, apart from a self-loop of
/// probability below one.
pub fn sink_reaching_mdp(max_states: usize, max_actions: usize) -> impl Strategy<Value = Mdp> {
    proptest::collection::vec(proptest::collection::vec(random_action(), 1..=max_actions), 1..=max_states)
        .prop_map(build)
}

fn build(states: Vec<Vec<RandomAction>>) -> Mdp {
    let mut m = Mdp::new();
    let si = m.add_state("si").unwrap();
    m.add_edge(si, si, Rational::from(0i64)).unwrap();
    for (k, actions) in states.into_iter().enumerate() {
        let s: StateId = m.add_state(format!("s{}", k + 1)).unwrap();
        for (a, (reward, loop_w, targets)) in actions.into_iter().enumerate() {
            let total: i64 = i64::from(loop_w) + targets.iter().map(|t| i64::from(t.1)).sum::<i64>();
            let mut weights: Vec<(StateId, i64)> = targets.iter().map(|&(t, w)| (t as usize % s, i64::from(w))).collect();
            if loop_w > 0 {
                weights.push((s, i64::from(loop_w)));
            }
            let mut merged: Vec<(StateId, Rational)> = Vec::new();
            for (t, w) in weights {
                match merged.iter_mut().find(|(x, _)| *x == t) {
                    Some((_, p)) => *p = &*p + &Rational::new(w, total),
                    None => merged.push((t, Rational::new(w, total))),
                }
            }
            m.add_action(s, Rational::new(reward, 4), merged, format!("a{a}")).unwrap();
        }
    }
    m
}
