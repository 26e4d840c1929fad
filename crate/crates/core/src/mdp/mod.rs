//! Markov decision processes under the total-reward criterion: data model,
//! the appeal reduction gadget, exact policy evaluation, and Dantzig-rule
//! policy iteration.

mod engine;
mod eval;
mod model;

pub use engine::{
    decide_action_switch, decide_dantzig_mdp_sol, default_budget, dantzig_step, run_policy_iteration, PiOptions,
    PiOutcome, Step, TieBreak, TieBreaker, Trace, TraceEvent, Watch, Watcher,
};
pub use eval::{appeals, evaluate_gain, evaluate_values, value_equation_residuals};
pub use model::{add_gadget, gadget_state_name, Action, ActionId, ActionJson, Mdp, MdpJson, Policy, StateId, Valuation};

use thiserror::Error;

use crate::numerics::NumericsError;

/// Errors raised by the MDP layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MdpError {
    #[error("bad probability: {0}")]
    BadProbability(String),
    #[error("policy has nonzero gain: {0}")]
    NonZeroGainPolicy(String),
    #[error("unsupported chain structure: {0}")]
    UnsupportedChainStructure(String),
    #[error("iteration budget of {budget} switches exceeded")]
    IterationBudgetExceeded { budget: usize },
    #[error("value monotonicity violated at switch {iteration} (state {state})")]
    MonotonicityViolation { iteration: usize, state: String },
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("duplicate state name {0}")]
    DuplicateState(String),
    #[error("state {0} has no actions")]
    NoActions(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn sink(m: &mut Mdp) -> StateId {
        let si = m.add_state("si").unwrap();
        m.add_edge(si, si, Rational::zero()).unwrap();
        si
    }

    #[test]
    fn sink_alone_has_value_zero() {
        let mut m = Mdp::new();
        sink(&mut m);
        let p = Policy::first_actions(&m).unwrap();
        assert_eq!(evaluate_values(&m, &p).unwrap().0, vec![Rational::zero()]);
    }

    #[test]
    fn edge_to_sink_carries_reward() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let s = m.add_state("s").unwrap();
        m.add_edge(s, si, Rational::integer(5)).unwrap();
        let p = Policy::first_actions(&m).unwrap();
        assert_eq!(evaluate_values(&m, &p).unwrap()[s], Rational::integer(5));
    }

    #[test]
    fn rewarded_loop_is_rejected() {
        let mut m = Mdp::new();
        let s = m.add_state("s").unwrap();
        m.add_edge(s, s, Rational::one()).unwrap();
        let p = Policy::first_actions(&m).unwrap();
        assert!(matches!(evaluate_values(&m, &p), Err(MdpError::NonZeroGainPolicy(_))));
        assert_eq!(evaluate_gain(&m, &p).unwrap(), vec![Rational::one()]);
    }

    #[test]
    fn two_state_cycle_is_rejected() {
        let mut m = Mdp::new();
        let a = m.add_state("a").unwrap();
        let b = m.add_state("b").unwrap();
        m.add_edge(a, b, Rational::zero()).unwrap();
        m.add_edge(b, a, Rational::zero()).unwrap();
        let p = Policy::first_actions(&m).unwrap();
        assert!(matches!(evaluate_values(&m, &p), Err(MdpError::NonZeroGainPolicy(_))));
        assert!(matches!(evaluate_gain(&m, &p), Err(MdpError::UnsupportedChainStructure(_))));
    }

    #[test]
    fn gains_average_over_absorbing_loops() {
        let mut m = Mdp::new();
        let z = m.add_state("zero").unwrap();
        m.add_edge(z, z, Rational::zero()).unwrap();
        let f = m.add_state("four").unwrap();
        m.add_edge(f, f, Rational::integer(4)).unwrap();
        let s = m.add_state("s").unwrap();
        m.add_action(s, Rational::zero(), vec![(z, r(1, 2)), (f, r(1, 2))], "split").unwrap();
        let t = m.add_state("t").unwrap();
        m.add_edge(t, f, Rational::zero()).unwrap();
        let p = Policy::first_actions(&m).unwrap();
        let g = evaluate_gain(&m, &p).unwrap();
        assert_eq!(g[s], Rational::integer(2));
        assert_eq!(g[t], Rational::integer(4));
    }

    #[test]
    fn transient_cycle_uses_dense_solve() {
        // a -> b w.p. 1; b -> a w.p. 1/2, sink w.p. 1/2; rewards 1 each.
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let a = m.add_state("a").unwrap();
        let b = m.add_state("b").unwrap();
        m.add_edge(a, b, Rational::one()).unwrap();
        m.add_action(b, Rational::one(), vec![(a, r(1, 2)), (si, r(1, 2))], "mix").unwrap();
        let p = Policy::first_actions(&m).unwrap();
        let v = evaluate_values(&m, &p).unwrap();
        // v_b = 1 + v_a / 2, v_a = 1 + v_b  =>  v_b = 3, v_a = 4.
        assert_eq!(v[a], Rational::integer(4));
        assert_eq!(v[b], Rational::integer(3));
        assert!(value_equation_residuals(&m, &p, &v).iter().all(Rational::is_zero));
    }

    #[test]
    fn bad_probabilities_rejected() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let s = m.add_state("s").unwrap();
        assert!(m.add_action(s, Rational::zero(), vec![(si, r(1, 2))], "half").is_err());
        assert!(m.add_action(s, Rational::zero(), vec![(si, r(3, 2)), (s, r(-1, 2))], "neg").is_err());
        assert!(add_gadget(&mut m, s, si, Rational::zero(), Rational::zero(), Rational::zero()).is_err());
        assert!(add_gadget(&mut m, s, si, Rational::zero(), Rational::zero(), r(3, 2)).is_err());
    }

    #[test]
    fn gadget_with_unit_probability_is_a_two_hop_edge() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let s = m.add_state("s").unwrap();
        let a = add_gadget(&mut m, s, si, Rational::zero(), Rational::integer(7), Rational::one()).unwrap();
        assert_eq!(m.action(a).transitions.len(), 1);
        let p = Policy::first_actions(&m).unwrap();
        assert_eq!(evaluate_values(&m, &p).unwrap()[s], Rational::integer(7));
        assert_eq!(m.state_name(m.action(a).transitions[0].0), "(s,si)");
    }

    #[test]
    fn gadget_both_clauses() {
        // s has a direct edge to the sink (reward 10) and a gadget to t.
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let t = m.add_state("t").unwrap();
        m.add_edge(t, si, Rational::integer(13)).unwrap();
        let s = m.add_state("s").unwrap();
        let direct = m.add_edge(s, si, Rational::integer(10)).unwrap();
        let (rd, rf, p) = (r(1, 3), r(-2, 1), r(2, 5));
        let g = add_gadget(&mut m, s, t, rd.clone(), rf.clone(), p.clone()).unwrap();
        let mut sigma = Policy::first_actions(&m).unwrap();
        assert!(sigma.uses(&m, direct));
        let v = evaluate_values(&m, &sigma).unwrap();
        let b = &v[t] - &v[s];
        let ap = appeals(&m, &sigma, &v);
        assert_eq!(ap[g], &p * (&b + &rf) + &rd);
        assert!(ap[direct].is_zero());
        sigma.switch_to(&m, g);
        let v = evaluate_values(&m, &sigma).unwrap();
        assert_eq!(v[s], &v[t] + &rf + &rd / &p);
    }

    fn two_choice() -> (Mdp, StateId, ActionId, ActionId) {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let s = m.add_state("s").unwrap();
        let low = m.add_edge(s, si, Rational::integer(1)).unwrap();
        let high = m.add_action(s, Rational::integer(3), vec![(si, Rational::one())], "better").unwrap();
        (m, s, low, high)
    }

    #[test]
    fn step_and_run_on_two_choices() {
        let (m, s, low, high) = two_choice();
        let sigma = Policy::first_actions(&m).unwrap();
        let mut tie = TieBreaker::new(TieBreak::default());
        let Step::Switched { policy, event } = dantzig_step(&m, &sigma, &mut tie).unwrap() else { panic!("expected a switch") };
        assert_eq!((event.state, event.old_action, event.new_action), (s, low, high));
        assert_eq!(event.appeal, Rational::integer(2));
        assert!(matches!(dantzig_step(&m, &policy, &mut tie).unwrap(), Step::Optimal));
        let opts = PiOptions::new(TieBreak::default(), 10);
        assert!(decide_action_switch(&m, &sigma, high, &opts).unwrap());
        assert!(decide_dantzig_mdp_sol(&m, &sigma, high, &opts).unwrap());
        assert!(!decide_dantzig_mdp_sol(&m, &sigma, low, &opts).unwrap());
        let out = run_policy_iteration(&m, &policy, &opts, &mut []).unwrap();
        assert!(out.trace.is_empty() && out.optimal);
        assert!(!decide_action_switch(&m, &policy, low, &opts).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let (m, _, _, _) = two_choice();
        let sigma = Policy::first_actions(&m).unwrap();
        let err = run_policy_iteration(&m, &sigma, &PiOptions::new(TieBreak::default(), 0), &mut []).unwrap_err();
        assert_eq!(err, MdpError::IterationBudgetExceeded { budget: 0 });
    }

    #[test]
    fn tie_rules_pick_ends_or_draw() {
        let c = vec![(3, 9), (1, 4), (1, 2)];
        assert_eq!(TieBreaker::new(TieBreak::LowestStateThenAction).pick(c.clone()), Some((1, 2)));
        assert_eq!(TieBreaker::new(TieBreak::HighestStateThenAction).pick(c.clone()), Some((3, 9)));
        let mut a = TieBreaker::new(TieBreak::SeededRandom(7));
        let mut b = TieBreaker::new(TieBreak::SeededRandom(7));
        for _ in 0..20 {
            assert_eq!(a.pick(c.clone()), b.pick(c.clone()));
        }
        assert_eq!("seeded:7".parse::<TieBreak>().unwrap(), TieBreak::SeededRandom(7));
        assert_eq!("highest".parse::<TieBreak>().unwrap(), TieBreak::HighestStateThenAction);
        assert!("sideways".parse::<TieBreak>().is_err());
    }

    #[test]
    fn mdp_json_round_trip() {
        let (m, _, _, _) = two_choice();
        let doc = m.to_json();
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("\"1/1\""));
        let back = Mdp::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
