mod common;

use common::{rational, sink_reaching_mdp};
use dantzig_lab::mdp::{
    add_gadget, appeals, evaluate_gain, evaluate_values, run_policy_iteration, value_equation_residuals, Mdp,
    PiOptions, Policy, TieBreak,
};
use dantzig_lab::Rational;
use proptest::prelude::*;

fn tie_rule() -> impl Strategy<Value = TieBreak> {
    prop_oneof![
        Just(TieBreak::LowestStateThenAction),
        Just(TieBreak::HighestStateThenAction),
        any::<u64>().prop_map(TieBreak::SeededRandom),
    ]
}

/// Component-wise best values over every deterministic policy.
fn brute_force_optimum(m: &Mdp) -> Vec<Rational> {
    let counts: Vec<usize> = (0..m.state_count()).map(|s| m.actions_of(s).len()).collect();
    let mut pick = vec![0usize; counts.len()];
    let mut best: Option<Vec<Rational>> = None;
    loop {
        let choice = (0..counts.len()).map(|s| m.actions_of(s)[pick[s]]).collect();
        let v = evaluate_values(m, &Policy::new(m, choice).unwrap()).unwrap();
        best = Some(match best {
            None => v.as_slice().to_vec(),
            Some(b) => b.into_iter().zip(v.as_slice()).map(|(x, y)| if &x >= y { x } else { y.clone() }).collect(),
        });
        let mut k = 0;
        while k < counts.len() {
            pick[k] += 1;
            if pick[k] < counts[k] {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == counts.len() {
            return best.unwrap();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn values_solve_the_value_equation(m in sink_reaching_mdp(6, 3)) {
        let sigma = Policy::first_actions(&m).unwrap();
        let v = evaluate_values(&m, &sigma).unwrap();
        prop_assert!(value_equation_residuals(&m, &sigma, &v).iter().all(Rational::is_zero));
        let ap = appeals(&m, &sigma, &v);
        for s in 0..m.state_count() {
            prop_assert!(ap[sigma.get(s)].is_zero());
        }
        prop_assert!(evaluate_gain(&m, &sigma).unwrap().iter().all(Rational::is_zero));
    }

    #[test]
    fn policy_iteration_is_monotone_and_optimal(m in sink_reaching_mdp(5, 3), tie in tie_rule()) {
        let sigma = Policy::first_actions(&m).unwrap();
        let out = run_policy_iteration(&m, &sigma, &PiOptions::new(tie, 10_000), &mut []).unwrap();
        prop_assert!(out.optimal);
        let vals: Vec<_> = out.trace.policies(&m).iter().map(|p| evaluate_values(&m, p).unwrap()).collect();
        for w in vals.windows(2) {
            let (a, b) = (w[0].as_slice(), w[1].as_slice());
            prop_assert!(a.iter().zip(b).all(|(x, y)| x <= y));
            prop_assert!(a.iter().zip(b).any(|(x, y)| x < y));
        }
        let ap = appeals(&m, &out.policy, &out.values);
        prop_assert!(ap.iter().all(|a| a <= &Rational::from(0i64)));
        prop_assert_eq!(out.values.as_slice().to_vec(), brute_force_optimum(&m));
    }

    #[test]
    fn seeded_runs_are_reproducible(m in sink_reaching_mdp(6, 3), seed in any::<u64>()) {
        let sigma = Policy::first_actions(&m).unwrap();
        let opts = PiOptions::new(TieBreak::SeededRandom(seed), 10_000);
        let a = run_policy_iteration(&m, &sigma, &opts, &mut []).unwrap();
        let b = run_policy_iteration(&m, &sigma, &opts, &mut []).unwrap();
        prop_assert_eq!(a.trace.to_jsonl(&m), b.trace.to_jsonl(&m));
    }

    #[test]
    fn gadget_clauses(
        rs in rational(60),
        rt in rational(60),
        rd in rational(20),
        rf in rational(20),
        p in (1i64..=999).prop_map(|k| Rational::new(k, 1000)),
    ) {
        let mut m = Mdp::new();
        let si = m.add_state("si").unwrap();
        m.add_edge(si, si, Rational::from(0i64)).unwrap();
        let t = m.add_state("t").unwrap();
        m.add_edge(t, si, rt.clone()).unwrap();
        let s = m.add_state("s").unwrap();
        m.add_edge(s, si, rs.clone()).unwrap();
        let g = add_gadget(&mut m, s, t, rd.clone(), rf.clone(), p.clone()).unwrap();
        let mut sigma = Policy::first_actions(&m).unwrap();
        let v = evaluate_values(&m, &sigma).unwrap();
        let ap = appeals(&m, &sigma, &v);
        prop_assert_eq!(&ap[g], &(&p * &(&(&rt - &rs) + &rf) + &rd));
        sigma.switch_to(&m, g);
        let v = evaluate_values(&m, &sigma).unwrap();
        prop_assert_eq!(&v[s], &(&(&rt + &rf) + &(&rd / &p)));
    }
}
