mod common;

use common::sink_reaching_mdp;
use dantzig_lab::lp::{basis_from_policy, check_pi_simplex_equivalence, dual_and_reduced_costs, mdp_to_primal};
use dantzig_lab::mdp::{appeals, evaluate_values, Policy, TieBreak};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduced_costs_equal_appeals(m in sink_reaching_mdp(6, 3)) {
        let lp = mdp_to_primal(&m, 0).unwrap();
        let sigma = Policy::first_actions(&m).unwrap();
        let basis = basis_from_policy(&lp, &sigma).unwrap();
        prop_assert!(basis.is_feasible());
        let (y, reduced) = dual_and_reduced_costs(&lp, &basis);
        let v = evaluate_values(&m, &sigma).unwrap();
        for (row, &s) in lp.rows.iter().enumerate() {
            prop_assert_eq!(&y[row], &v[s]);
        }
        prop_assert_eq!(reduced, appeals(&m, &sigma, &v));
    }

    #[test]
    fn simplex_and_policy_iteration_move_in_lockstep(m in sink_reaching_mdp(6, 3), seed in any::<u64>()) {
        let sigma = Policy::first_actions(&m).unwrap();
        for tie in [TieBreak::LowestStateThenAction, TieBreak::HighestStateThenAction, TieBreak::SeededRandom(seed)] {
            let r = check_pi_simplex_equivalence(&m, 0, &sigma, tie, 10_000).unwrap();
            prop_assert!(r.equivalent, "{:?}", r.first_divergence);
            prop_assert!(r.objective_monotone && r.final_dual_feasible);
        }
    }
}
