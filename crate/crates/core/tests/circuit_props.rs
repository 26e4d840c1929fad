use dantzig_lab::circuit::{
    decide_bitswitch, decide_circuitvalue, evaluate, negated_form, normalize_depths, BitString, Circuit, Gate,
};
use proptest::prelude::*;

/// Random topological circuit with `n ≤ 4` inputs and at most 20 gates.
fn circuit() -> impl Strategy<Value = Circuit> {
    (1usize..=4, 0usize..=12).prop_flat_map(|(n, extra)| {
        let k = n + extra;
        proptest::collection::vec((any::<bool>(), any::<u32>(), any::<u32>()), k).prop_map(move |picks| {
            let mut gates = vec![Gate::Input; n];
            for (is_or, a, b) in picks {
                let len = gates.len();
                let a = a as usize % len + 1;
                let b = b as usize % len + 1;
                gates.push(if is_or { Gate::Or(a, b) } else { Gate::Not(a) });
            }
            Circuit::new(n, gates).unwrap()
        })
    })
}

fn naive(c: &Circuit, b: &BitString, i: usize) -> bool {
    match c.gates()[i - 1] {
        Gate::Input => b.get(i),
        Gate::Or(x, y) => naive(c, b, x) || naive(c, b, y),
        Gate::Not(x) => !naive(c, b, x),
    }
}

fn inputs(n: usize) -> impl Iterator<Item = BitString> {
    (0..1u64 << n).map(move |v| BitString::from_u64(v, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn evaluate_matches_recursive_evaluator(c in circuit()) {
        for b in inputs(c.n()) {
            let v = evaluate(&c, &b).unwrap();
            for i in 1..=c.len() {
                prop_assert_eq!(v[i - 1], naive(&c, &b, i));
            }
        }
    }

    #[test]
    fn normalization_preserves_the_function(c in circuit()) {
        let norm = normalize_depths(&c);
        prop_assert!(norm.is_normalized());
        prop_assert_eq!(norm.n(), c.n());
        prop_assert_eq!(normalize_depths(&norm), norm.clone());
        for b in inputs(c.n()) {
            prop_assert_eq!(norm.apply(&b).unwrap(), c.apply(&b).unwrap());
        }
    }

    #[test]
    fn negated_form_inverts_every_output(c in circuit()) {
        let neg = negated_form(&c);
        prop_assert!(neg.is_normalized());
        prop_assert_eq!(neg.n(), c.n());
        for b in inputs(c.n()) {
            let f = c.apply(&b).unwrap();
            let v = evaluate(&neg, &b).unwrap();
            for (k, i) in neg.outputs().enumerate() {
                prop_assert_eq!(v[i - 1], !f.get(k + 1));
            }
        }
    }

    #[test]
    fn decisions_match_a_materialized_orbit(c in circuit(), seed in any::<u64>(), z in 1usize..=4) {
        let n = c.n();
        prop_assume!(z <= n && n <= 3);
        let b = BitString::from_u64(seed % (1 << n), n);
        let mut orbit = vec![b.clone()];
        for _ in 0..1u64 << n {
            let next = c.apply(orbit.last().unwrap()).unwrap();
            orbit.push(next);
        }
        let switch = (0..orbit.len()).filter(|i| i % 2 == 0).any(|i| !orbit[i].get(z));
        prop_assert_eq!(decide_bitswitch(&c, &b, z).unwrap(), switch);
        prop_assert_eq!(decide_circuitvalue(&c, &b, z).unwrap(), !orbit[orbit.len() - 1].get(z));
    }

    #[test]
    fn bit_strings_round_trip(v in any::<u64>(), n in 1usize..=16) {
        let b = BitString::from_u64(v % (1 << n), n);
        prop_assert_eq!(b.to_string().parse::<BitString>().unwrap(), b);
    }
}
