use dantzig_lab::circuit::{library, BitString, Circuit};
use dantzig_lab::construction::{build_from_function, initial_policy, ConstructionIndex, ConstructionParams, Overrides};
use dantzig_lab::mdp::{default_budget, evaluate_gain, evaluate_values, Mdp, PiOptions, TieBreak};
use dantzig_lab::verify::{
    audit_appeal_catalog, check_all_transitions, check_coherent, phase_of, record_run, RecordedRun,
};

struct Built {
    c: Circuit,
    m: Mdp,
    idx: ConstructionIndex,
    params: ConstructionParams,
    b: BitString,
    run: RecordedRun,
}

fn run(f: &Circuit, b: &str, tie: TieBreak) -> Built {
    let (c, m, idx, params) = build_from_function(f, &Overrides::default()).unwrap();
    let b: BitString = b.parse().unwrap();
    let sigma = initial_policy(&m, &idx, &b).unwrap();
    let opts = PiOptions::new(tie, default_budget(idx.n(), m.state_count()));
    let run = record_run(&m, &idx, &params, &sigma, &opts).unwrap();
    Built { c, m, idx, params, b, run }
}

#[test]
fn constructions_are_stochastic_and_start_with_zero_gain() {
    for name in ["rotation", "or-latch", "and-shift", "identity:n=2", "bitwise-not:n=2"] {
        let f = library::builtin(name).unwrap();
        let (_, m, idx, _) = build_from_function(&f, &Overrides::default()).unwrap();
        m.validate().unwrap();
        let sigma = initial_policy(&m, &idx, &BitString::zeros(idx.n())).unwrap();
        assert!(evaluate_gain(&m, &sigma).unwrap().iter().all(|g| g.is_zero()), "{name}");
    }
}

#[test]
fn or_latch_phases_hand_over_cleanly() {
    let r = run(&library::or_latch(), "01", TieBreak::default());
    assert!(r.run.optimal);
    let reports = check_all_transitions(&r.m, &r.idx, &r.params, &r.c, &r.run, &r.b).unwrap();
    assert_eq!(reports.len(), 3);
    for t in &reports {
        t.ensure().unwrap();
    }
    audit_appeal_catalog(&r.m, &r.idx, &r.params, &r.run).ensure().unwrap();
}

#[test]
fn copying_outputs_stay_below_the_high_value() {
    let r = run(&library::rotation(), "10", TieBreak::default());
    let mut checked = 0;
    for sigma in r.run.trace.policies(&r.m) {
        let v = evaluate_values(&r.m, &sigma).unwrap();
        let phase = phase_of(&v, &r.idx, &r.params).unwrap();
        let j = phase.parity;
        if !check_coherent(&r.m, &r.idx, &sigma, j).is_coherent() {
            continue;
        }
        checked += 1;
        let cj = &v[r.idx.clock.c[j]];
        for i in 1..=r.idx.gate_count() {
            let bound = cj + &r.params.h[r.idx.depth(i)];
            assert!(v[r.idx.o(i, 1 - j)] <= bound, "gate {i} in phase {}", phase.index);
        }
    }
    assert!(checked > 0);
}

#[test]
fn identical_configurations_give_identical_traces() {
    for tie in [TieBreak::LowestStateThenAction, TieBreak::SeededRandom(7)] {
        let a = run(&library::rotation(), "01", tie);
        let b = run(&library::rotation(), "01", tie);
        assert_eq!(a.run.trace.to_jsonl(&a.m), b.run.trace.to_jsonl(&b.m));
    }
}
