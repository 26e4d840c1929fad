"""Smoke test for the pydantzig extension module.

Run after `pip install -e crates/python --no-build-isolation`:

    python3 python/smoke_test.py
"""

import json
from fractions import Fraction

import pydantzig


def check_circuits():
    f = pydantzig.Circuit.builtin("rotation")
    assert f.n == 2
    assert f.apply("11") == "10"
    assert f.orbit("11")[:3] == ["11", "10", "00"]
    neg = f.negated_form()
    assert neg.is_normalized()
    assert all(neg.apply(b) == "".join("1" if c == "0" else "0" for c in f.apply(b)) for b in ("00", "01", "10", "11"))
    assert f.decide_bitswitch("11", 1) is True
    assert pydantzig.Circuit.from_json(f.to_json()).apply("01") == f.apply("01")
    try:
        pydantzig.Circuit.builtin("no-such-circuit")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown builtin accepted")


def check_clock():
    report = pydantzig.clock_check(3)
    assert report["passed"] and report["switches"] == 7
    assert {Fraction(a) for a in report["appeals"]} <= {Fraction(1, 4), Fraction(3, 8), Fraction(5, 12)}
    printed = pydantzig.clock_check(3, alpha="printed")
    assert not printed["passed"] and printed["expected_fail"]
    assert pydantzig.gray_code(3, 1) == "001"
    values = pydantzig.clock_expected_values(3, 2)
    assert (Fraction(values["c0"]), Fraction(values["c1"])) == (2, 3)


def check_construction():
    f = pydantzig.Circuit.builtin("rotation")
    const = pydantzig.Construction(f)
    assert const.n == 2 and const.state_count > 100
    run = const.run("11")
    assert run.optimal and run.switches > 0
    assert len(run.trace_jsonl.splitlines()) == run.switches
    values = dict(run.values)
    assert Fraction(values["si"]) == 0
    assert all("." not in v for v in values.values())
    assert const.audit_catalog("11")["passed"]
    assert all(t["passed"] for t in const.check_transitions("11"))
    assert const.decide_action_switch("11", 1) == f.decide_bitswitch("11", 1)
    manifest = const.manifest()
    assert json.dumps(manifest)

    terminal = pydantzig.Construction(f, z=1, bits="11", w_mode="bound")
    assert terminal.decide_dantzig_mdp_sol("11") == f.decide_circuitvalue("11", 1)


def check_end_to_end():
    f = pydantzig.Circuit.builtin("or-latch")
    report = pydantzig.end_to_end(f, "01", 2)
    assert report["passed"], report
    assert report["phases_decoded"] == report["phases_expected"]


def check_turing_machine():
    tm = json.dumps(
        {
            "states": ["scan", "yes"],
            "start": "scan",
            "accept": ["yes"],
            "space_bound": 3,
            "input": "001",
            "transitions": [
                {"state": "scan", "read": 0, "write": 0, "move": "R", "next": "scan"},
                {"state": "scan", "read": 1, "write": 1, "move": "R", "next": "yes"},
            ],
        }
    )
    f, b, z = pydantzig.compile_turing_machine(tm)
    assert f.decide_circuitvalue(b, z) == (pydantzig.simulate_turing_machine(tm) == "Accept")


if __name__ == "__main__":
    for check in (check_circuits, check_clock, check_construction, check_end_to_end, check_turing_machine):
        check()
        print(f"ok {check.__name__}")
    print("pydantzig smoke test passed")
