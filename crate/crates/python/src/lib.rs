//! Python bindings for dantzig-lab.
//!
//! Exposes circuits, the Const(C) construction with its runs and audits,
//! and the decision procedures. Exact fractions cross the boundary
//! as `"p/q"` strings (`fractions.Fraction` parses them), and reports cross
//! as plain dicts decoded from the library's JSON.
//!
//! Usage from Python:
//!
//! ```python
//! import pydantzig
//! f = pydantzig.Circuit.builtin("rotation")
//! report = pydantzig.end_to_end(f, "11", 1)
//! assert report["passed"]
//! ```

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dantzig_lab::circuit::{self, library, BitString, CircuitError, TuringMachine};
use dantzig_lab::construction::{
    build_construction_z, build_from_function, gate_state_name, initial_policy, AlphaMode, ConstructionError,
    ConstructionIndex, ConstructionParams, Manifest, Overrides, WMode,
};
use dantzig_lab::lp::check_pi_simplex_equivalence;
use dantzig_lab::mdp::{
    decide_action_switch, decide_dantzig_mdp_sol, default_budget, run_policy_iteration, Mdp, MdpError, PiOptions,
    TieBreak,
};
use dantzig_lab::verify::{self, EndToEndOptions, VerifyError};
use dantzig_lab::Rational;

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl ToString) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn from_circuit(e: CircuitError) -> PyErr {
    value_error(e)
}

fn from_construction(e: ConstructionError) -> PyErr {
    match e {
        ConstructionError::InvalidParameter(_)
        | ConstructionError::LengthMismatch { .. }
        | ConstructionError::NotNormalized
        | ConstructionError::Circuit(_) => value_error(e),
        _ => runtime_error(e),
    }
}

fn from_mdp(e: MdpError) -> PyErr {
    runtime_error(e)
}

fn from_verify(e: VerifyError) -> PyErr {
    match e {
        VerifyError::Circuit(_) => value_error(e),
        VerifyError::Construction(inner) => from_construction(inner),
        _ => runtime_error(e),
    }
}

fn parse_bits(text: &str) -> PyResult<BitString> {
    text.parse().map_err(from_circuit)
}

fn parse_tie(text: &str) -> PyResult<TieBreak> {
    text.parse().map_err(value_error)
}

fn parse_w_mode(text: &str) -> PyResult<WMode> {
    text.parse().map_err(value_error)
}

fn parse_rational(text: Option<&str>) -> PyResult<Option<Rational>> {
    text.map(|t| t.parse().map_err(value_error)).transpose()
}

/// Decodes a JSON document into Python objects with the `json` module.
fn to_python<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn overrides(alpha: &str, bl: Option<&str>, ro: Option<&str>, magic: Option<&str>) -> PyResult<Overrides> {
    Ok(Overrides {
        alpha: alpha.parse::<AlphaMode>().map_err(value_error)?,
        bl: parse_rational(bl)?,
        ro: parse_rational(ro)?,
        magic: parse_rational(magic)?,
        ..Overrides::default()
    })
}

/// A Boolean circuit of OR and NOT gates whose last `n` gates are the outputs.
#[pyclass(name = "Circuit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCircuit {
    inner: circuit::Circuit,
}

#[pymethods]
impl PyCircuit {
    /// A library circuit: "rotation", "or-latch", "and-shift",
    /// "twisted-shift3", "identity:n=K", "bitwise-not:n=K", "counter:n=K".
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(PyCircuit { inner: library::builtin(name).map_err(from_circuit)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyCircuit { inner: circuit::Circuit::from_json(text).map_err(from_circuit)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn is_normalized(&self) -> bool {
        self.inner.is_normalized()
    }

    /// `F(B)` as a bit string, bit 1 first.
    fn apply(&self, bits: &str) -> PyResult<String> {
        Ok(self.inner.apply(&parse_bits(bits)?).map_err(from_circuit)?.to_string())
    }

    /// `B, F(B), …, F^{2^n}(B)`.
    fn orbit(&self, bits: &str) -> PyResult<Vec<String>> {
        let orbit = circuit::orbit(&self.inner, &parse_bits(bits)?).map_err(from_circuit)?;
        Ok(orbit.iter().map(ToString::to_string).collect())
    }

    /// The normalized circuit with every output inverted.
    fn negated_form(&self) -> Self {
        PyCircuit { inner: circuit::negated_form(&self.inner) }
    }

    fn decide_bitswitch(&self, bits: &str, z: usize) -> PyResult<bool> {
        circuit::decide_bitswitch(&self.inner, &parse_bits(bits)?, z).map_err(from_circuit)
    }

    fn decide_circuitvalue(&self, bits: &str, z: usize) -> PyResult<bool> {
        circuit::decide_circuitvalue(&self.inner, &parse_bits(bits)?, z).map_err(from_circuit)
    }

    fn __repr__(&self) -> String {
        format!("Circuit(n={}, gates={})", self.inner.n(), self.inner.len())
    }
}

/// The outcome of one policy-iteration run.
#[pyclass(name = "RunResult", frozen, get_all)]
struct PyRunResult {
    switches: usize,
    optimal: bool,
    /// One JSON object per switch.
    trace_jsonl: String,
    /// State name to the label of the action chosen there.
    final_policy: Vec<(String, String)>,
    /// State name to its exact value as `"p/q"`.
    values: Vec<(String, String)>,
}

/// The MDP `Const(C)` for a circuit `F` (built from its negated form), or
/// `Const(C, z)` when a bit index is given.
#[pyclass(name = "Construction", frozen)]
struct PyConstruction {
    circuit: circuit::Circuit,
    overrides: Overrides,
    m: Mdp,
    idx: ConstructionIndex,
    params: ConstructionParams,
}

#[pymethods]
impl PyConstruction {
    /// Builds `Const(C)`; with `z` (and the input `bits`, used for the exact
    /// `W`) builds `Const(C, z)` instead.
    #[new]
    #[pyo3(signature = (f, z=None, bits=None, w_mode="exact", alpha="calibrated", bl=None, ro=None, magic=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        f: &PyCircuit,
        z: Option<usize>,
        bits: Option<&str>,
        w_mode: &str,
        alpha: &str,
        bl: Option<&str>,
        ro: Option<&str>,
        magic: Option<&str>,
    ) -> PyResult<Self> {
        let ov = overrides(alpha, bl, ro, magic)?;
        let (c, m, idx, params) = match z {
            None => build_from_function(&f.inner, &ov).map_err(from_construction)?,
            Some(z) => {
                let b = match bits {
                    Some(t) => parse_bits(t)?,
                    None => BitString::new(vec![true; f.inner.n()]),
                };
                let c = circuit::negated_form(&f.inner);
                let (m, idx, params) =
                    build_construction_z(&c, &b, z, &ov, parse_w_mode(w_mode)?).map_err(from_construction)?;
                (c, m, idx, params)
            }
        };
        Ok(PyConstruction { circuit: c, overrides: ov, m, idx, params })
    }

    #[getter]
    fn n(&self) -> usize {
        self.idx.n()
    }

    #[getter]
    fn state_count(&self) -> usize {
        self.m.state_count()
    }

    #[getter]
    fn action_count(&self) -> usize {
        self.m.action_count()
    }

    /// The clock scale `T` as `"p/q"`.
    #[getter]
    fn t(&self) -> String {
        self.params.t.to_string()
    }

    fn state_names(&self) -> Vec<String> {
        self.m.state_names().to_vec()
    }

    /// Every derived constant.
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.params)
    }

    /// The reproducible manifest (circuit, overrides, constants, index, MDP).
    fn manifest<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &Manifest::new(&self.circuit, &self.overrides, &self.m, &self.idx, &self.params))
    }

    /// The initial policy for input `bits`, as state name to action label.
    fn initial_policy(&self, bits: &str) -> PyResult<Vec<(String, String)>> {
        let sigma = initial_policy(&self.m, &self.idx, &parse_bits(bits)?).map_err(from_construction)?;
        Ok((0..self.m.state_count())
            .map(|s| (self.m.state_name(s).to_string(), self.m.action(sigma.get(s)).label.clone()))
            .collect())
    }

    /// Runs Dantzig's rule from the initial policy for `bits`.
    #[pyo3(signature = (bits, tie="lowest", budget=None))]
    fn run(&self, py: Python<'_>, bits: &str, tie: &str, budget: Option<usize>) -> PyResult<PyRunResult> {
        let sigma = initial_policy(&self.m, &self.idx, &parse_bits(bits)?).map_err(from_construction)?;
        let opts = PiOptions::new(
            parse_tie(tie)?,
            budget.unwrap_or_else(|| default_budget(self.idx.n(), self.m.state_count())),
        );
        let out = py.detach(|| run_policy_iteration(&self.m, &sigma, &opts, &mut [])).map_err(from_mdp)?;
        let m = &self.m;
        Ok(PyRunResult {
            switches: out.trace.len(),
            optimal: out.optimal,
            trace_jsonl: out.trace.to_jsonl(m),
            final_policy: (0..m.state_count())
                .map(|s| (m.state_name(s).to_string(), m.action(out.policy.get(s)).label.clone()))
                .collect(),
            values: (0..m.state_count()).map(|s| (m.state_name(s).to_string(), out.values[s].to_string())).collect(),
        })
    }

    /// Audits the run from `bits` against the appeal catalog.
    #[pyo3(signature = (bits, tie="lowest"))]
    fn audit_catalog<'py>(&self, py: Python<'py>, bits: &str, tie: &str) -> PyResult<Bound<'py, PyAny>> {
        let sigma = initial_policy(&self.m, &self.idx, &parse_bits(bits)?).map_err(from_construction)?;
        let opts = PiOptions::new(parse_tie(tie)?, default_budget(self.idx.n(), self.m.state_count()));
        let report = py
            .detach(|| {
                verify::record_run(&self.m, &self.idx, &self.params, &sigma, &opts)
                    .map(|run| verify::audit_appeal_catalog(&self.m, &self.idx, &self.params, &run))
            })
            .map_err(from_verify)?;
        to_python(py, &report)
    }

    /// Checks every phase hand-over of the run from `bits`.
    #[pyo3(signature = (bits, tie="lowest"))]
    fn check_transitions<'py>(&self, py: Python<'py>, bits: &str, tie: &str) -> PyResult<Bound<'py, PyAny>> {
        let b = parse_bits(bits)?;
        let sigma = initial_policy(&self.m, &self.idx, &b).map_err(from_construction)?;
        let opts = PiOptions::new(parse_tie(tie)?, default_budget(self.idx.n(), self.m.state_count()));
        let reports = py
            .detach(|| {
                verify::record_run(&self.m, &self.idx, &self.params, &sigma, &opts)
                    .and_then(|run| verify::check_all_transitions(&self.m, &self.idx, &self.params, &self.circuit, &run, &b))
            })
            .map_err(from_verify)?;
        to_python(py, &reports)
    }

    /// Runs simplex and policy iteration side by side from `bits`.
    #[pyo3(signature = (bits, tie="lowest"))]
    fn check_equivalence<'py>(&self, py: Python<'py>, bits: &str, tie: &str) -> PyResult<Bound<'py, PyAny>> {
        let sigma = initial_policy(&self.m, &self.idx, &parse_bits(bits)?).map_err(from_construction)?;
        let tie = parse_tie(tie)?;
        let budget = default_budget(self.idx.n(), self.m.state_count());
        let report = py
            .detach(|| check_pi_simplex_equivalence(&self.m, self.idx.clock.si, &sigma, tie, budget))
            .map_err(runtime_error)?;
        to_python(py, &report)
    }

    /// ActionSwitch: does Dantzig's rule from `bits` ever switch `o0_z → r0_z`?
    #[pyo3(signature = (bits, z, tie="lowest"))]
    fn decide_action_switch(&self, py: Python<'_>, bits: &str, z: usize, tie: &str) -> PyResult<bool> {
        let sigma = initial_policy(&self.m, &self.idx, &parse_bits(bits)?).map_err(from_construction)?;
        if z == 0 || z > self.idx.n() {
            return Err(value_error(format!("bit index {z} outside 1..={}", self.idx.n())));
        }
        let a = self
            .m
            .find_action(self.idx.o(z, 0), &gate_state_name('r', 0, z))
            .ok_or_else(|| runtime_error(format!("o0_{z} has no action to r0_{z}")))?;
        let opts = PiOptions::new(parse_tie(tie)?, default_budget(self.idx.n(), self.m.state_count()));
        py.detach(|| decide_action_switch(&self.m, &sigma, a, &opts)).map_err(from_mdp)
    }

    /// DantzigMdpSol on `Const(C, z)`: does the policy found from `bits` use
    /// `o0_z → r0_z`? Needs a construction built with `z`.
    #[pyo3(signature = (bits, tie="lowest"))]
    fn decide_dantzig_mdp_sol(&self, py: Python<'_>, bits: &str, tie: &str) -> PyResult<bool> {
        let t = self.idx.terminal.as_ref().ok_or_else(|| value_error("construction was built without z"))?;
        let sigma = initial_policy(&self.m, &self.idx, &parse_bits(bits)?).map_err(from_construction)?;
        let opts = PiOptions::new(parse_tie(tie)?, default_budget(self.idx.n(), self.m.state_count()));
        py.detach(|| decide_dantzig_mdp_sol(&self.m, &sigma, t.o_to_r, &opts)).map_err(from_mdp)
    }

    fn __repr__(&self) -> String {
        format!(
            "Construction(n={}, states={}, actions={}, terminal={})",
            self.idx.n(),
            self.m.state_count(),
            self.m.action_count(),
            self.idx.terminal.is_some()
        )
    }
}

/// Runs the standalone clock and checks it against the Gray-code oracle.
#[pyfunction]
#[pyo3(signature = (n, alpha="calibrated", tie="lowest"))]
fn clock_check<'py>(py: Python<'py>, n: usize, alpha: &str, tie: &str) -> PyResult<Bound<'py, PyAny>> {
    let ov = overrides(alpha, None, None, None)?;
    let tie = parse_tie(tie)?;
    let report = py.detach(|| verify::run_clock_check(n, &ov, tie)).map_err(from_verify)?;
    to_python(py, &report)
}

/// `g(j)` for the `n`-bit clock, clock state 1 first.
#[pyfunction]
fn gray_code(n: usize, j: u64) -> String {
    verify::gray_code(n, j).to_string()
}

/// Scaled clock values after `j` switches.
#[pyfunction]
fn clock_expected_values<'py>(py: Python<'py>, n: usize, j: u64) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &verify::clock_expected_values(n, j))
}

/// Full pipeline on `(F, B, z)`: phases, ActionSwitch, DantzigMdpSol under
/// both `W` modes, and the circuit oracles.
#[pyfunction]
#[pyo3(signature = (f, bits, z, tie="lowest", budget=None))]
fn end_to_end<'py>(
    py: Python<'py>,
    f: &PyCircuit,
    bits: &str,
    z: usize,
    tie: &str,
    budget: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let b = parse_bits(bits)?;
    let opts = EndToEndOptions { tie: parse_tie(tie)?, budget, ..EndToEndOptions::default() };
    let report = py.detach(|| verify::end_to_end(&f.inner, &b, z, &opts)).map_err(from_verify)?;
    to_python(py, &report)
}

/// Compiles a Turing machine (JSON) into `(F, B, z)`; the machine accepts
/// exactly when `F.decide_circuitvalue(B, z)` holds.
#[pyfunction]
fn compile_turing_machine(text: &str) -> PyResult<(PyCircuit, String, usize)> {
    let tm = TuringMachine::from_json(text).map_err(from_circuit)?;
    let input: Vec<bool> = tm.input.as_ref().map(|b| b.iter().collect()).unwrap_or_default();
    let (f, b, z) = circuit::compile_turing_machine(&tm, &input, tm.space_bound).map_err(from_circuit)?;
    Ok((PyCircuit { inner: f }, b.to_string(), z))
}

/// Direct simulation of a Turing machine (JSON): "Accept", "Reject" or "Loops".
#[pyfunction]
fn simulate_turing_machine(text: &str) -> PyResult<String> {
    let tm = TuringMachine::from_json(text).map_err(from_circuit)?;
    let input: Vec<bool> = tm.input.as_ref().map(|b| b.iter().collect()).unwrap_or_default();
    let verdict = circuit::simulate(&tm, &input, tm.space_bound).map_err(from_circuit)?;
    Ok(format!("{verdict:?}"))
}

#[pymodule]
fn pydantzig(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyConstruction>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(clock_check, m)?)?;
    m.add_function(wrap_pyfunction!(gray_code, m)?)?;
    m.add_function(wrap_pyfunction!(clock_expected_values, m)?)?;
    m.add_function(wrap_pyfunction!(end_to_end, m)?)?;
    m.add_function(wrap_pyfunction!(compile_turing_machine, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_turing_machine, m)?)?;
    Ok(())
}
