//! The primal linear program of an MDP and a revised simplex method with
//! Dantzig's pivot rule, run in lockstep with policy iteration.
//!
//! Rows are the non-sink states `S̄` and columns are all actions. The column
//! of an action `a` at state `s` holds `[row = s] − p(row, a)`, its objective
//! coefficient is `r(a)`, and every right-hand side is `1/|S̄|`. A policy
//! selects one column per row and so determines a basis. Basis inverses are
//! recomputed from scratch by exact elimination at every pivot, which keeps
//! the simplex route independent of the component-wise policy evaluation
//! used by policy iteration.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::One;
use petgraph::algo::toposort;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{appeals, dantzig_step, evaluate_values, ActionId, Mdp, MdpError, Policy, StateId, Step, TieBreak, TieBreaker};
use crate::numerics::{inverse, Matrix, NumericsError, Rational};

/// Errors raised by the LP layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("state {0} is not an absorbing zero-reward sink")]
    NoSink(String),
    #[error("singular basis: {0}")]
    SingularBasis(String),
    #[error("entering column {entering} has no positive direction entry")]
    UnboundedDirection { entering: ActionId },
    #[error("ratio test for entering column {entering} is tied between rows {rows:?}")]
    DegenerateLeaving { entering: ActionId, rows: Vec<usize> },
    #[error("entering column {entering} evicted column {leaving} instead of {expected}")]
    LeavingMismatch { entering: ActionId, leaving: ActionId, expected: ActionId },
    #[error("simplex and policy iteration diverge at iteration {iteration}: {detail}")]
    EquivalenceViolation { iteration: usize, detail: String },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The primal LP `max cᵀx s.t. Ax = b, x ≥ 0` of an MDP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    /// The excluded sink.
    pub sink: StateId,
    /// `rows[k]` is the state of row `k`, in increasing state order.
    pub rows: Vec<StateId>,
    /// `row_of[s]` is the row of state `s` (`None` for the sink).
    pub row_of: Vec<Option<usize>>,
    /// Owning state of every column; column ids equal action ids.
    pub column_state: Vec<StateId>,
    pub a: Matrix,
    pub b: Vec<Rational>,
    pub c: Vec<Rational>,
}

impl LinearProgram {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_count(&self) -> usize {
        self.c.len()
    }

    /// Objective `cᵀx` of a basic solution.
    pub fn objective(&self, basis: &Basis) -> Rational {
        basis.columns.iter().zip(&basis.x).map(|(&col, x)| &self.c[col] * x).sum()
    }

    /// The LP in the common text LP format. Every constraint row and the
    /// objective are scaled by the least common multiple of their
    /// denominators, so all coefficients are exact integers; the feasible set
    /// and the optimal basis are unchanged.
    pub fn to_lp_format(&self, m: &Mdp) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "\\ primal LP: {} rows, {} columns", self.row_count(), self.column_count());
        for col in 0..self.column_count() {
            let _ = writeln!(out, "\\ x{col}: {}", m.describe_action(col));
        }
        let scale_c = lcm_of_denominators(self.c.iter());
        let _ = writeln!(out, "Maximize");
        out.push_str(" obj:");
        out.push_str(&linear_terms((0..self.column_count()).map(|col| (col, &self.c[col] * &scale_c))));
        out.push('\n');
        let _ = writeln!(out, "Subject To");
        for (k, &s) in self.rows.iter().enumerate() {
            let row = self.a.row(k);
            let scale = lcm_of_denominators(row.iter().chain(std::iter::once(&self.b[k])));
            let terms = linear_terms(row.iter().enumerate().map(|(col, v)| (col, v * &scale)));
            let rhs = &self.b[k] * &scale;
            let _ = writeln!(out, " s{s}:{terms} = {}", rhs.numer());
        }
        let _ = writeln!(out, "End");
        out
    }
}

fn lcm_of_denominators<'a>(values: impl Iterator<Item = &'a Rational>) -> Rational {
    let mut l = BigInt::one();
    for v in values {
        l = num_integer::Integer::lcm(&l, v.denom());
    }
    Rational::from_bigints(l, BigInt::one()).expect("nonzero denominator")
}

fn linear_terms(terms: impl Iterator<Item = (usize, Rational)>) -> String {
    let mut out = String::new();
    let mut any = false;
    for (col, v) in terms {
        if v.is_zero() {
            continue;
        }
        let sign = if v.is_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} x{col}", v.abs().numer());
        any = true;
    }
    if !any {
        out.push_str(" 0 x0");
    }
    out
}

/// Builds the primal LP of `m` with `sink` removed from the rows.
pub fn mdp_to_primal(m: &Mdp, sink: StateId) -> Result<LinearProgram, LpError> {
    if sink >= m.state_count() || !m.is_absorbing_sink(sink) {
        let name = if sink < m.state_count() { m.state_name(sink).to_string() } else { format!("#{sink}") };
        return Err(LpError::NoSink(name));
    }
    m.validate()?;
    let rows: Vec<StateId> = (0..m.state_count()).filter(|&s| s != sink).collect();
    let mut row_of = vec![None; m.state_count()];
    for (k, &s) in rows.iter().enumerate() {
        row_of[s] = Some(k);
    }
    let cols = m.action_count();
    let mut a = Matrix::zeros(rows.len(), cols);
    let mut c = Vec::with_capacity(cols);
    let mut column_state = Vec::with_capacity(cols);
    for (col, act) in m.actions().iter().enumerate() {
        if let Some(k) = row_of[act.state] {
            a.set(k, col, Rational::one());
        }
        for (t, p) in &act.transitions {
            if let Some(k) = row_of[*t] {
                let cur = a.get(k, col).clone();
                a.set(k, col, cur - p);
            }
        }
        c.push(act.reward.clone());
        column_state.push(act.state);
    }
    let b = vec![Rational::new(1, rows.len() as i64); rows.len()];
    Ok(LinearProgram { sink, rows, row_of, column_state, a, b, c })
}

/// A basis: one column per row, with its matrix and exact inverse plus the basic
/// solution `x_B = B⁻¹b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    /// `columns[k]` is the basic column at position `k`.
    pub columns: Vec<ActionId>,
    pub matrix: Matrix,
    pub inverse: Matrix,
    pub x: Vec<Rational>,
}

impl Basis {
    /// Builds a basis from explicit columns.
    pub fn new(lp: &LinearProgram, columns: Vec<ActionId>) -> Result<Self, LpError> {
        let n = lp.row_count();
        if columns.len() != n {
            return Err(LpError::SingularBasis(format!("{} columns for {} rows", columns.len(), n)));
        }
        let mut matrix = Matrix::zeros(n, n);
        for (k, &col) in columns.iter().enumerate() {
            for r in 0..n {
                matrix.set(r, k, lp.a.get(r, col).clone());
            }
        }
        let inv = inverse(&matrix).map_err(|e| match e {
            NumericsError::SingularMatrix { column } => {
                LpError::SingularBasis(format!("basis column {column} (action {}) is dependent", columns[column]))
            }
            other => LpError::Numerics(other),
        })?;
        let x = inv.mul_vec(&lp.b)?;
        Ok(Basis { columns, matrix, inverse: inv, x })
    }

    /// Whether `x_B ≥ 0`.
    pub fn is_feasible(&self) -> bool {
        self.x.iter().all(|v| !v.is_negative())
    }

    /// Whether rows and columns can be permuted simultaneously to make the
    /// basis matrix triangular with a nonzero diagonal.
    pub fn is_triangular_permutable(&self) -> bool {
        let n = self.columns.len();
        let mut g = DiGraph::<(), ()>::with_capacity(n, n * 2);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for k in 0..n {
            if self.matrix.get(k, k).is_zero() {
                return false;
            }
            for r in 0..n {
                if r != k && !self.matrix.get(r, k).is_zero() {
                    g.add_edge(nodes[k], nodes[r], ());
                }
            }
        }
        toposort(&g, None).is_ok()
    }
}

/// The basis `B(σ)` of the columns chosen by `sigma`, in row order.
pub fn basis_from_policy(lp: &LinearProgram, sigma: &Policy) -> Result<Basis, LpError> {
    Basis::new(lp, lp.rows.iter().map(|&s| sigma.get(s)).collect())
}

/// Dual solution `y = B⁻ᵀ c_B` (indexed by row) and reduced costs
/// `c̄ = c − Aᵀy` for every column.
pub fn dual_and_reduced_costs(lp: &LinearProgram, basis: &Basis) -> (Vec<Rational>, Vec<Rational>) {
    let n = lp.row_count();
    let c_b: Vec<Rational> = basis.columns.iter().map(|&col| lp.c[col].clone()).collect();
    let y: Vec<Rational> = (0..n)
        .map(|r| (0..n).filter(|&k| !basis.inverse.get(k, r).is_zero()).map(|k| basis.inverse.get(k, r) * &c_b[k]).sum())
        .collect();
    let reduced = (0..lp.column_count())
        .map(|col| {
            let mut v = lp.c[col].clone();
            for (r, yr) in y.iter().enumerate() {
                let entry = lp.a.get(r, col);
                if !entry.is_zero() {
                    v -= entry * yr;
                }
            }
            v
        })
        .collect();
    (y, reduced)
}

/// Result of one simplex pivot.
#[derive(Debug, Clone)]
pub enum Pivot {
    Optimal,
    Moved { basis: Basis, entering: ActionId, leaving: ActionId, reduced_cost: Rational },
}

/// Chooses the column of maximal positive reduced cost, ties broken by
/// `tie` over `(state, column)` pairs.
pub fn choose_entering(lp: &LinearProgram, reduced: &[Rational], tie: &mut TieBreaker) -> Option<(ActionId, Rational)> {
    let best = reduced.iter().filter(|v| v.is_positive()).max()?.clone();
    let candidates: Vec<(StateId, ActionId)> =
        (0..reduced.len()).filter(|&col| reduced[col] == best).map(|col| (lp.column_state[col], col)).collect();
    tie.pick(candidates).map(|(_, col)| (col, best))
}

/// One revised-simplex pivot under Dantzig's rule.
pub fn simplex_dantzig_step(lp: &LinearProgram, basis: &Basis, tie: &mut TieBreaker) -> Result<Pivot, LpError> {
    let (_, reduced) = dual_and_reduced_costs(lp, basis);
    let Some((entering, reduced_cost)) = choose_entering(lp, &reduced, tie) else {
        return Ok(Pivot::Optimal);
    };
    let column = lp.a.column(entering);
    let d = basis.inverse.mul_vec(&column)?;
    let mut best: Option<Rational> = None;
    let mut rows: Vec<usize> = Vec::new();
    for (k, dk) in d.iter().enumerate() {
        if !dk.is_positive() {
            continue;
        }
        let ratio = &basis.x[k] / dk;
        match best.as_ref().map(|b| ratio.cmp(b)) {
            None | Some(std::cmp::Ordering::Less) => {
                best = Some(ratio);
                rows = vec![k];
            }
            Some(std::cmp::Ordering::Equal) => rows.push(k),
            Some(std::cmp::Ordering::Greater) => {}
        }
    }
    match rows.len() {
        0 => return Err(LpError::UnboundedDirection { entering }),
        1 => {}
        _ => return Err(LpError::DegenerateLeaving { entering, rows }),
    }
    let pos = rows[0];
    let leaving = basis.columns[pos];
    let state = lp.column_state[entering];
    let expected = basis.columns[lp.row_of[state].expect("entering column belongs to a non-sink state")];
    if leaving != expected {
        return Err(LpError::LeavingMismatch { entering, leaving, expected });
    }
    let mut columns = basis.columns.clone();
    columns[pos] = entering;
    let next = Basis::new(lp, columns)?;
    Ok(Pivot::Moved { basis: next, entering, leaving, reduced_cost })
}

/// Checks made at one lockstep iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCheck {
    pub iteration: usize,
    /// The simplex basis equals `B(σ_k)`.
    pub basis_matches: bool,
    /// `y = val^{σ_k}` on every non-sink state.
    pub duals_match_values: bool,
    /// `c̄(a) = appeal^{σ_k}(a)` for every action.
    pub reduced_costs_match_appeals: bool,
    /// Both solvers choose the same action, or both declare optimality.
    pub entering_matches: bool,
    pub feasible: bool,
    pub objective: Rational,
}

impl IterationCheck {
    pub fn passed(&self) -> bool {
        self.basis_matches && self.duals_match_values && self.reduced_costs_match_appeals && self.entering_matches && self.feasible
    }
}

/// Per-iteration lockstep comparison of simplex and policy iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub tie: TieBreak,
    pub pivots: usize,
    pub iterations: Vec<IterationCheck>,
    pub first_divergence: Option<usize>,
    /// `cᵀx` never decreases from one basis to the next.
    pub objective_monotone: bool,
    /// The dual of the final basis satisfies every dual constraint.
    pub final_dual_feasible: bool,
    pub equivalent: bool,
}

impl EquivalenceReport {
    /// Turns a failed report into [`LpError::EquivalenceViolation`].
    pub fn ensure(&self) -> Result<(), LpError> {
        if self.equivalent {
            return Ok(());
        }
        let iteration = self.first_divergence.unwrap_or(self.pivots);
        let detail = match self.iterations.get(iteration) {
            Some(c) => format!(
                "basis {} duals {} reduced costs {} entering {} feasible {}",
                c.basis_matches, c.duals_match_values, c.reduced_costs_match_appeals, c.entering_matches, c.feasible
            ),
            None if !self.objective_monotone => "objective decreased".into(),
            None => "final dual infeasible".into(),
        };
        Err(LpError::EquivalenceViolation { iteration, detail })
    }
}

/// Runs simplex (from `B(σ₀)`) and policy iteration (from `σ₀`) side by side
/// with independent tie-breakers built from the same rule, comparing bases,
/// duals, reduced costs and entering choices at every iteration. Stops at the
/// first divergence, at optimality, or after `budget` pivots.
pub fn check_pi_simplex_equivalence(
    m: &Mdp,
    sink: StateId,
    sigma0: &Policy,
    tie: TieBreak,
    budget: usize,
) -> Result<EquivalenceReport, LpError> {
    let lp = mdp_to_primal(m, sink)?;
    let mut pi_tie = TieBreaker::new(tie);
    let mut lp_tie = TieBreaker::new(tie);
    let mut sigma = sigma0.clone();
    let mut basis = basis_from_policy(&lp, &sigma)?;
    let mut iterations = Vec::new();
    let mut objective_monotone = true;
    let mut last_objective: Option<Rational> = None;
    let mut first_divergence = None;
    let mut final_dual_feasible = false;
    loop {
        let k = iterations.len();
        let values = evaluate_values(m, &sigma)?;
        let ap = appeals(m, &sigma, &values);
        let (y, reduced) = dual_and_reduced_costs(&lp, &basis);
        let expected_basis: Vec<ActionId> = lp.rows.iter().map(|&s| sigma.get(s)).collect();
        let basis_matches = expected_basis == basis.columns;
        let duals_match_values = lp.rows.iter().zip(&y).all(|(&s, ys)| values[s] == *ys) && values[sink].is_zero();
        let reduced_costs_match_appeals = reduced == ap;
        let objective = lp.objective(&basis);
        if let Some(prev) = &last_objective {
            if objective < *prev {
                objective_monotone = false;
            }
        }
        last_objective = Some(objective.clone());
        let pi_step = dantzig_step(m, &sigma, &mut pi_tie)?;
        let lp_step = if k < budget { Some(simplex_dantzig_step(&lp, &basis, &mut lp_tie)?) } else { None };
        let entering_matches = match (&pi_step, &lp_step) {
            (Step::Optimal, Some(Pivot::Optimal)) => true,
            (Step::Switched { event, .. }, Some(Pivot::Moved { entering, leaving, .. })) => {
                event.new_action == *entering && event.old_action == *leaving
            }
            (_, None) => true,
            _ => false,
        };
        let check = IterationCheck {
            iteration: k,
            basis_matches,
            duals_match_values,
            reduced_costs_match_appeals,
            entering_matches,
            feasible: basis.is_feasible(),
            objective,
        };
        let passed = check.passed();
        iterations.push(check);
        if !passed {
            first_divergence = Some(k);
            break;
        }
        match (pi_step, lp_step) {
            (Step::Switched { policy, .. }, Some(Pivot::Moved { basis: next, .. })) => {
                sigma = policy;
                basis = next;
            }
            (Step::Optimal, _) => {
                final_dual_feasible = reduced.iter().all(|v| !v.is_positive());
                break;
            }
            _ => break,
        }
    }
    let pivots = iterations.len().saturating_sub(1);
    let equivalent = first_divergence.is_none() && objective_monotone && final_dual_feasible;
    Ok(EquivalenceReport { tie, pivots, iterations, first_divergence, objective_monotone, final_dual_feasible, equivalent })
}

/// Sorted set of the basic columns, for order-insensitive comparisons.
pub fn basis_set(basis: &Basis) -> BTreeSet<ActionId> {
    basis.columns.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn sink(m: &mut Mdp) -> StateId {
        let si = m.add_state("si").unwrap();
        m.add_edge(si, si, Rational::zero()).unwrap();
        si
    }

    #[test]
    fn one_state_two_actions() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let s = m.add_state("s").unwrap();
        m.add_edge(s, si, Rational::integer(1)).unwrap();
        m.add_action(s, Rational::integer(2), vec![(si, r(1, 2)), (s, r(1, 2))], "half").unwrap();
        let lp = mdp_to_primal(&m, si).unwrap();
        assert_eq!((lp.row_count(), lp.column_count()), (1, 3));
        assert_eq!(lp.a.row(0), &[Rational::zero(), Rational::one(), r(1, 2)]);
        assert_eq!(lp.b, vec![Rational::one()]);
        let sigma = Policy::first_actions(&m).unwrap();
        let report = check_pi_simplex_equivalence(&m, si, &sigma, TieBreak::default(), 10).unwrap();
        assert!(report.equivalent, "{report:?}");
        assert_eq!(report.pivots, 1);
    }

    #[test]
    fn gadget_column_entry_is_its_probability() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let s = m.add_state("s").unwrap();
        m.add_edge(s, si, Rational::zero()).unwrap();
        let g = crate::mdp::add_gadget(&mut m, s, si, Rational::zero(), Rational::one(), r(2, 7)).unwrap();
        let lp = mdp_to_primal(&m, si).unwrap();
        let row = lp.row_of[s].unwrap();
        assert_eq!(lp.a.get(row, g), &r(2, 7));
    }

    #[test]
    fn reduced_costs_are_appeals() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let a = m.add_state("a").unwrap();
        let b = m.add_state("b").unwrap();
        m.add_edge(a, si, Rational::integer(1)).unwrap();
        m.add_edge(a, b, Rational::integer(0)).unwrap();
        m.add_edge(b, si, Rational::integer(5)).unwrap();
        m.add_action(b, Rational::integer(1), vec![(a, r(1, 3)), (si, r(2, 3))], "mix").unwrap();
        let sigma = Policy::first_actions(&m).unwrap();
        let lp = mdp_to_primal(&m, si).unwrap();
        let basis = basis_from_policy(&lp, &sigma).unwrap();
        assert!(basis.is_feasible() && basis.is_triangular_permutable());
        let (y, red) = dual_and_reduced_costs(&lp, &basis);
        let v = evaluate_values(&m, &sigma).unwrap();
        assert_eq!(y, vec![v[a].clone(), v[b].clone()]);
        assert_eq!(red, appeals(&m, &sigma, &v));
        for &col in &basis.columns {
            assert!(red[col].is_zero());
        }
    }

    #[test]
    fn deterministic_two_cycle_is_singular() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let a = m.add_state("a").unwrap();
        let b = m.add_state("b").unwrap();
        m.add_edge(a, si, Rational::zero()).unwrap();
        let ab = m.add_edge(a, b, Rational::zero()).unwrap();
        m.add_edge(b, a, Rational::zero()).unwrap();
        let mut sigma = Policy::first_actions(&m).unwrap();
        sigma.switch_to(&m, ab);
        let lp = mdp_to_primal(&m, si).unwrap();
        assert!(matches!(basis_from_policy(&lp, &sigma), Err(LpError::SingularBasis(_))));
    }

    #[test]
    fn non_sink_is_rejected() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let s = m.add_state("s").unwrap();
        m.add_edge(s, si, Rational::one()).unwrap();
        assert!(matches!(mdp_to_primal(&m, s), Err(LpError::NoSink(_))));
    }

    #[test]
    fn lp_format_has_integer_coefficients() {
        let mut m = Mdp::new();
        let si = sink(&mut m);
        let s = m.add_state("s").unwrap();
        m.add_edge(s, si, r(1, 3)).unwrap();
        m.add_action(s, Rational::integer(2), vec![(si, r(1, 2)), (s, r(1, 2))], "half").unwrap();
        let text = mdp_to_primal(&m, si).unwrap().to_lp_format(&m);
        assert!(text.contains("obj: + 1 x1 + 6 x2"), "{text}");
        assert!(text.contains("s1: + 2 x1 + 1 x2 = 2"), "{text}");
        assert!(!text.contains('.'));
    }
}
