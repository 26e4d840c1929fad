//! Exact-arithmetic laboratory for Dantzig's rule.
//!
//! The crate compiles iterated boolean circuits into Markov decision
//! processes whose Dantzig-rule policy iteration (equivalently, simplex with
//! Dantzig's pivot rule on the matching linear program) simulates the circuit
//! one step per clock phase. Every quantity is an exact rational, and the
//! [`verify`] module audits each run against independent oracles.
//!
//! Module map:
//! - [`numerics`]: exact rationals and dense exact linear algebra.
//! - [`circuit`]: OR/NOT circuits, normalization, iteration oracles, and a
//!   Turing-machine compiler.
//! - [`mdp`]: MDP model, appeal reduction gadget, evaluation, policy iteration.
//! - [`construction`]: the clock and circuit gadgets wired into one MDP.
//! - [`lp`]: the primal LP of an MDP and a lockstep revised simplex.
//! - [`verify`]: clock, coherence and appeal-catalog audits plus phase-transition checks.

pub mod circuit;
pub mod construction;
pub mod lp;
pub mod mdp;
pub mod numerics;
pub mod verify;

pub use numerics::Rational;
