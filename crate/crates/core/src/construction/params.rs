//! The constants of the construction: the clock scale `T`, the depth weights
//! `b_k`, their partial sums `L_k` and `H_k`, the clock probabilities `α_i`,
//! and the gadget probabilities `p₁ … p₇`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ConstructionError;
use crate::circuit::Circuit;
use crate::numerics::Rational;

/// Which exponent to use in the clock probability `α_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AlphaMode {
    /// `α_i = (1/2 − 1/(4i)) · T⁻¹ · 2^{−f(i)}`; clock switches have appeal
    /// exactly `1/2 − 1/(4i)`.
    #[default]
    Calibrated,
    /// `α_i = (1/2 − 1/(4i)) · T⁻¹ · 2^{−(f(i)−1)}`; clock switches have
    /// appeal `1 − 1/(2i)`, outside the `[1/4, 1/2)` band.
    Printed,
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlphaMode::Calibrated => "calibrated",
            AlphaMode::Printed => "printed",
        })
    }
}

impl FromStr for AlphaMode {
    type Err = ConstructionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "calibrated" => Ok(AlphaMode::Calibrated),
            "printed" => Ok(AlphaMode::Printed),
            other => Err(ConstructionError::InvalidParameter(format!("unknown alpha mode '{other}'"))),
        }
    }
}

/// How to choose the weight `W` of the terminal gadget of `Const(C, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum WMode {
    /// The largest state value under the optimal policy of `Const(C)`,
    /// obtained by running policy iteration first.
    #[default]
    Exact,
    /// The analytic upper bound `T · 2^{n+2}`.
    Bound,
}

impl fmt::Display for WMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WMode::Exact => "exact",
            WMode::Bound => "bound",
        })
    }
}

impl FromStr for WMode {
    type Err = ConstructionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(WMode::Exact),
            "bound" => Ok(WMode::Bound),
            other => Err(ConstructionError::InvalidParameter(format!("unknown W mode '{other}'"))),
        }
    }
}

/// User-tunable knobs. Unset thresholds take the defaults
/// `bl = 31/10`, `ro = 1`, `magic = 3/25`, `rjprime = 33/10`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    pub alpha: AlphaMode,
    pub bl: Option<Rational>,
    pub ro: Option<Rational>,
    pub magic: Option<Rational>,
    pub rjprime: Option<Rational>,
}

/// Every derived constant, exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionParams {
    /// Number of clock bits (= circuit input bits).
    pub n: usize,
    /// Output depth `d(C)`.
    pub d_c: usize,
    /// `T = 3^{d(C)+6}`.
    pub t: Rational,
    /// `b_k = 3^{d(C)−k+2}` for `k = 0..=d(C)`.
    pub b: Vec<Rational>,
    /// `L_k = Σ_{m<k} b_m` for `k = 0..=d(C)+1`.
    pub l: Vec<Rational>,
    /// `H_k = Σ_{m≤k} b_m` for `k = 0..=d(C)`.
    pub h: Vec<Rational>,
    pub alpha_mode: AlphaMode,
    /// `α_i` for clock states `i = 1..=n` (entry `i − 1`).
    pub alpha: Vec<Rational>,
    /// NOT activation probability `p₁` per NOT depth `d ≥ 2`.
    pub p1: BTreeMap<usize, Rational>,
    /// NOT reset probability `p₂` per NOT depth `d ≥ 2`.
    pub p2: BTreeMap<usize, Rational>,
    pub p3: Rational,
    pub p4: Rational,
    pub p5: Rational,
    pub p6: Rational,
    pub p7: Rational,
    /// Probability of both `x` gadgets of an OR gate, `9/(10T)`.
    pub px: Rational,
    pub bl: Rational,
    pub ro: Rational,
    pub magic: Rational,
    pub rjprime: Rational,
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

impl ConstructionParams {
    /// Derives all constants for `n` clock bits and output depth `d_c`.
    pub fn new(n: usize, d_c: usize, ov: &Overrides) -> Result<Self, ConstructionError> {
        if n == 0 {
            return Err(ConstructionError::InvalidParameter("the clock needs n ≥ 1".into()));
        }
        let t = Rational::pow3((d_c + 6) as u32);
        let b: Vec<Rational> = (0..=d_c).map(|k| Rational::pow3((d_c - k + 2) as u32)).collect();
        let mut l = vec![Rational::zero()];
        for bk in &b {
            let next = l.last().expect("non-empty") + bk;
            l.push(next);
        }
        let h: Vec<Rational> = (0..=d_c).map(|k| &l[k] + &b[k]).collect();
        let half = r(1, 2);
        let alpha = (1..=n)
            .map(|i| {
                let f = (n - i + 1) as u32;
                let exp = match ov.alpha {
                    AlphaMode::Calibrated => f,
                    AlphaMode::Printed => f - 1,
                };
                (r(1, 2) - r(1, 4 * i as i64)) / &t / Rational::pow2(exp)
            })
            .collect();
        let bl = ov.bl.clone().unwrap_or_else(|| r(31, 10));
        let ro = ov.ro.clone().unwrap_or_else(Rational::one);
        let magic = ov.magic.clone().unwrap_or_else(|| r(3, 25));
        let rjprime = ov.rjprime.clone().unwrap_or_else(|| r(33, 10));
        let (h0, l0) = (h[0].clone(), l[0].clone());
        let (hd, ld) = (h[d_c].clone(), l[d_c].clone());
        let mid = (&hd + &ld) * &half;
        let three_half_t = &t * r(3, 2);
        let half_t = &t * &half;
        let p3 = &bl / (&three_half_t + &h0);
        let p4 = r(17, 5) / (&three_half_t + &h0 - &mid);
        let p5 = r(8, 5) / (&half_t + &mid - &h0);
        let p6 = r(16, 5) / (&three_half_t + &l0 - &hd);
        let p7 = &ro / (&half_t + &hd - &l0);
        let mut p1 = BTreeMap::new();
        let mut p2 = BTreeMap::new();
        for d in 2..=d_c {
            let below = &h[d - 1];
            p1.insert(d, (r(7, 2) + r(1, 2 * d as i64)) / below);
            p2.insert(d, r(19, 20) / (&t * Rational::integer(2) - below));
        }
        let px = r(9, 10) / &t;
        let params = ConstructionParams {
            n,
            d_c,
            t,
            b,
            l,
            h,
            alpha_mode: ov.alpha,
            alpha,
            p1,
            p2,
            p3,
            p4,
            p5,
            p6,
            p7,
            px,
            bl,
            ro,
            magic,
            rjprime,
        };
        params.check()?;
        Ok(params)
    }

    fn check(&self) -> Result<(), ConstructionError> {
        let bad = |what: String| Err(ConstructionError::InvalidParameter(what));
        if self.h[self.d_c] >= &self.t * r(1, 2) {
            return bad(format!("H_d(C) = {} is not below T/2", self.h[self.d_c]));
        }
        let unit = |p: &Rational| p.is_positive() && *p < Rational::one();
        let mut named: Vec<(String, &Rational)> = vec![
            ("p3".into(), &self.p3),
            ("p4".into(), &self.p4),
            ("p5".into(), &self.p5),
            ("p6".into(), &self.p6),
            ("p7".into(), &self.p7),
            ("px".into(), &self.px),
        ];
        for (i, a) in self.alpha.iter().enumerate() {
            named.push((format!("alpha_{}", i + 1), a));
        }
        for (d, p) in &self.p1 {
            named.push((format!("p1(d={d})"), p));
        }
        for (d, p) in &self.p2 {
            named.push((format!("p2(d={d})"), p));
        }
        for (name, p) in named {
            if !unit(p) {
                return bad(format!("{name} = {p} is not strictly inside (0, 1)"));
            }
        }
        Ok(())
    }

    /// `f(i) = n − i + 1`.
    pub fn f(&self, i: usize) -> usize {
        self.n - i + 1
    }

    /// `α_i` for clock state `i` (1-based).
    pub fn alpha(&self, i: usize) -> &Rational {
        &self.alpha[i - 1]
    }

    /// `p₁` for a NOT gate of depth `d`.
    pub fn p1(&self, d: usize) -> Result<&Rational, ConstructionError> {
        self.p1.get(&d).ok_or_else(|| ConstructionError::InvalidParameter(format!("no NOT gate can have depth {d}")))
    }

    /// `p₂` for a NOT gate of depth `d`.
    pub fn p2(&self, d: usize) -> Result<&Rational, ConstructionError> {
        self.p2.get(&d).ok_or_else(|| ConstructionError::InvalidParameter(format!("no NOT gate can have depth {d}")))
    }

    /// Clock-switch appeal `1/2 − 1/(4i)` that the calibrated `α_i` yields.
    pub fn clock_appeal(i: usize) -> Rational {
        r(1, 2) - r(1, 4 * i as i64)
    }

    /// NOT activation appeal `3.5 + 1/(2d)`.
    pub fn not_activation_appeal(d: usize) -> Rational {
        r(7, 2) + r(1, 2 * d as i64)
    }

    /// `(H_{d(C)} + L_{d(C)})/2`, the midpoint offset used by the input bits.
    pub fn mid(&self) -> Rational {
        (&self.h[self.d_c] + &self.l[self.d_c]) * r(1, 2)
    }
}

/// Derives the constants for a normalized circuit (its negated form, when
/// used for the reduction).
pub fn derive_params(c: &Circuit, ov: &Overrides) -> Result<ConstructionParams, ConstructionError> {
    if !c.is_normalized() {
        return Err(ConstructionError::NotNormalized);
    }
    let d_c = c.output_depth().ok_or(ConstructionError::NotNormalized)?;
    ConstructionParams::new(c.n(), d_c, ov)
}
