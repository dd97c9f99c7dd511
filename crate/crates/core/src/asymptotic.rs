//! Second-order risk expansions E D[m : m̂] = c₁/n + c₂/n² + o(n⁻²).
//!
//! Every expansion shares c₁ = p/2; the schemes and kernels differ only in c₂.
//! The coefficient formulas live in [`coeffs`] and are generic over the scalar
//! type, so the same transcription runs in `f64` and in exact `BigRational`.
//!
//! Kernel derivatives enter only through f₃ = f'''(1) and f₄ = f''''(1); for the
//! α family the closed forms in [`coeffs`] are used directly, and the general
//! forms with f₃ = (α−3)/2, f₄ = (α−3)(α−5)/4 must agree with them.

use std::fmt;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::divergence::{ProbabilityVector, VectorKind};
use crate::{Error, ExtReal, Result};

/// Scalars the coefficient formulas can run in.
pub trait Scalar: Clone + Num + FromPrimitive + PartialOrd + fmt::Debug {}

impl<T: Clone + Num + FromPrimitive + PartialOrd + fmt::Debug> Scalar for T {}

/// Which kernel an expansion is for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum KernelKind<T = f64> {
    /// Any smooth f with f(1) = f'(1) = 0, f''(1) = 1.
    General { f3: T, f4: T },
    Alpha { alpha: T },
    /// The symmetrized ½(D_α + D_{−α}).
    AlphaSym { alpha: T },
}

/// The formula a [`RiskExpansion`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    /// Multinomial MLE on a fixed partition.
    FixedInterval,
    /// Order statistics at given ranks.
    MovingInterval,
    /// Order statistics under randomized ranks.
    MovingRandomized,
    /// r̄-free upper bound of the randomized expansion.
    MovingRandomizedUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub formula: Formula,
    pub kernel: KernelKind,
}

/// c₁/n + c₂/n², stored as coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskExpansion {
    pub p: usize,
    pub c1: f64,
    pub c2: ExtReal,
    pub provenance: Provenance,
}

impl RiskExpansion {
    fn new(p: usize, c2: ExtReal, formula: Formula, kernel: KernelKind) -> Self {
        RiskExpansion { p, c1: p as f64 / 2.0, c2, provenance: Provenance { formula, kernel } }
    }

    pub fn value(&self, n: f64) -> ExtReal {
        match self.c2 {
            ExtReal::Finite(c2) => ExtReal::Finite(self.c1 / n + c2 / (n * n)),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

/// Coefficient formulas, generic over [`Scalar`].
///
/// `m` holds the p + 1 cell probabilities. `r` is the gap list r₀ … r_{p+1}
/// with r₀ = 0 and r_{p+1} = 1. `rbar` holds r̄₁ … r̄_p.
pub mod coeffs {
    use super::Scalar;

    fn k<T: Scalar>(v: i64) -> T {
        T::from_i64(v).expect("small integers are representable")
    }

    fn dim<T: Scalar>(m: &[T]) -> T {
        k(m.len() as i64 - 1)
    }

    fn inv_sum<T: Scalar>(m: &[T]) -> T {
        m.iter().fold(T::zero(), |acc, x| acc + T::one() / x.clone())
    }

    pub fn m_statistic<T: Scalar>(m: &[T]) -> T {
        inv_sum(m)
    }

    /// f₃ = (α−3)/2 and f₄ = (α−3)(α−5)/4.
    pub fn alpha_derivatives<T: Scalar>(alpha: &T) -> (T, T) {
        let a3 = alpha.clone() - k(3);
        let a5 = alpha.clone() - k(5);
        (a3.clone() / k(2), a3 * a5 / k(4))
    }

    pub fn ed_i<T: Scalar>(f3: &T, f4: &T, p: usize, m_stat: &T) -> T {
        let p: T = k(p as i64);
        let a = k::<T>(4) * f3.clone() * (m_stat.clone() - k::<T>(3) * p.clone() - T::one());
        let b = k::<T>(3) * f4.clone() * (m_stat.clone() - k::<T>(2) * p - T::one());
        (a + b) / k(24)
    }

    pub fn ed_i_alpha<T: Scalar>(alpha: &T, p: usize, m_stat: &T) -> T {
        let a = alpha.clone();
        let p: T = k(p as i64);
        let lead = (a.clone() - k(3)) * (k::<T>(3) * a.clone() - k(7)) * (m_stat.clone() - T::one());
        let tail = k::<T>(6) * (a.clone() - k(3)) * (a - T::one()) * p;
        (lead - tail) / k(96)
    }

    pub fn ed_i_alpha_sym<T: Scalar>(alpha: &T, p: usize, m_stat: &T) -> T {
        let a2 = alpha.clone() * alpha.clone();
        let p: T = k(p as i64);
        let lead = (a2.clone() + k(7)) * (m_stat.clone() - T::one());
        let tail = k::<T>(2) * (a2 + k(3)) * p;
        (lead - tail) / k(32)
    }

    pub fn ed_p<T: Scalar>(f3: &T, f4: &T, m: &[T], r: &[T]) -> T {
        let p = dim(m);
        let (mut sq, mut lin) = (T::zero(), T::zero());
        for (i, mi) in m.iter().enumerate() {
            let d = r[i + 1].clone() - r[i].clone();
            sq = sq + d.clone() * (d.clone() + T::one()) / mi.clone();
            lin = lin + (k::<T>(3) * d + k(2)) / mi.clone();
        }
        let base = k::<T>(-24) - k::<T>(36) * p.clone() + k::<T>(12) * sq;
        let t3 = k::<T>(4) * f3.clone() * (k::<T>(-5) - k::<T>(9) * p.clone() + lin);
        let t4 = f4.clone() * (k::<T>(-3) - k::<T>(6) * p + k::<T>(3) * inv_sum(m));
        (base + t3 + t4) / k(24)
    }

    fn alpha_head<T: Scalar>(a: &T, p: &T, odd: bool) -> T {
        let a2 = a.clone() * a.clone();
        let mut h = T::zero() - a2 * (k::<T>(3) + k::<T>(6) * p.clone()) - k::<T>(18) * p.clone() - k(21);
        if odd {
            h = h - a.clone() * (k::<T>(16) + k::<T>(24) * p.clone());
        }
        h
    }

    pub fn ed_p_alpha<T: Scalar>(alpha: &T, m: &[T], r: &[T]) -> T {
        let a = alpha.clone();
        let p = dim(m);
        let c0 = k::<T>(3) * a.clone() * a.clone() - k::<T>(8) * a.clone() - k(3);
        let mut s = T::zero();
        for (i, mi) in m.iter().enumerate() {
            let d = r[i + 1].clone() - r[i].clone();
            let num = k::<T>(48) * d.clone() * d.clone() + k::<T>(24) * (a.clone() - T::one()) * d + c0.clone();
            s = s + num / mi.clone();
        }
        (alpha_head(&a, &p, true) + s) / k(96)
    }

    pub fn ed_p_alpha_sym<T: Scalar>(alpha: &T, m: &[T], r: &[T]) -> T {
        let a = alpha.clone();
        let p = dim(m);
        let c0 = k::<T>(3) * a.clone() * a.clone() - k(3);
        let mut s = T::zero();
        for (i, mi) in m.iter().enumerate() {
            let d = r[i + 1].clone() - r[i].clone();
            let num = k::<T>(48) * d.clone() * d.clone() - k::<T>(24) * d + c0.clone();
            s = s + num / mi.clone();
        }
        (alpha_head(&a, &p, false) + s) / k(96)
    }

    // q₁/m₀ + Σ_{i=1}^{p−1} (qᵢ + qᵢ₊₁)/mᵢ + q_p/m_p with qᵢ = −r̄ᵢ(1 + r̄ᵢ).
    fn rank_variance_sum<T: Scalar>(m: &[T], rbar: &[T]) -> T {
        let q: Vec<T> = rbar
            .iter()
            .map(|r| T::zero() - r.clone() * (T::one() + r.clone()))
            .collect();
        let p = rbar.len();
        let mut s = q[0].clone() / m[0].clone() + q[p - 1].clone() / m[p].clone();
        for i in 1..p {
            s = s + (q[i - 1].clone() + q[i].clone()) / m[i].clone();
        }
        s
    }

    pub fn ed_p_star<T: Scalar>(f3: &T, f4: &T, m: &[T], rbar: &[T]) -> T {
        let p = dim(m);
        let last = m[m.len() - 1].clone();
        let inv = inv_sum(m);
        let b = rank_variance_sum(m, rbar) + k::<T>(2) / last.clone();
        let t3 = k::<T>(8)
            * f3.clone()
            * (k::<T>(-5) - k::<T>(9) * p.clone() + k::<T>(2) * inv.clone() + k::<T>(3) / last);
        let t4 = k::<T>(2) * f4.clone() * (k::<T>(-3) - k::<T>(6) * p.clone() + k::<T>(3) * inv);
        (k::<T>(-48) - k::<T>(72) * p + k::<T>(24) * b + t3 + t4) / k(48)
    }

    pub fn ed_p_star_alpha<T: Scalar>(alpha: &T, m: &[T], rbar: &[T]) -> T {
        let a = alpha.clone();
        let p = dim(m);
        let last = m[m.len() - 1].clone();
        let c0 = k::<T>(3) * a.clone() * a.clone() - k::<T>(8) * a.clone() - k(3);
        let s = k::<T>(48) * rank_variance_sum(m, rbar)
            + k::<T>(24) * (a.clone() + T::one()) / last
            + c0 * inv_sum(m);
        (alpha_head(&a, &p, true) + s) / k(96)
    }

    pub fn ed_p_star_alpha_sym<T: Scalar>(alpha: &T, m: &[T], rbar: &[T]) -> T {
        let a = alpha.clone();
        let p = dim(m);
        let last = m[m.len() - 1].clone();
        let c0 = k::<T>(3) * a.clone() * a.clone() - k(3);
        let s = k::<T>(48) * rank_variance_sum(m, rbar) + k::<T>(24) / last + c0 * inv_sum(m);
        (alpha_head(&a, &p, false) + s) / k(96)
    }

    fn middle_inv<T: Scalar>(m: &[T]) -> T {
        inv_sum(&m[1..m.len() - 1])
    }

    pub fn ed_p_star_upper<T: Scalar>(f3: &T, f4: &T, m: &[T]) -> T {
        let p = dim(m);
        let first = m[0].clone();
        let last = m[m.len() - 1].clone();
        let inv = inv_sum(m);
        let b = T::one() / first + k::<T>(9) / last.clone() + k::<T>(2) * middle_inv(m);
        let t3 = k::<T>(8)
            * f3.clone()
            * (k::<T>(-5) - k::<T>(9) * p.clone() + k::<T>(2) * inv.clone() + k::<T>(3) / last);
        let t4 = k::<T>(2) * f4.clone() * (k::<T>(-3) - k::<T>(6) * p.clone() + k::<T>(3) * inv);
        (k::<T>(-48) - k::<T>(72) * p + k::<T>(6) * b + t3 + t4) / k(48)
    }

    pub fn ed_p_star_upper_alpha<T: Scalar>(alpha: &T, m: &[T]) -> T {
        let a = alpha.clone();
        let a2 = a.clone() * a.clone();
        let p = dim(m);
        let first = m[0].clone();
        let last = m[m.len() - 1].clone();
        let e0 = k::<T>(3) * a2.clone() - k::<T>(8) * a.clone() + k(9);
        let ep = k::<T>(3) * a2.clone() + k::<T>(16) * a.clone() + k(33);
        let em = k::<T>(3) * a2 - k::<T>(8) * a.clone() + k(21);
        let s = e0 / first + ep / last + em * middle_inv(m);
        (alpha_head(&a, &p, true) + s) / k(96)
    }

    pub fn ed_p_star_upper_alpha_sym<T: Scalar>(alpha: &T, m: &[T]) -> T {
        let a2 = alpha.clone() * alpha.clone();
        let p = dim(m);
        let first = m[0].clone();
        let last = m[m.len() - 1].clone();
        let head = T::zero() - a2.clone() * (T::one() + k::<T>(2) * p.clone()) - k::<T>(6) * p - k(7);
        let s = (a2.clone() + k(3)) / first + (a2.clone() + k(11)) / last + (a2 + k(7)) * middle_inv(m);
        (head + s) / k(32)
    }

    /// Fixed-interval c₂ minus the randomized moving-interval bound at uniform m.
    pub fn dominance_gap<T: Scalar>(alpha: &T, p: usize, m_fixed: &T) -> T {
        let cell = T::one() / k::<T>(p as i64 + 1);
        let uniform = vec![cell; p + 1];
        ed_i_alpha_sym(alpha, p, m_fixed) - ed_p_star_upper_alpha_sym(alpha, &uniform)
    }

    pub fn ed_i_for<T: Scalar>(kind: &super::KernelKind<T>, p: usize, m_stat: &T) -> T {
        use super::KernelKind::*;
        match kind {
            General { f3, f4 } => ed_i(f3, f4, p, m_stat),
            Alpha { alpha } => ed_i_alpha(alpha, p, m_stat),
            AlphaSym { alpha } => ed_i_alpha_sym(alpha, p, m_stat),
        }
    }

    pub fn ed_p_for<T: Scalar>(kind: &super::KernelKind<T>, m: &[T], r: &[T]) -> T {
        use super::KernelKind::*;
        match kind {
            General { f3, f4 } => ed_p(f3, f4, m, r),
            Alpha { alpha } => ed_p_alpha(alpha, m, r),
            AlphaSym { alpha } => ed_p_alpha_sym(alpha, m, r),
        }
    }

    pub fn ed_p_star_for<T: Scalar>(kind: &super::KernelKind<T>, m: &[T], rbar: &[T]) -> T {
        use super::KernelKind::*;
        match kind {
            General { f3, f4 } => ed_p_star(f3, f4, m, rbar),
            Alpha { alpha } => ed_p_star_alpha(alpha, m, rbar),
            AlphaSym { alpha } => ed_p_star_alpha_sym(alpha, m, rbar),
        }
    }

    pub fn ed_p_star_upper_for<T: Scalar>(kind: &super::KernelKind<T>, m: &[T]) -> T {
        use super::KernelKind::*;
        match kind {
            General { f3, f4 } => ed_p_star_upper(f3, f4, m),
            Alpha { alpha } => ed_p_star_upper_alpha(alpha, m),
            AlphaSym { alpha } => ed_p_star_upper_alpha_sym(alpha, m),
        }
    }
}

impl KernelKind<f64> {
    pub fn alpha(alpha: f64) -> Self {
        KernelKind::Alpha { alpha }
    }

    pub fn alpha_sym(alpha: f64) -> Self {
        KernelKind::AlphaSym { alpha }
    }

    fn check(&self) -> Result<()> {
        let ok = match self {
            KernelKind::General { f3, f4 } => f3.is_finite() && f4.is_finite(),
            KernelKind::Alpha { alpha } | KernelKind::AlphaSym { alpha } => alpha.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("non-finite kernel parameters {self:?}")))
        }
    }

    /// Coefficient of M in the fixed-interval c₂.
    fn m_slope(&self) -> f64 {
        match *self {
            KernelKind::General { f3, f4 } => (4.0 * f3 + 3.0 * f4) / 24.0,
            KernelKind::Alpha { alpha } => (alpha - 3.0) * (3.0 * alpha - 7.0) / 96.0,
            KernelKind::AlphaSym { alpha } => (alpha * alpha + 7.0) / 32.0,
        }
    }
}

fn check_m_stat(p: usize, m_stat: f64) -> Result<()> {
    if p < 1 {
        return Err(Error::domain("p must be at least 1"));
    }
    let floor = ((p + 1) * (p + 1)) as f64;
    if m_stat.is_nan() || m_stat < floor * (1.0 - 1e-12) {
        return Err(Error::domain(format!(
            "M = {m_stat} is below its minimum (p+1)^2 = {floor}"
        )));
    }
    Ok(())
}

/// Fixed-interval expansion for any kernel kind. M = +∞ (an empty cell) gives
/// c₂ = +∞ whenever the coefficient of M is positive.
pub fn ed_i_for(kind: &KernelKind, p: usize, m_stat: f64) -> Result<RiskExpansion> {
    kind.check()?;
    check_m_stat(p, m_stat)?;
    let c2 = if m_stat.is_finite() {
        ExtReal::Finite(coeffs::ed_i_for(kind, p, &m_stat))
    } else {
        let slope = kind.m_slope();
        if slope > 0.0 {
            ExtReal::PosInf
        } else if slope == 0.0 {
            // c₂ does not depend on M; evaluate at its minimum.
            ExtReal::Finite(coeffs::ed_i_for(kind, p, &(((p + 1) * (p + 1)) as f64)))
        } else {
            return Err(Error::domain("c2 diverges to -inf for this kernel at M = inf"));
        }
    };
    Ok(RiskExpansion::new(p, c2, Formula::FixedInterval, kind.clone()))
}

pub fn ed_i(f3: f64, f4: f64, p: usize, m_stat: f64) -> Result<RiskExpansion> {
    ed_i_for(&KernelKind::General { f3, f4 }, p, m_stat)
}

pub fn ed_i_alpha(alpha: f64, p: usize, m_stat: f64) -> Result<RiskExpansion> {
    ed_i_for(&KernelKind::alpha(alpha), p, m_stat)
}

pub fn ed_i_alpha_sym(alpha: f64, p: usize, m_stat: f64) -> Result<RiskExpansion> {
    ed_i_for(&KernelKind::alpha_sym(alpha), p, m_stat)
}

fn model_cells(m: &ProbabilityVector) -> Result<&[f64]> {
    if m.kind() != VectorKind::Model || m.len() < 2 {
        return Err(Error::domain("expansion needs a strictly positive vector with at least two cells"));
    }
    Ok(m.cells())
}

fn check_gaps(m: &[f64], r: &[f64]) -> Result<()> {
    if r.len() != m.len() + 1 {
        return Err(Error::Shape(r.len(), m.len() + 1));
    }
    if r[0] != 0.0 || r[r.len() - 1] != 1.0 {
        return Err(Error::domain("gap list must start at r0 = 0 and end at r_{p+1} = 1"));
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("gap list contains a non-finite value"));
    }
    Ok(())
}

/// Moving-interval expansion at fixed ranks with gaps r.
pub fn ed_p_for(kind: &KernelKind, m: &ProbabilityVector, r: &[f64]) -> Result<RiskExpansion> {
    kind.check()?;
    let cells = model_cells(m)?;
    check_gaps(cells, r)?;
    let c2 = coeffs::ed_p_for(kind, cells, r);
    Ok(RiskExpansion::new(m.p(), ExtReal::Finite(c2), Formula::MovingInterval, kind.clone()))
}

pub fn ed_p(f3: f64, f4: f64, m: &ProbabilityVector, r: &[f64]) -> Result<RiskExpansion> {
    ed_p_for(&KernelKind::General { f3, f4 }, m, r)
}

pub fn ed_p_alpha(alpha: f64, m: &ProbabilityVector, r: &[f64]) -> Result<RiskExpansion> {
    ed_p_for(&KernelKind::alpha(alpha), m, r)
}

pub fn ed_p_alpha_sym(alpha: f64, m: &ProbabilityVector, r: &[f64]) -> Result<RiskExpansion> {
    ed_p_for(&KernelKind::alpha_sym(alpha), m, r)
}

/// Moving-interval expansion averaged over the randomized rank rule.
pub fn ed_p_star(kind: &KernelKind, m: &ProbabilityVector, rbar: &[f64]) -> Result<RiskExpansion> {
    kind.check()?;
    let cells = model_cells(m)?;
    if rbar.len() != m.p() {
        return Err(Error::Shape(rbar.len(), m.p()));
    }
    if let Some(r) = rbar.iter().find(|r| !(-1.0..=0.0).contains(*r)) {
        return Err(Error::domain(format!("fractional part {r} outside [-1, 0]")));
    }
    let c2 = coeffs::ed_p_star_for(kind, cells, rbar);
    Ok(RiskExpansion::new(m.p(), ExtReal::Finite(c2), Formula::MovingRandomized, kind.clone()))
}

/// The r̄-free upper bound of [`ed_p_star`].
pub fn ed_p_star_upper(kind: &KernelKind, m: &ProbabilityVector) -> Result<RiskExpansion> {
    kind.check()?;
    let cells = model_cells(m)?;
    let c2 = coeffs::ed_p_star_upper_for(kind, cells);
    Ok(RiskExpansion::new(m.p(), ExtReal::Finite(c2), Formula::MovingRandomizedUpper, kind.clone()))
}

/// Exact rational image of a finite float.
pub fn to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::domain(format!("{x} has no rational value")))
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Fall back to a ratio of huge integers.
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Symmetrized fixed-interval c₂ at `m_fixed` minus the randomized
/// moving-interval bound at uniform cells, evaluated exactly.
pub fn dominance_gap(alpha: f64, p: usize, m_fixed: f64) -> Result<f64> {
    if !alpha.is_finite() {
        return Err(Error::domain("alpha must be finite"));
    }
    check_m_stat(p, m_fixed)?;
    if !m_fixed.is_finite() {
        return Ok(f64::INFINITY);
    }
    let gap = coeffs::dominance_gap(&to_rational(alpha)?, p, &to_rational(m_fixed)?);
    Ok(rational_to_f64(&gap))
}

/// Solves c₁/n + c₂/n² = target for n.
///
/// For c₂ ≥ 0 the root is unique. For c₂ < 0 the quadratic in 1/n has two
/// positive roots; the one with larger n is returned, since that is the branch
/// on which the expansion decreases in n.
pub fn equivalent_sample_size(exp: &RiskExpansion, target: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::domain(format!("target risk must be positive, got {target}")));
    }
    let c2 = exp
        .c2
        .finite()
        .ok_or_else(|| Error::domain("c2 is infinite; no finite sample size reaches the target"))?;
    let c1 = exp.c1;
    let disc = c1 * c1 + 4.0 * c2 * target;
    if disc < 0.0 {
        return Err(Error::Design(format!("infeasible: expansion never reaches risk {target}")));
    }
    let x = 2.0 * target / (c1 + disc.sqrt());
    Ok(1.0 / x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn pv(c: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(c.to_vec()).unwrap()
    }

    fn c2(e: &RiskExpansion) -> f64 {
        e.c2.to_f64()
    }

    #[test]
    fn main_term_is_half_p() {
        let m = pv(&[0.2, 0.3, 0.5]);
        let kind = KernelKind::alpha(0.4);
        let exps = [
            ed_i(1.0, 2.0, 2, 12.0).unwrap(),
            ed_i_alpha_sym(1.0, 2, 12.0).unwrap(),
            ed_p_for(&kind, &m, &[0.0, 0.3, -0.2, 1.0]).unwrap(),
            ed_p_star(&kind, &m, &[-0.3, -0.6]).unwrap(),
            ed_p_star_upper(&kind, &m).unwrap(),
        ];
        for e in exps {
            assert_eq!(e.c1, 1.0);
        }
    }

    #[test]
    fn fixed_interval_examples() {
        assert_eq!(c2(&ed_i(0.0, 0.0, 5, 40.0).unwrap()), 0.0);
        assert!((c2(&ed_i(-1.0, 2.0, 1, 4.0).unwrap()) - 0.25).abs() < 1e-15);
        let a = c2(&ed_i_alpha(3.0, 4, 25.0).unwrap());
        let b = c2(&ed_i_alpha(3.0, 4, 250.0).unwrap());
        assert_eq!(a, b);
        assert!(ed_i(0.0, 0.0, 2, 8.9).is_err());
        assert!(ed_i(0.0, 0.0, 0, 8.9).is_err());
    }

    #[test]
    fn sym_fixed_interval_at_minimum() {
        for p in 1..15usize {
            for &a in &[-3.0, -1.0, 0.0, 0.5, 2.0] {
                let m = ((p + 1) * (p + 1)) as f64;
                let pf = p as f64;
                let want = (pf * pf * a * a + 7.0 * pf * pf + 8.0 * pf) / 32.0;
                let got = c2(&ed_i_alpha_sym(a, p, m).unwrap());
                assert!((got - want).abs() < 1e-12 * want.max(1.0));
                assert!(got > 0.0);
            }
        }
    }

    #[test]
    fn infinite_m_statistic() {
        assert_eq!(ed_i_alpha_sym(1.0, 2, f64::INFINITY).unwrap().c2, ExtReal::PosInf);
        // α = 3: the M coefficient vanishes.
        assert!(ed_i_alpha(3.0, 2, f64::INFINITY).unwrap().c2.is_finite());
        // 4f₃ + 3f₄ < 0 cannot be represented.
        assert!(ed_i(-1.0, 0.0, 2, f64::INFINITY).is_err());
        assert_eq!(ed_i_alpha_sym(1.0, 2, f64::INFINITY).unwrap().value(10.0), ExtReal::PosInf);
    }

    #[test]
    fn rational_specialization_chain() {
        let m = vec![q(1, 5), q(3, 10), q(1, 2)];
        let r = vec![q(0, 1), q(1, 3), q(-2, 7), q(1, 1)];
        let rbar = vec![q(-1, 3), q(-5, 8)];
        for a in [q(-3, 1), q(-1, 2), q(0, 1), q(1, 1), q(7, 3)] {
            let (f3, f4) = coeffs::alpha_derivatives(&a);
            let neg = -a.clone();
            let half = q(1, 2);
            let ms = coeffs::m_statistic(&m);
            assert_eq!(coeffs::ed_i_alpha(&a, 2, &ms), coeffs::ed_i(&f3, &f4, 2, &ms));
            assert_eq!(coeffs::ed_p_alpha(&a, &m, &r), coeffs::ed_p(&f3, &f4, &m, &r));
            assert_eq!(coeffs::ed_p_star_alpha(&a, &m, &rbar), coeffs::ed_p_star(&f3, &f4, &m, &rbar));
            assert_eq!(coeffs::ed_p_star_upper_alpha(&a, &m), coeffs::ed_p_star_upper(&f3, &f4, &m));

            let sym = |f: &dyn Fn(&BigRational) -> BigRational| half.clone() * (f(&a) + f(&neg));
            assert_eq!(coeffs::ed_i_alpha_sym(&a, 2, &ms), sym(&|x| coeffs::ed_i_alpha(x, 2, &ms)));
            assert_eq!(coeffs::ed_p_alpha_sym(&a, &m, &r), sym(&|x| coeffs::ed_p_alpha(x, &m, &r)));
            assert_eq!(
                coeffs::ed_p_star_alpha_sym(&a, &m, &rbar),
                sym(&|x| coeffs::ed_p_star_alpha(x, &m, &rbar))
            );
            assert_eq!(
                coeffs::ed_p_star_upper_alpha_sym(&a, &m),
                sym(&|x| coeffs::ed_p_star_upper_alpha(x, &m))
            );
        }
    }

    #[test]
    fn float_specialization_chain() {
        let m = pv(&[0.1, 0.25, 0.4, 0.25]);
        let r = [0.0, 0.4, -0.3, 0.9, 1.0];
        for a in [-2.5, -1.0, 0.0, 0.3, 1.0, 4.0] {
            let (f3, f4) = crate::divergence::f_alpha_derivatives(a);
            let e1 = c2(&ed_p_alpha(a, &m, &r).unwrap());
            let e2 = c2(&ed_p(f3, f4, &m, &r).unwrap());
            assert!((e1 - e2).abs() < 1e-12 * e1.abs().max(1.0));
            let e1 = c2(&ed_i_alpha(a, 3, 20.0).unwrap());
            let e2 = c2(&ed_i(f3, f4, 3, 20.0).unwrap());
            assert!((e1 - e2).abs() < 1e-12 * e1.abs().max(1.0));
        }
    }

    #[test]
    fn sym_moving_has_no_odd_alpha_terms() {
        let m = vec![q(1, 4), q(1, 4), q(1, 2)];
        let r = vec![q(0, 1), q(1, 5), q(-3, 5), q(1, 1)];
        for a in [q(1, 3), q(2, 1), q(5, 2)] {
            assert_eq!(coeffs::ed_p_alpha_sym(&a, &m, &r), coeffs::ed_p_alpha_sym(&-a.clone(), &m, &r));
        }
    }

    #[test]
    fn moving_general_direct_substitution() {
        // f₃ = f₄ = 0, uniform m, r interior all zero: Σ Δ(Δ+1)/m picks up only
        // the last cell, Δ = 1, giving 2(p+1).
        for p in 1..8usize {
            let cell = q(1, p as i64 + 1);
            let m = vec![cell; p + 1];
            let mut r = vec![q(0, 1); p + 2];
            r[p + 1] = q(1, 1);
            let got = coeffs::ed_p(&q(0, 1), &q(0, 1), &m, &r);
            let pi = p as i64;
            let want = q(-24 - 36 * pi + 24 * (pi + 1), 24);
            assert_eq!(got, want);
            // f₄ block alone: (−3 − 6p + 3(p+1)²)/24 = 3p²/24.
            let f4_only = coeffs::ed_p(&q(0, 1), &q(1, 1), &m, &r) - got;
            assert_eq!(f4_only, q(3 * pi * pi, 24));
        }
    }

    #[test]
    fn star_reduces_to_fixed_ranks_without_randomization() {
        let m = vec![q(1, 5), q(3, 10), q(1, 2)];
        let r = vec![q(0, 1), q(0, 1), q(0, 1), q(1, 1)];
        let rbar = vec![q(0, 1), q(0, 1)];
        let kinds = [
            KernelKind::General { f3: q(2, 3), f4: q(-1, 4) },
            KernelKind::Alpha { alpha: q(-3, 2) },
            KernelKind::AlphaSym { alpha: q(5, 2) },
        ];
        for kind in kinds {
            assert_eq!(coeffs::ed_p_star_for(&kind, &m, &rbar), coeffs::ed_p_for(&kind, &m, &r));
        }
    }

    #[test]
    fn upper_bound_attained_at_half() {
        let m = vec![q(1, 10), q(1, 5), q(3, 10), q(2, 5)];
        let rbar = vec![q(-1, 2); 3];
        let kinds = [
            KernelKind::General { f3: q(2, 3), f4: q(-1, 4) },
            KernelKind::Alpha { alpha: q(-3, 2) },
            KernelKind::AlphaSym { alpha: q(5, 2) },
        ];
        for kind in kinds {
            assert_eq!(coeffs::ed_p_star_for(&kind, &m, &rbar), coeffs::ed_p_star_upper_for(&kind, &m));
        }
    }

    #[test]
    fn sym_star_with_equal_end_cells_reduced_form() {
        // With m₀ = m_p and r̄ = −½ the bound collapses to
        // [−α²(1+2p) − 6p − 7 + (α²+7)M]/32.
        let m = vec![q(1, 8), q(3, 8), q(1, 4), q(1, 8)];
        let ms = coeffs::m_statistic(&m);
        for a in [q(0, 1), q(1, 1), q(-7, 3)] {
            let a2 = a.clone() * a.clone();
            let p = q(3, 1);
            let want = (-(a2.clone()) * (q(1, 1) + q(2, 1) * p.clone()) - q(6, 1) * p - q(7, 1)
                + (a2 + q(7, 1)) * ms.clone())
                / q(32, 1);
            assert_eq!(coeffs::ed_p_star_upper_alpha_sym(&a, &m), want);
        }
    }

    #[test]
    fn sym_bound_at_uniform_cells() {
        for p in 1..12usize {
            let m = ProbabilityVector::uniform(p + 1).unwrap();
            for a in [-2.0, 0.0, 1.0, 3.5] {
                let pf = p as f64;
                let want = (-a * a * (1.0 + 2.0 * pf) - 6.0 * pf - 7.0 + (a * a + 7.0) * (pf + 1.0).powi(2)) / 32.0;
                let got = c2(&ed_p_star_upper(&KernelKind::alpha_sym(a), &m).unwrap());
                assert!((got - want).abs() < 1e-11 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dominance_gap_examples() {
        for p in 1..10usize {
            let m0 = ((p + 1) * (p + 1)) as f64;
            assert_eq!(dominance_gap(1.3, p, m0).unwrap(), 0.0);
            let g = dominance_gap(1.3, p, m0 + 2.0).unwrap();
            assert!((g - (1.69 + 7.0) * 2.0 / 32.0).abs() < 1e-12);
        }
        assert!(dominance_gap(0.0, 3, 15.0).is_err());
    }

    #[test]
    fn equivalent_sample_size_roundtrip() {
        let e = ed_i_alpha_sym(1.0, 9, 100.0).unwrap();
        let n = equivalent_sample_size(&e, e.value(250.0).to_f64()).unwrap();
        assert!((n - 250.0).abs() < 1e-9);
        // negative c₂: the large-n branch
        let e = ed_i(-1.0, 0.0, 3, 16.0).unwrap();
        assert!(e.c2.to_f64() < 0.0);
        let n = equivalent_sample_size(&e, e.value(40.0).to_f64()).unwrap();
        assert!((n - 40.0).abs() < 1e-9);
        assert!(matches!(equivalent_sample_size(&e, 10.0), Err(Error::Design(_))));
        assert!(equivalent_sample_size(&e, 0.0).is_err());
        let inf = ed_i_alpha_sym(1.0, 2, f64::INFINITY).unwrap();
        assert!(equivalent_sample_size(&inf, 0.1).is_err());
    }

    #[test]
    fn expansion_serde_roundtrip() {
        let e = ed_p_star(&KernelKind::alpha_sym(1.0), &pv(&[0.25, 0.75]), &[-0.5]).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<RiskExpansion>(&s).unwrap(), e);
    }

    proptest! {
        #[test]
        fn sym_fixed_c2_increases_in_m(p in 1usize..20, a in -5.0f64..5.0, d in 0.0f64..50.0, e in 0.01f64..10.0) {
            let m0 = ((p + 1) * (p + 1)) as f64 + d;
            let lo = c2(&ed_i_alpha_sym(a, p, m0).unwrap());
            let hi = c2(&ed_i_alpha_sym(a, p, m0 + e).unwrap());
            prop_assert!(hi > lo);
            prop_assert!(lo > 0.0);
        }

        #[test]
        fn dominance_gap_is_nonnegative(p in 1usize..=20, a in -5.0f64..5.0, t in 0.0f64..1.0) {
            let floor = ((p + 1) * (p + 1)) as f64;
            let m = floor * (1.0 + 9.0 * t);
            let g = dominance_gap(a, p, m).unwrap();
            prop_assert!(g >= 0.0);
            let closed = (a * a + 7.0) * (m - floor) / 32.0;
            prop_assert!((g - closed).abs() <= 1e-9 * closed.max(1.0));
        }

        #[test]
        fn star_is_bounded_by_upper(
            a in -4.0f64..4.0,
            w in prop::collection::vec(0.01f64..1.0, 2..10),
            seed in prop::collection::vec(-1.0f64..=0.0, 9),
        ) {
            let m = ProbabilityVector::normalized(&w).unwrap();
            let rbar = &seed[..m.p()];
            for kind in [KernelKind::alpha(a), KernelKind::alpha_sym(a), KernelKind::General { f3: a, f4: a * a - 1.0 }] {
                let s = c2(&ed_p_star(&kind, &m, rbar).unwrap());
                let u = c2(&ed_p_star_upper(&kind, &m).unwrap());
                prop_assert!(s <= u + 1e-9 * u.abs().max(1.0));
            }
        }
    }
}
