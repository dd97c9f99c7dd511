//! Exact reference computations.
//!
//! Everything here works in big-integer or rational arithmetic, except
//! [`exact_fixed_risk`], whose kernel values are transcendental; it still
//! enumerates every outcome and sums with compensation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::asymptotic::{coeffs, KernelKind};
use crate::divergence::{f_divergence_cells, DivergenceKernel, ProbabilityVector, VectorKind};
use crate::{Error, ExtReal, Result};

/// Largest number of outcomes an enumeration may visit.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Largest p for the 2^p rank enumeration.
pub const MAX_RANK_ENUMERATION_P: usize = 20;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn rising(lo: u64, hi: u64) -> BigInt {
    (lo..=hi).fold(BigInt::one(), |acc, t| acc * BigInt::from(t))
}

/// A joint moment E[∏ U₍ₙᵢ₎^aᵢ] of uniform order statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSpec {
    pub n: u64,
    pub ranks: Vec<u64>,
    pub powers: Vec<u32>,
}

impl MomentSpec {
    pub fn new(n: u64, ranks: Vec<u64>, powers: Vec<u32>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::domain("moment spec needs at least one rank"));
        }
        if ranks.len() != powers.len() {
            return Err(Error::Shape(powers.len(), ranks.len()));
        }
        if let Some(r) = ranks.iter().find(|&&r| r < 1 || r > n) {
            return Err(Error::domain(format!("rank {r} outside 1..={n}")));
        }
        if ranks.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain(format!("ranks must be nondecreasing, got {ranks:?}")));
        }
        if powers.contains(&0) {
            return Err(Error::domain("powers must be positive"));
        }
        Ok(MomentSpec { n, ranks, powers })
    }
}

/// E[∏ U₍ₙᵢ₎^aᵢ] = n!/(n+A)! · ∏ (nᵢ−1+Sᵢ)!/(nᵢ−1+Sᵢ₋₁)! with Sᵢ = a₁+…+aᵢ.
pub fn uniform_orderstat_moment(spec: &MomentSpec) -> Result<BigRational> {
    let spec = MomentSpec::new(spec.n, spec.ranks.clone(), spec.powers.clone())?;
    let total: u64 = spec.powers.iter().map(|&a| a as u64).sum();
    let mut num = BigInt::one();
    let mut before = 0u64;
    for (&r, &a) in spec.ranks.iter().zip(&spec.powers) {
        let after = before + a as u64;
        num *= rising(r + before, r - 1 + after);
        before = after;
    }
    let den = rising(spec.n + 1, spec.n + total);
    Ok(BigRational::new(num, den))
}

// E[U₍ₐ₎^s U₍ᵦ₎^t] with a ≤ b, where U₍₀₎ = 0 and U₍ₙ₊₁₎ = 1.
fn pair_moment(n: u64, a: u64, s: u32, b: u64, t: u32) -> Result<BigRational> {
    let mut ranks = Vec::new();
    let mut powers = Vec::new();
    for (rank, power) in [(a, s), (b, t)] {
        if power == 0 || rank == n + 1 {
            continue;
        }
        if rank == 0 {
            return Ok(BigRational::zero());
        }
        ranks.push(rank);
        powers.push(power);
    }
    if ranks.is_empty() {
        return Ok(BigRational::one());
    }
    uniform_orderstat_moment(&MomentSpec::new(n, ranks, powers)?)
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

/// E[(U₍ᵦ₎ − U₍ₐ₎)^j] by expanding the power of the spacing.
pub fn spacing_moment(n: u64, a: u64, b: u64, j: u32) -> Result<BigRational> {
    if a > b || b > n + 1 {
        return Err(Error::domain(format!("invalid spacing ranks ({a}, {b}) for n = {n}")));
    }
    let mut acc = BigRational::zero();
    for l in 0..=j {
        let term = pair_moment(n, a, j - l, b, l)? * BigRational::from_integer(binomial(j, l));
        if (j - l) % 2 == 1 {
            acc -= term;
        } else {
            acc += term;
        }
    }
    Ok(acc)
}

/// Sₖ = Σ mᵢ^{1−k} E[(Dᵢ − mᵢ)^k] for k = 2, 3, 4.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMomentSums {
    pub s2: BigRational,
    pub s3: BigRational,
    pub s4: BigRational,
}

/// Exact moment sums of the spacings Dᵢ = U₍ₙᵢ₊₁₎ − U₍ₙᵢ₎ around mᵢ = λᵢ₊₁ − λᵢ
/// for deterministic ranks.
pub fn delta_moment_sums(n: u64, levels: &[BigRational], ranks: &[u64]) -> Result<DeltaMomentSums> {
    if levels.len() != ranks.len() || levels.is_empty() {
        return Err(Error::Shape(ranks.len(), levels.len()));
    }
    if ranks.iter().any(|&r| r < 1 || r > n) || ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Design(format!("ranks {ranks:?} invalid for n = {n}")));
    }
    let zero = BigRational::zero();
    let one = BigRational::one();
    if levels.iter().any(|l| *l <= zero || *l >= one) || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("levels must be strictly increasing in (0, 1)"));
    }
    let mut lam = vec![zero.clone()];
    lam.extend_from_slice(levels);
    lam.push(one);
    let mut rk = vec![0u64];
    rk.extend_from_slice(ranks);
    rk.push(n + 1);

    let mut sums = [zero.clone(), zero.clone(), zero];
    for i in 0..lam.len() - 1 {
        let m = lam[i + 1].clone() - lam[i].clone();
        let raw: Vec<BigRational> =
            (0..=4).map(|j| spacing_moment(n, rk[i], rk[i + 1], j)).collect::<Result<_>>()?;
        for (slot, k) in (2u32..=4).enumerate() {
            let mut central = BigRational::zero();
            for j in 0..=k {
                let neg_m = -m.clone();
                let term = BigRational::from_integer(binomial(k, j)) * raw[j as usize].clone() * pow(&neg_m, k - j);
                central += term;
            }
            sums[slot] += central / pow(&m, k - 1);
        }
    }
    let [s2, s3, s4] = sums;
    Ok(DeltaMomentSums { s2, s3, s4 })
}

fn pow(x: &BigRational, k: u32) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * x.clone())
}

/// C(n + p, p): the number of count vectors over p + 1 cells summing to n.
pub fn composition_count(n: u64, cells: usize) -> u128 {
    let p = cells.saturating_sub(1) as u128;
    let mut c: u128 = 1;
    for i in 1..=p {
        c = match c.checked_mul(n as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    c
}

fn check_budget(n: u64, cells: usize) -> Result<()> {
    let needed = composition_count(n, cells);
    if needed > ENUMERATION_BUDGET {
        return Err(Error::Budget { needed, budget: ENUMERATION_BUDGET });
    }
    Ok(())
}

/// Calls `visit` on every composition of n into `cells` nonnegative parts.
fn for_each_composition(n: u32, cells: usize, mut visit: impl FnMut(&[u32]) -> bool) {
    let mut k = vec![0u32; cells];
    k[0] = n;
    let last = cells - 1;
    loop {
        if !visit(&k) {
            return;
        }
        let Some(j) = (0..last).rev().find(|&j| k[j] > 0) else { return };
        let tail = k[last];
        k[last] = 0;
        k[j] -= 1;
        k[j + 1] = tail + 1;
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// E D_f[m : m̂] for the multinomial MLE at sample size n, by summing over all
/// C(n+p, p) count vectors.
pub fn exact_fixed_risk(kernel: &DivergenceKernel, m: &ProbabilityVector, n: u32) -> Result<ExtReal> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if m.kind() != VectorKind::Model {
        return Err(Error::domain("exact risk needs a strictly positive model vector"));
    }
    check_budget(n as u64, m.len())?;
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_m: Vec<f64> = m.cells().iter().map(|c| c.ln()).collect();
    let nf = n as f64;
    let mut hat = vec![0.0; m.len()];
    let mut total = KahanSum::default();
    let mut result: Result<()> = Ok(());
    let mut infinite = false;
    for_each_composition(n, m.len(), |k| {
        let mut lw = ln_fact[n as usize];
        for (i, &ki) in k.iter().enumerate() {
            lw += ki as f64 * ln_m[i] - ln_fact[ki as usize];
            hat[i] = ki as f64 / nf;
        }
        match f_divergence_cells(kernel, m.cells(), &hat) {
            Ok(ExtReal::Finite(d)) => {
                total.add(lw.exp() * d);
                true
            }
            Ok(ExtReal::PosInf) => {
                infinite = true;
                false
            }
            Err(e) => {
                result = Err(e);
                false
            }
        }
    });
    result?;
    if infinite {
        return Ok(ExtReal::PosInf);
    }
    Ok(ExtReal::Finite(total.value()))
}

/// Every count vector with its exact multinomial probability.
pub fn multinomial_outcomes(m: &[BigRational], n: u32) -> Result<Vec<(Vec<u32>, BigRational)>> {
    if m.len() < 2 {
        return Err(Error::domain("need at least two cells"));
    }
    check_budget(n as u64, m.len())?;
    let fact: Vec<BigInt> = std::iter::once(BigInt::one())
        .chain((1..=n as u64).scan(BigInt::one(), |acc, i| {
            *acc *= BigInt::from(i);
            Some(acc.clone())
        }))
        .collect();
    let mut out = Vec::new();
    for_each_composition(n, m.len(), |k| {
        let mut w = BigRational::from_integer(fact[n as usize].clone());
        for (i, &ki) in k.iter().enumerate() {
            w = w * pow(&m[i], ki) / BigRational::from_integer(fact[ki as usize].clone());
        }
        out.push((k.to_vec(), w));
        true
    });
    Ok(out)
}

/// E[(m̂ − m)^k], k = 1 … 4, for one multinomial cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralMoments {
    pub k1: BigRational,
    pub k2: BigRational,
    pub k3: BigRational,
    /// Exact finite-n fourth moment.
    pub k4: BigRational,
    /// The leading term 3n⁻²(m − m²)² alone.
    pub k4_truncated: BigRational,
}

// S(j, i) for j ≤ 4.
const STIRLING2: [[i64; 5]; 5] = [
    [1, 0, 0, 0, 0],
    [0, 1, 0, 0, 0],
    [0, 1, 1, 0, 0],
    [0, 1, 3, 1, 0],
    [0, 1, 7, 6, 1],
];

/// Central moments of m̂ᵢ = Kᵢ/n, Kᵢ ~ Bin(n, mᵢ), from factorial moments
/// E[K(K−1)…(K−i+1)] = n(n−1)…(n−i+1) mᵢ^i.
pub fn multinomial_central_moments(m: &[BigRational], n: u64) -> Result<Vec<CentralMoments>> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let zero = BigRational::zero();
    if m.iter().any(|c| *c < zero || *c > BigRational::one()) {
        return Err(Error::domain("cell probabilities must lie in [0, 1]"));
    }
    let nq = int(n as i64);
    Ok(m.iter()
        .map(|mi| {
            let falling = |i: usize| -> BigRational {
                let mut f = BigRational::one();
                for t in 0..i {
                    f *= int(n as i64 - t as i64);
                }
                f * pow(mi, i as u32)
            };
            // E[K^j]
            let raw: Vec<BigRational> = (0..=4)
                .map(|j| (0..=j).map(|i| int(STIRLING2[j][i]) * falling(i)).sum())
                .collect();
            let central = |k: u32| -> BigRational {
                (0..=k)
                    .map(|j| {
                        BigRational::from_integer(binomial(k, j)) * raw[j as usize].clone() / pow(&nq, j)
                            * pow(&-mi.clone(), k - j)
                    })
                    .sum()
            };
            let var = mi.clone() - mi.clone() * mi.clone();
            CentralMoments {
                k1: central(1),
                k2: central(2),
                k3: central(3),
                k4: central(4),
                k4_truncated: int(3) * var.clone() * var / (nq.clone() * nq.clone()),
            }
        })
        .collect())
}

/// Moments of the randomized gaps r₀ … r_{p+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMoments {
    /// E[rᵢ], i = 0 … p+1.
    pub mean: Vec<BigRational>,
    /// E[rᵢ²], i = 0 … p+1.
    pub second: Vec<BigRational>,
    /// E[rᵢ rᵢ₊₁], i = 0 … p.
    pub cross: Vec<BigRational>,
}

fn check_fractional_parts(rbar: &[BigRational]) -> Result<()> {
    let zero = BigRational::zero();
    let minus_one = -BigRational::one();
    if let Some(r) = rbar.iter().find(|r| **r > zero || **r < minus_one) {
        return Err(Error::domain(format!("fractional part {r} outside [-1, 0]")));
    }
    Ok(())
}

// (value, probability) pairs of one gap; r₀ and r_{p+1} are point masses.
fn gap_law(rbar: &[BigRational], i: usize) -> Vec<(BigRational, BigRational)> {
    let p = rbar.len();
    if i == 0 {
        return vec![(BigRational::zero(), BigRational::one())];
    }
    if i == p + 1 {
        return vec![(BigRational::one(), BigRational::one())];
    }
    let r = rbar[i - 1].clone();
    let one = BigRational::one();
    vec![(r.clone(), one.clone() + r.clone()), (one + r.clone(), -r)]
}

/// Enumerates each gap's two-point law (independent across levels).
pub fn randomized_rank_moments(rbar: &[BigRational]) -> Result<RankMoments> {
    check_fractional_parts(rbar)?;
    let p = rbar.len();
    let laws: Vec<_> = (0..p + 2).map(|i| gap_law(rbar, i)).collect();
    let expect = |law: &[(BigRational, BigRational)], g: &dyn Fn(&BigRational) -> BigRational| -> BigRational {
        law.iter().map(|(v, w)| w.clone() * g(v)).sum()
    };
    let mean = laws.iter().map(|l| expect(l, &|v| v.clone())).collect();
    let second = laws.iter().map(|l| expect(l, &|v| v.clone() * v.clone())).collect();
    let cross = (0..=p)
        .map(|i| {
            let mut acc = BigRational::zero();
            for (a, wa) in &laws[i] {
                for (b, wb) in &laws[i + 1] {
                    acc += wa.clone() * wb.clone() * a.clone() * b.clone();
                }
            }
            acc
        })
        .collect();
    Ok(RankMoments { mean, second, cross })
}

/// Averages the fixed-rank moving-interval c₂ over all 2^p rank choices,
/// weighted by the randomized rule.
pub fn randomized_ed_p_average(
    kind: &KernelKind<BigRational>,
    m: &[BigRational],
    rbar: &[BigRational],
) -> Result<BigRational> {
    check_fractional_parts(rbar)?;
    let p = rbar.len();
    if m.len() != p + 1 {
        return Err(Error::Shape(m.len(), p + 1));
    }
    if p > MAX_RANK_ENUMERATION_P {
        return Err(Error::Budget { needed: 1u128 << p, budget: 1u128 << MAX_RANK_ENUMERATION_P });
    }
    if m.iter().any(|c| !c.is_positive()) {
        return Err(Error::domain("cells must be strictly positive"));
    }
    let mut total = BigRational::zero();
    let mut r = vec![BigRational::zero(); p + 2];
    r[p + 1] = BigRational::one();
    for mask in 0u64..(1u64 << p) {
        let mut w = BigRational::one();
        for i in 0..p {
            let rb = rbar[i].clone();
            if mask >> i & 1 == 1 {
                r[i + 1] = BigRational::one() + rb.clone();
                w *= -rb;
            } else {
                r[i + 1] = rb.clone();
                w *= BigRational::one() + rb;
            }
        }
        if !w.is_zero() {
            total += w * coeffs::ed_p_for(kind, m, &r);
        }
    }
    Ok(total)
}
