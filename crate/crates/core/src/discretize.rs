//! The two discretization schemes.
//!
//! A [`FixedPartition`] fixes interior endpoints a₁ < … < a_p before sampling
//! (a₀ = −∞ and a_{p+1} = +∞ are implicit); cells are estimated by counts/n.
//! A [`QuantileDesign`] fixes percentile levels λ₁ < … < λ_p instead, and the
//! order statistics at ranks nᵢ ≈ nλᵢ become the endpoints.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{interval_probability, MotherDistribution};
use crate::divergence::{ProbabilityVector, DEGENERATE_CELL};
use crate::{Error, ExtReal, Result};

/// Interior endpoints of a fixed partition of ℝ into p + 1 cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FixedPartition {
    endpoints: Vec<f64>,
}

impl FixedPartition {
    pub fn new(endpoints: Vec<f64>) -> Result<Self> {
        if endpoints.is_empty() {
            return Err(Error::domain("a partition needs at least one endpoint"));
        }
        if let Some(e) = endpoints.iter().find(|e| !e.is_finite()) {
            return Err(Error::domain(format!("interior endpoints must be finite, got {e}")));
        }
        if let Some(w) = endpoints.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!(
                "endpoints must be strictly increasing: {} >= {}",
                w[0], w[1]
            )));
        }
        Ok(FixedPartition { endpoints })
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn p(&self) -> usize {
        self.endpoints.len()
    }

    /// Cell index of `x` under half-open cells [aᵢ, aᵢ₊₁).
    pub fn cell_of(&self, x: f64) -> usize {
        self.endpoints.partition_point(|&e| e <= x)
    }
}

impl TryFrom<Vec<f64>> for FixedPartition {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        FixedPartition::new(v)
    }
}

impl From<FixedPartition> for Vec<f64> {
    fn from(p: FixedPartition) -> Vec<f64> {
        p.endpoints
    }
}

/// mᵢ = P(aᵢ, aᵢ₊₁) for every cell of `part`.
///
/// A cell with probability below 1e-300 marks the vector
/// [`VectorKind::Degenerate`](crate::divergence::VectorKind::Degenerate);
/// downstream M statistics and expansions then evaluate to +∞.
pub fn cell_probabilities<D: MotherDistribution + ?Sized>(
    d: &D,
    part: &FixedPartition,
) -> Result<ProbabilityVector> {
    let mut edges = Vec::with_capacity(part.p() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend_from_slice(part.endpoints());
    edges.push(f64::INFINITY);
    let cells = edges
        .windows(2)
        .map(|w| interval_probability(d, w[0], w[1]))
        .collect::<Result<Vec<_>>>()?;
    ProbabilityVector::model_or_degenerate(cells)
}

pub fn cell_counts(part: &FixedPartition, sample: &[f64]) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; part.p() + 1];
    for &x in sample {
        if x.is_nan() {
            return Err(Error::domain("sample contains NaN"));
        }
        counts[part.cell_of(x)] += 1;
    }
    Ok(counts)
}

/// The multinomial MLE m̂ᵢ = #{X ∈ cell i} / n. Points on an endpoint go to the
/// cell on their right.
pub fn mle_from_sample(part: &FixedPartition, sample: &[f64]) -> Result<ProbabilityVector> {
    if sample.is_empty() {
        return Err(Error::domain("sample is empty"));
    }
    let n = sample.len() as f64;
    let counts = cell_counts(part, sample)?;
    ProbabilityVector::empirical(counts.iter().map(|&c| c as f64 / n).collect())
}

/// M = Σ 1/mᵢ; +∞ for a vector with an empty (or degenerate) cell.
pub fn m_statistic(m: &ProbabilityVector) -> ExtReal {
    if m.cells().iter().any(|&c| c < DEGENERATE_CELL) {
        return ExtReal::PosInf;
    }
    ExtReal::Finite(m.cells().iter().map(|c| 1.0 / c).sum())
}

// n·λ within this relative distance of an integer counts as that integer.
const INTEGER_SNAP: f64 = 1e-9;

/// Percentile levels λ₁ < … < λ_p in (0, 1); λ₀ = 0 and λ_{p+1} = 1 implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileDesign {
    levels: Vec<f64>,
}

/// The two candidate ranks for one level under the randomized rule:
/// `lower` = ⌊nλ⌋ with probability 1 + r̄, `lower + 1` with probability −r̄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankChoice {
    pub lower: u64,
    pub frac: f64,
}

impl RankChoice {
    pub fn p_lower(&self) -> f64 {
        1.0 + self.frac
    }

    pub fn p_upper(&self) -> f64 {
        -self.frac
    }
}

impl QuantileDesign {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::domain("a design needs at least one level"));
        }
        if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::domain(format!("levels must lie in (0, 1), got {l}")));
        }
        if let Some(w) = levels.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!("levels must be strictly increasing: {} >= {}", w[0], w[1])));
        }
        Ok(QuantileDesign { levels })
    }

    /// λᵢ = i/k for i = 1 … k−1: k equiprobable cells.
    pub fn equiprobable(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain("equiprobable design needs k >= 2 cells"));
        }
        Ok(QuantileDesign { levels: (1..k).map(|i| i as f64 / k as f64).collect() })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn p(&self) -> usize {
        self.levels.len()
    }

    /// Target cells mᵢ = λᵢ₊₁ − λᵢ.
    pub fn target(&self) -> ProbabilityVector {
        let mut cells = Vec::with_capacity(self.p() + 1);
        let mut prev = 0.0;
        for &l in self.levels.iter().chain(std::iter::once(&1.0)) {
            cells.push(l - prev);
            prev = l;
        }
        ProbabilityVector::new(cells).expect("strictly increasing levels give a model vector")
    }

    fn floor_and_frac(n: u64, level: f64) -> (u64, f64) {
        let x = n as f64 * level;
        let nearest = x.round();
        if (x - nearest).abs() <= INTEGER_SNAP * x.max(1.0) {
            (nearest as u64, 0.0)
        } else {
            let fl = x.floor();
            (fl as u64, fl - x)
        }
    }

    /// r̄ᵢ = ⌊nλᵢ⌋ − nλᵢ ∈ (−1, 0].
    pub fn fractional_parts(&self, n: u64) -> Vec<f64> {
        self.levels.iter().map(|&l| Self::floor_and_frac(n, l).1).collect()
    }

    /// The two-point rank law of every level, after checking the design fits n.
    pub fn rank_choices(&self, n: u64) -> Result<Vec<RankChoice>> {
        let choices: Vec<RankChoice> = self
            .levels
            .iter()
            .map(|&l| {
                let (lower, frac) = Self::floor_and_frac(n, l);
                RankChoice { lower, frac }
            })
            .collect();
        let first = choices[0].lower;
        let last = choices[choices.len() - 1].lower;
        if first < 1 || last + 1 > n {
            return Err(Error::Design(format!(
                "n = {n} too small for levels in [{}, {}]",
                self.levels[0],
                self.levels[self.p() - 1]
            )));
        }
        Ok(choices)
    }

    /// Gaps r = (r₀, r₁ … r_p, r_{p+1}) = (0, n₁ − nλ₁, …, n_p − nλ_p, 1).
    pub fn gaps(&self, n: u64, ranks: &[u64]) -> Result<Vec<f64>> {
        if ranks.len() != self.p() {
            return Err(Error::Shape(ranks.len(), self.p()));
        }
        let mut r = Vec::with_capacity(self.p() + 2);
        r.push(0.0);
        for (&rank, &l) in ranks.iter().zip(&self.levels) {
            let (lower, frac) = Self::floor_and_frac(n, l);
            // rank − nλ = (rank − ⌊nλ⌋) + r̄, exact when nλ snaps to an integer
            r.push((rank as f64 - lower as f64) + frac);
        }
        r.push(1.0);
        Ok(r)
    }
}

impl TryFrom<Vec<f64>> for QuantileDesign {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        QuantileDesign::new(v)
    }
}

impl From<QuantileDesign> for Vec<f64> {
    fn from(d: QuantileDesign) -> Vec<f64> {
        d.levels
    }
}

/// Accepts `deciles(k)` (λᵢ = i/k) or a JSON array of levels.
impl FromStr for QuantileDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("deciles(") {
            let k = rest
                .strip_suffix(')')
                .and_then(|k| k.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::Parse(format!("bad design shorthand {s:?}")))?;
            return QuantileDesign::equiprobable(k);
        }
        let levels = parse_real_list(s)?;
        QuantileDesign::new(levels)
    }
}

impl fmt::Display for QuantileDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.levels.iter().map(|l| l.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Parses `[a, b, c]` or `a,b,c`.
pub fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("not a number: {:?}", t.trim())))
        })
        .collect()
}

impl FromStr for FixedPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FixedPartition::new(parse_real_list(s)?)
    }
}

/// Draws ranks n₁ … n_p by the randomized rule: ⌊nλᵢ⌋ with probability
/// 1 + r̄ᵢ, ⌊nλᵢ⌋ + 1 otherwise. Collisions (nᵢ ≥ nᵢ₊₁) are a design error.
pub fn ranks_for<R: Rng + ?Sized>(design: &QuantileDesign, n: u64, rng: &mut R) -> Result<Vec<u64>> {
    let choices = design.rank_choices(n)?;
    let mut ranks = Vec::with_capacity(choices.len());
    draw_ranks(&choices, rng, &mut ranks)?;
    Ok(ranks)
}

pub(crate) fn draw_ranks<R: Rng + ?Sized>(
    choices: &[RankChoice],
    rng: &mut R,
    out: &mut Vec<u64>,
) -> Result<()> {
    out.clear();
    for c in choices {
        let up = c.frac < 0.0 && rng.random::<f64>() < c.p_upper();
        out.push(c.lower + up as u64);
    }
    if let Some(w) = out.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Design(format!("rank collision: {} >= {}", w[0], w[1])));
    }
    Ok(())
}

/// Outcome of one moving-interval estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingEstimate {
    /// mᵢ = λᵢ₊₁ − λᵢ, what the scheme reports.
    pub target: ProbabilityVector,
    /// m̂ᵢ = F(X₍ₙᵢ₊₁₎) − F(X₍ₙᵢ₎), the mother mass actually between the endpoints.
    pub realized: ProbabilityVector,
    /// Whether two selected order statistics coincided.
    pub ties: bool,
}

/// Builds the moving-interval estimate from a sample and its ranks.
pub fn moving_estimate<D: MotherDistribution + ?Sized>(
    mother: &D,
    design: &QuantileDesign,
    ranks: &[u64],
    sample: &[f64],
) -> Result<MovingEstimate> {
    let mut sorted = sample.to_vec();
    if sorted.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("sample contains NaN"));
    }
    sorted.sort_unstable_by(f64::total_cmp);
    let mut cells = vec![0.0; design.p() + 1];
    let ties = realized_cells(mother, ranks, &sorted, &mut cells)?;
    Ok(MovingEstimate {
        target: design.target(),
        realized: ProbabilityVector::empirical(cells)?,
        ties,
    })
}

/// Fills `cells` with F-spacings between the selected order statistics of an
/// ascending `sorted` sample. Returns whether any selected pair was tied.
pub(crate) fn realized_cells<D: MotherDistribution + ?Sized>(
    mother: &D,
    ranks: &[u64],
    sorted: &[f64],
    cells: &mut [f64],
) -> Result<bool> {
    let n = sorted.len() as u64;
    if cells.len() != ranks.len() + 1 {
        return Err(Error::Shape(cells.len(), ranks.len() + 1));
    }
    if ranks.iter().any(|&r| r < 1 || r > n) || ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Design(format!("ranks {ranks:?} invalid for n = {n}")));
    }
    // (cdf, sf) at each endpoint, with the implicit ±∞ ends.
    let mut prev = (0.0, 1.0);
    let mut ties = false;
    let mut prev_x = f64::NEG_INFINITY;
    for (i, &r) in ranks.iter().enumerate() {
        let x = sorted[(r - 1) as usize];
        ties |= x == prev_x;
        prev_x = x;
        let here = (mother.cdf(x), mother.sf(x));
        cells[i] = spacing(prev, here);
        prev = here;
    }
    cells[ranks.len()] = spacing(prev, (1.0, 0.0));
    Ok(ties)
}

fn spacing(lo: (f64, f64), hi: (f64, f64)) -> f64 {
    let d = if lo.0 > 0.5 { lo.1 - hi.1 } else { hi.0 - lo.0 };
    d.max(0.0)
}
