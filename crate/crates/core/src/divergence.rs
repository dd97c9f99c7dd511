//! f-divergences between finite probability vectors.
//!
//! D_f[m1 : m2] = Σ m1ᵢ f(m2ᵢ / m1ᵢ) for a convex generator f normalized by
//! f(1) = 0, f'(1) = 0, f''(1) = 1. The α-family generator is
//!
//! ```text
//! f_α(x) = 4/(1−α²)·(1 − x^((1+α)/2)) + 2/(1−α)·(x − 1)   α ≠ ±1
//! f_1(x) = x log x + 1 − x
//! f_−1(x) = −log x + x − 1
//! ```
//!
//! Generators carry their limit at 0 (and the dual's limit, lim f(x)/x as
//! x → ∞) as declared values, so an empty cell produces either a finite term
//! or a clean [`ExtReal::PosInf`], never a NaN.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, ExtReal, Result};

/// Tolerance on Σ cells = 1.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Cells below this are treated as exactly empty when building model vectors.
pub const DEGENERATE_CELL: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    /// Strictly positive cells; usable as the reference of a divergence.
    Model,
    /// Estimated frequencies; zeros allowed.
    Empirical,
    /// A model vector with a (numerically) empty cell.
    Degenerate,
}

/// Multinomial cell probabilities m₀ … m_p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    cells: Vec<f64>,
    kind: VectorKind,
}

fn check_sum(cells: &[f64]) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::domain("probability vector must have at least one cell"));
    }
    if let Some((i, v)) = cells.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::domain(format!("cell {i} is not a probability: {v}")));
    }
    let total: f64 = cells.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::domain(format!("cells sum to {total}, not 1")));
    }
    Ok(())
}

impl ProbabilityVector {
    /// A model vector: every cell strictly positive, sum 1 within 1e-12.
    pub fn new(cells: Vec<f64>) -> Result<Self> {
        check_sum(&cells)?;
        if let Some(i) = cells.iter().position(|&v| v <= 0.0) {
            return Err(Error::domain(format!("model cell {i} is not strictly positive")));
        }
        Ok(ProbabilityVector { cells, kind: VectorKind::Model })
    }

    /// An estimated vector; empty cells allowed.
    pub fn empirical(cells: Vec<f64>) -> Result<Self> {
        check_sum(&cells)?;
        Ok(ProbabilityVector { cells, kind: VectorKind::Empirical })
    }

    /// A model vector that may contain cells below [`DEGENERATE_CELL`];
    /// such vectors are marked [`VectorKind::Degenerate`].
    pub fn model_or_degenerate(cells: Vec<f64>) -> Result<Self> {
        check_sum(&cells)?;
        let kind = if cells.iter().any(|&v| v < DEGENERATE_CELL) {
            VectorKind::Degenerate
        } else {
            VectorKind::Model
        };
        Ok(ProbabilityVector { cells, kind })
    }

    /// Rescales nonnegative weights to sum 1 and builds a model vector.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::domain("weights must have a positive finite sum"));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// p + 1 equiprobable cells.
    pub fn uniform(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::domain("need at least one cell"));
        }
        Ok(ProbabilityVector { cells: vec![1.0 / cells as f64; cells], kind: VectorKind::Model })
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Number of free parameters p (cells minus one).
    pub fn p(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    pub fn has_empty_cell(&self) -> bool {
        self.cells.contains(&0.0)
    }
}

type Generator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex generator f with f(1) = f'(1) = 0 and f''(1) = 1.
#[derive(Clone)]
pub struct DivergenceKernel {
    value: Generator,
    at_zero: ExtReal,
    slope_at_infinity: ExtReal,
    d3: f64,
    d4: f64,
    alpha: Option<f64>,
}

impl fmt::Debug for DivergenceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DivergenceKernel")
            .field("alpha", &self.alpha)
            .field("at_zero", &self.at_zero)
            .field("d3", &self.d3)
            .field("d4", &self.d4)
            .finish()
    }
}

impl DivergenceKernel {
    /// The α-family generator f_α.
    pub fn alpha(alpha: f64) -> Self {
        let (d3, d4) = f_alpha_derivatives(alpha);
        DivergenceKernel {
            value: Arc::new(move |x| f_alpha_positive(alpha, x)),
            at_zero: f_alpha_at_zero(alpha),
            slope_at_infinity: f_alpha_at_zero(-alpha),
            d3,
            d4,
            alpha: Some(alpha),
        }
    }

    /// A user-supplied generator.
    ///
    /// `value` is only called on (0, ∞). `at_zero` is lim_{x→0⁺} f(x) and
    /// `slope_at_infinity` is lim_{x→∞} f(x)/x (the dual generator's value
    /// at 0). `d3`, `d4` are f'''(1) and f''''(1).
    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        at_zero: ExtReal,
        slope_at_infinity: ExtReal,
        d3: f64,
        d4: f64,
    ) -> Self {
        DivergenceKernel {
            value: Arc::new(value),
            at_zero,
            slope_at_infinity,
            d3,
            d4,
            alpha: None,
        }
    }

    /// The dual generator f*(x) = x f(1/x), for which D_{f*}[a : b] = D_f[b : a].
    ///
    /// f*'''(1) = −3 − f'''(1) and f*''''(1) = 12 + 8 f'''(1) + f''''(1).
    pub fn dual(&self) -> Self {
        if let Some(a) = self.alpha {
            return DivergenceKernel::alpha(-a);
        }
        let f = Arc::clone(&self.value);
        DivergenceKernel {
            value: Arc::new(move |x| x * f(1.0 / x)),
            at_zero: self.slope_at_infinity,
            slope_at_infinity: self.at_zero,
            d3: -3.0 - self.d3,
            d4: 12.0 + 8.0 * self.d3 + self.d4,
            alpha: None,
        }
    }

    /// f(x) for x ≥ 0, with the declared limit at 0.
    pub fn value(&self, x: f64) -> Result<ExtReal> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::domain(format!("generator argument must be >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(self.at_zero);
        }
        ExtReal::from_f64((self.value)(x))
            .ok_or_else(|| Error::domain(format!("generator is not finite at {x}")))
    }

    pub fn at_zero(&self) -> ExtReal {
        self.at_zero
    }

    /// f'''(1).
    pub fn d3(&self) -> f64 {
        self.d3
    }

    /// f''''(1).
    pub fn d4(&self) -> f64 {
        self.d4
    }

    pub fn alpha_tag(&self) -> Option<f64> {
        self.alpha
    }
}

// x > 0 only.
fn f_alpha_positive(alpha: f64, x: f64) -> f64 {
    if alpha == 1.0 {
        x * x.ln() + 1.0 - x
    } else if alpha == -1.0 {
        -x.ln() + x - 1.0
    } else {
        // 2/(1−α)·[(x − 1) − 2/(1+α)·(x^β − 1)], factored so the two
        // O(1/(1−α)) pieces cancel inside the bracket.
        let beta = 0.5 * (1.0 + alpha);
        2.0 / (1.0 - alpha) * ((x - 1.0) - 2.0 / (1.0 + alpha) * (beta * x.ln()).exp_m1())
    }
}

fn f_alpha_at_zero(alpha: f64) -> ExtReal {
    if alpha > -1.0 {
        ExtReal::Finite(2.0 / (1.0 + alpha))
    } else {
        ExtReal::PosInf
    }
}

/// f_α(x), with the ±1 branches selected by exact comparison.
///
/// At x = 0 the limit is returned: 2/(1+α) for α > −1 and +∞ otherwise.
pub fn f_alpha_value(alpha: f64, x: f64) -> Result<ExtReal> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("f_alpha needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(f_alpha_at_zero(alpha));
    }
    Ok(ExtReal::Finite(f_alpha_positive(alpha, x)))
}

/// (f_α'''(1), f_α''''(1)) = ((α−3)/2, (α−3)(α−5)/4).
pub fn f_alpha_derivatives(alpha: f64) -> (f64, f64) {
    ((alpha - 3.0) / 2.0, (alpha - 3.0) * (alpha - 5.0) / 4.0)
}

/// Σ m1ᵢ f(m2ᵢ / m1ᵢ).
///
/// `m1` must be strictly positive; `m2` may contain zeros, which contribute
/// m1ᵢ·f(0⁺) and make the result +∞ for generators unbounded at 0.
pub fn f_divergence(
    f: &DivergenceKernel,
    m1: &ProbabilityVector,
    m2: &ProbabilityVector,
) -> Result<ExtReal> {
    f_divergence_cells(f, m1.cells(), m2.cells())
}

/// [`f_divergence`] on raw slices; used by the simulation hot loop.
pub fn f_divergence_cells(f: &DivergenceKernel, m1: &[f64], m2: &[f64]) -> Result<ExtReal> {
    if m1.len() != m2.len() {
        return Err(Error::Shape(m1.len(), m2.len()));
    }
    let mut acc = 0.0;
    for (i, (&a, &b)) in m1.iter().zip(m2).enumerate() {
        if !(a > 0.0) {
            return Err(Error::domain(format!("reference cell {i} is not strictly positive")));
        }
        match f.value(b / a)? {
            ExtReal::Finite(v) => acc += a * v,
            ExtReal::PosInf => return Ok(ExtReal::PosInf),
        }
    }
    Ok(ExtReal::Finite(acc))
}

pub fn alpha_divergence(alpha: f64, m1: &ProbabilityVector, m2: &ProbabilityVector) -> Result<ExtReal> {
    f_divergence(&DivergenceKernel::alpha(alpha), m1, m2)
}

/// ½(D_α + D_−α), symmetric in its arguments.
pub fn sym_alpha_divergence(
    alpha: f64,
    m1: &ProbabilityVector,
    m2: &ProbabilityVector,
) -> Result<ExtReal> {
    let a = alpha_divergence(alpha, m1, m2)?;
    let b = alpha_divergence(-alpha, m1, m2)?;
    Ok((a + b).scale(0.5))
}

/// Kernel selection as written in configs and on the command line:
/// `alpha:<value>` or `sym-alpha:<value>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Alpha(f64),
    SymAlpha(f64),
}

impl KernelSpec {
    pub fn alpha(&self) -> f64 {
        match *self {
            KernelSpec::Alpha(a) | KernelSpec::SymAlpha(a) => a,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, KernelSpec::SymAlpha(_))
    }

    /// A prepared evaluator; builds the generator(s) once.
    pub fn evaluator(&self) -> KernelEvaluator {
        match *self {
            KernelSpec::Alpha(a) => KernelEvaluator { kernels: vec![DivergenceKernel::alpha(a)] },
            KernelSpec::SymAlpha(a) => KernelEvaluator {
                kernels: vec![DivergenceKernel::alpha(a), DivergenceKernel::alpha(-a)],
            },
        }
    }
}

/// Averages the divergences of one or two generators.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    kernels: Vec<DivergenceKernel>,
}

impl KernelEvaluator {
    pub fn divergence(&self, m: &[f64], m_hat: &[f64]) -> Result<ExtReal> {
        let mut total = ExtReal::ZERO;
        for k in &self.kernels {
            total = total + f_divergence_cells(k, m, m_hat)?;
        }
        Ok(total.scale(1.0 / self.kernels.len() as f64))
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("kernel must look like alpha:<v>, got {s:?}")))?;
        let a: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad alpha in kernel {s:?}")))?;
        if !a.is_finite() {
            return Err(Error::Parse(format!("alpha must be finite in {s:?}")));
        }
        match tag.trim() {
            "alpha" => Ok(KernelSpec::Alpha(a)),
            "sym-alpha" => Ok(KernelSpec::SymAlpha(a)),
            "custom" => Err(Error::Parse("custom kernels are not available from text".into())),
            other => Err(Error::Parse(format!("unknown kernel family {other:?}"))),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Alpha(a) => write!(f, "alpha:{a}"),
            KernelSpec::SymAlpha(a) => write!(f, "sym-alpha:{a}"),
        }
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
