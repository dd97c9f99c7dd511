//! Mother distributions: the unknown continuous law being discretized.
//!
//! Every distribution exposes a CDF, a survival function, a density, a
//! sampler and a quantile function. Quantiles are obtained by inverting the
//! CDF numerically ([`crate::special::invert_cdf`]), one code path for all
//! families.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::special::{self, invert_cdf};
use crate::{Error, Result};

/// CDF / quantile / sampler triple for a continuous law on ℝ.
///
/// Implementations must be immutable after construction. `cdf(-∞) = 0` and
/// `cdf(+∞) = 1` are required so that partitions can use infinite endpoints.
pub trait MotherDistribution: Send + Sync {
    fn cdf(&self, x: f64) -> f64;

    /// 1 − cdf(x). Override where the upper tail can be computed directly.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    fn pdf(&self, x: f64) -> f64;

    /// Closed support interval `(lo, hi)`; endpoints may be infinite.
    fn support(&self) -> (f64, f64);

    fn sample(&self, rng: &mut dyn RngCore) -> f64;

    fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if u <= 0.0 {
            return lo;
        }
        if u >= 1.0 {
            return hi;
        }
        invert_cdf(|x| self.cdf(x), |x| self.pdf(x), u, (lo, hi))
    }
}

/// P(a, b) = F(b) − F(a), the mother probability of the interval (a, b).
///
/// Endpoints may be ±∞. Intervals lying in the upper half are differenced
/// through the survival function so small upper-tail cells keep their
/// relative precision.
pub fn interval_probability<D: MotherDistribution + ?Sized>(d: &D, a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::domain(format!("interval requires a < b, got ({a}, {b})")));
    }
    let fa = d.cdf(a);
    let p = if fa > 0.5 { d.sf(a) - d.sf(b) } else { d.cdf(b) - fa };
    Ok(p.clamp(0.0, 1.0))
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        check_finite("lower bound", lo)?;
        check_finite("upper bound", hi)?;
        if lo >= hi {
            return Err(Error::domain(format!("uniform needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(Uniform { lo, hi })
    }

    pub fn standard() -> Self {
        Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl MotherDistribution for Uniform {
    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn sf(&self, x: f64) -> f64 {
        ((self.hi - x) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn pdf(&self, x: f64) -> f64 {
        if x >= self.lo && x <= self.hi {
            1.0 / (self.hi - self.lo)
        } else {
            0.0
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }

    fn quantile(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) * u.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    mean: f64,
    sd: f64,
}

impl Normal {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        check_finite("mean", mean)?;
        check_finite("sd", sd)?;
        if sd <= 0.0 {
            return Err(Error::domain(format!("normal sd must be positive, got {sd}")));
        }
        Ok(Normal { mean, sd })
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

impl MotherDistribution for Normal {
    fn cdf(&self, x: f64) -> f64 {
        special::normal_cdf(self.z(x))
    }

    fn sf(&self, x: f64) -> f64 {
        special::normal_sf(self.z(x))
    }

    fn pdf(&self, x: f64) -> f64 {
        special::normal_pdf(self.z(x)) / self.sd
    }

    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.sd * z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beta {
    a: f64,
    b: f64,
    ln_norm: f64,
    sampler: rand_distr::Beta<f64>,
}

impl Beta {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        check_finite("beta shape a", a)?;
        check_finite("beta shape b", b)?;
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::domain(format!("beta shapes must be positive, got ({a}, {b})")));
        }
        let sampler = rand_distr::Beta::new(a, b).map_err(|e| Error::domain(e.to_string()))?;
        Ok(Beta { a, b, ln_norm: special::ln_beta(a, b), sampler })
    }
}

impl MotherDistribution for Beta {
    fn cdf(&self, x: f64) -> f64 {
        special::beta_reg(self.a, self.b, x)
    }

    fn sf(&self, x: f64) -> f64 {
        special::beta_reg(self.b, self.a, 1.0 - x)
    }

    fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        ((self.a - 1.0) * x.ln() + (self.b - 1.0) * (1.0 - x).ln() - self.ln_norm).exp()
    }

    fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.sampler.sample(rng)
    }
}

/// Hansen's skewed Student-t, standardized to mean 0 and variance 1.
///
/// `skew` ∈ (−1, 1) stretches the right half by (1 + skew) and the left half
/// by (1 − skew) around the mode −a/b; `df` > 2 degrees of freedom, with
/// `df = ∞` giving the skewed-normal limit. With y = (b·z + a)/(1 ∓ skew)
/// on either side of the mode, the density is b·g(y) where g is the
/// unit-variance t density.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewT {
    skew: f64,
    df: f64,
    a: f64,
    b: f64,
    core: Option<StudentT<f64>>,
}

impl SkewT {
    pub fn new(skew: f64, df: f64) -> Result<Self> {
        if !(skew.is_finite() && skew.abs() < 1.0) {
            return Err(Error::domain(format!("skew-t skewness must lie in (-1, 1), got {skew}")));
        }
        if df.is_nan() || df <= 2.0 {
            return Err(Error::domain(format!(
                "skew-t needs df > 2 for a finite variance, got {df}"
            )));
        }
        let (a, core) = if df.is_infinite() {
            (4.0 * skew / (2.0 * std::f64::consts::PI).sqrt(), None)
        } else {
            let ln_c = special::ln_gamma(0.5 * (df + 1.0))
                - special::ln_gamma(0.5 * df)
                - 0.5 * (std::f64::consts::PI * (df - 2.0)).ln();
            let t = StudentT::new(df).map_err(|e| Error::domain(e.to_string()))?;
            (4.0 * skew * ln_c.exp() * (df - 2.0) / (df - 1.0), Some(t))
        };
        let b2 = 1.0 + 3.0 * skew * skew - a * a;
        if b2 <= 0.0 {
            return Err(Error::domain(format!("skewness {skew} infeasible for df {df}")));
        }
        Ok(SkewT { skew, df, a, b: b2.sqrt(), core })
    }

    pub fn skew(&self) -> f64 {
        self.skew
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    // Unit-variance t: CDF, density and variate.
    fn std_cdf(&self, y: f64) -> f64 {
        if self.df.is_infinite() {
            special::normal_cdf(y)
        } else {
            special::student_t_cdf(y * (self.df / (self.df - 2.0)).sqrt(), self.df)
        }
    }

    fn std_pdf(&self, y: f64) -> f64 {
        if self.df.is_infinite() {
            special::normal_pdf(y)
        } else {
            let s = (self.df / (self.df - 2.0)).sqrt();
            s * special::student_t_pdf(y * s, self.df)
        }
    }

    fn mode(&self) -> f64 {
        -self.a / self.b
    }

    fn half_scale(&self, z: f64) -> f64 {
        if z < self.mode() {
            1.0 - self.skew
        } else {
            1.0 + self.skew
        }
    }
}

impl MotherDistribution for SkewT {
    fn cdf(&self, z: f64) -> f64 {
        if z == f64::NEG_INFINITY {
            return 0.0;
        }
        if z == f64::INFINITY {
            return 1.0;
        }
        let s = self.half_scale(z);
        let y = (self.b * z + self.a) / s;
        if z < self.mode() {
            s * self.std_cdf(y)
        } else {
            1.0 - s * self.std_cdf(-y)
        }
    }

    fn sf(&self, z: f64) -> f64 {
        if z >= self.mode() {
            if z == f64::INFINITY {
                return 0.0;
            }
            let s = self.half_scale(z);
            s * self.std_cdf(-(self.b * z + self.a) / s)
        } else {
            1.0 - self.cdf(z)
        }
    }

    fn pdf(&self, z: f64) -> f64 {
        let s = self.half_scale(z);
        self.b * self.std_pdf((self.b * z + self.a) / s)
    }

    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let y: f64 = match &self.core {
            None => StandardNormal.sample(rng),
            Some(t) => t.sample(rng) * ((self.df - 2.0) / self.df).sqrt(),
        };
        let left = rng.random::<f64>() < 0.5 * (1.0 - self.skew);
        let y = if left {
            -(1.0 - self.skew) * y.abs()
        } else {
            (1.0 + self.skew) * y.abs()
        };
        (y - self.a) / self.b
    }
}

/// The built-in families, addressable by string id.
///
/// Ids: `uniform`, `uniform(lo,hi)`, `normal(mu,sd)`, `beta(a,b)`,
/// `skewt(skew,df)` with `df` possibly `inf`.
#[derive(Debug, Clone, PartialEq)]
pub enum Mother {
    Uniform(Uniform),
    Normal(Normal),
    Beta(Beta),
    SkewT(SkewT),
}

pub fn make_normal(mean: f64, sd: f64) -> Result<Mother> {
    Normal::new(mean, sd).map(Mother::Normal)
}

pub fn make_beta(a: f64, b: f64) -> Result<Mother> {
    Beta::new(a, b).map(Mother::Beta)
}

pub fn make_skew_t(skewness: f64, df: f64) -> Result<Mother> {
    SkewT::new(skewness, df).map(Mother::SkewT)
}

pub fn make_uniform() -> Mother {
    Mother::Uniform(Uniform::standard())
}

impl Mother {
    fn inner(&self) -> &dyn MotherDistribution {
        match self {
            Mother::Uniform(d) => d,
            Mother::Normal(d) => d,
            Mother::Beta(d) => d,
            Mother::SkewT(d) => d,
        }
    }
}

impl MotherDistribution for Mother {
    fn cdf(&self, x: f64) -> f64 {
        self.inner().cdf(x)
    }
    fn sf(&self, x: f64) -> f64 {
        self.inner().sf(x)
    }
    fn pdf(&self, x: f64) -> f64 {
        self.inner().pdf(x)
    }
    fn support(&self) -> (f64, f64) {
        self.inner().support()
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.inner().sample(rng)
    }
    fn quantile(&self, u: f64) -> f64 {
        self.inner().quantile(u)
    }
}

fn parse_num(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => t
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("not a number: {t:?}"))),
    }
}

impl FromStr for Mother {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mother> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in {s:?}")))?;
                let args = close[open + 1..]
                    .split(',')
                    .map(parse_num)
                    .collect::<Result<Vec<_>>>()?;
                (&s[..open], args)
            }
            None => (s, Vec::new()),
        };
        let want = |k: usize| {
            if args.len() == k {
                Ok(())
            } else {
                Err(Error::Parse(format!("{name} takes {k} arguments, got {}", args.len())))
            }
        };
        match name.trim() {
            "uniform" if args.is_empty() => Ok(make_uniform()),
            "uniform" => {
                want(2)?;
                Ok(Mother::Uniform(Uniform::new(args[0], args[1])?))
            }
            "normal" => {
                want(2)?;
                make_normal(args[0], args[1])
            }
            "beta" => {
                want(2)?;
                make_beta(args[0], args[1])
            }
            "skewt" => {
                want(2)?;
                make_skew_t(args[0], args[1])
            }
            other => Err(Error::Parse(format!("unknown distribution {other:?}"))),
        }
    }
}

impl fmt::Display for Mother {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mother::Uniform(u) if u.lo == 0.0 && u.hi == 1.0 => f.write_str("uniform"),
            Mother::Uniform(u) => write!(f, "uniform({},{})", u.lo, u.hi),
            Mother::Normal(n) => write!(f, "normal({},{})", n.mean, n.sd),
            Mother::Beta(b) => write!(f, "beta({},{})", b.a, b.b),
            Mother::SkewT(t) if t.df.is_infinite() => write!(f, "skewt({},inf)", t.skew),
            Mother::SkewT(t) => write!(f, "skewt({},{})", t.skew, t.df),
        }
    }
}
