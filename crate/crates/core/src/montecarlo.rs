//! Seeded Monte Carlo risk estimation for both schemes.
//!
//! Replication `i` draws from ChaCha8 stream `i` of the configured seed, and
//! replications are grouped into fixed-size chunks whose summaries are merged
//! in chunk order. Results are therefore bit-identical for any thread count.
//!
//! Infinite divergences (an empty cell under a kernel with f(0) = ∞) are left
//! out of the mean and standard error and reported as `infinite_fraction`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{ed_i_for, ed_p_star, KernelKind, RiskExpansion};
use crate::discretize::{
    cell_probabilities, draw_ranks, m_statistic, realized_cells, FixedPartition, QuantileDesign, RankChoice,
};
use crate::distributions::{Mother, MotherDistribution};
use crate::divergence::{KernelEvaluator, KernelSpec, VectorKind};
use crate::{Error, ExtReal, Result};

const CHUNK: u64 = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    Fixed { partition: FixedPartition, mother: Mother },
    Moving { design: QuantileDesign, mother: Mother },
}

impl Scheme {
    pub fn p(&self) -> usize {
        match self {
            Scheme::Fixed { partition, .. } => partition.p(),
            Scheme::Moving { design, .. } => design.p(),
        }
    }

    pub fn mother(&self) -> &Mother {
        match self {
            Scheme::Fixed { mother, .. } | Scheme::Moving { mother, .. } => mother,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCConfig {
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    /// Mean over finite replications; +∞ if none were finite.
    pub mean: ExtReal,
    /// NaN (JSON null) with fewer than two finite replications.
    #[serde(with = "nan_as_null")]
    pub std_error: f64,
    pub reps: u64,
    pub finite_reps: u64,
    pub infinite_fraction: f64,
    pub zero_cell_fraction: f64,
}

impl RiskEstimate {
    /// Normal-approximation interval mean ± z·SE.
    pub fn interval(&self, z: f64) -> Option<(f64, f64)> {
        let m = self.mean.finite()?;
        Some((m - z * self.std_error, m + z * self.std_error))
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Welford) -> Welford {
        if self.count == 0 {
            return o;
        }
        if o.count == 0 {
            return self;
        }
        let count = self.count + o.count;
        let d = o.mean - self.mean;
        let w = o.count as f64 / count as f64;
        Welford {
            count,
            mean: self.mean + d * w,
            m2: self.m2 + o.m2 + d * d * self.count as f64 * w,
        }
    }
}

#[derive(Debug, Clone)]
struct Tally {
    reps: u64,
    zero_cells: u64,
    finite: Vec<Welford>,
    infinite: Vec<u64>,
    // paired differences (kernel 0 of two pipelines) for common random numbers
    diff: Welford,
}

impl Tally {
    fn new(kernels: usize) -> Self {
        Tally { reps: 0, zero_cells: 0, finite: vec![Welford::default(); kernels], infinite: vec![0; kernels], diff: Welford::default() }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.reps += o.reps;
        self.zero_cells += o.zero_cells;
        for (a, b) in self.finite.iter_mut().zip(o.finite) {
            *a = a.merge(b);
        }
        for (a, b) in self.infinite.iter_mut().zip(o.infinite) {
            *a += b;
        }
        self.diff = self.diff.merge(o.diff);
        self
    }

    fn estimate(&self, k: usize) -> RiskEstimate {
        let w = self.finite[k];
        let (mean, std_error) = match w.count {
            0 => (ExtReal::PosInf, f64::NAN),
            1 => (ExtReal::Finite(w.mean), f64::NAN),
            c => (ExtReal::Finite(w.mean), (w.m2 / (c - 1) as f64 / c as f64).sqrt()),
        };
        RiskEstimate {
            mean,
            std_error,
            reps: self.reps,
            finite_reps: w.count,
            infinite_fraction: self.infinite[k] as f64 / self.reps as f64,
            zero_cell_fraction: self.zero_cells as f64 / self.reps as f64,
        }
    }
}

// Pairwise reduction in index order.
fn reduce(mut parts: Vec<Tally>) -> Tally {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("at least one chunk")
}

/// One scheme's per-replication state.
struct Pipeline<'a> {
    scheme: &'a Scheme,
    n: usize,
    target: Vec<f64>,
    choices: Vec<RankChoice>,
    sample: Vec<f64>,
    counts: Vec<u64>,
    ranks: Vec<u64>,
    hat: Vec<f64>,
}

impl<'a> Pipeline<'a> {
    fn new(scheme: &'a Scheme, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("sample size must be at least 1"));
        }
        let (target, choices) = match scheme {
            Scheme::Fixed { partition, mother } => {
                let m = cell_probabilities(mother, partition)?;
                if m.kind() == VectorKind::Degenerate {
                    return Err(Error::domain(format!("partition has a cell with no mass under {mother}")));
                }
                (m.cells().to_vec(), Vec::new())
            }
            Scheme::Moving { design, .. } => {
                (design.target().cells().to_vec(), design.rank_choices(n as u64)?)
            }
        };
        let cells = scheme.p() + 1;
        Ok(Pipeline {
            scheme,
            n,
            target,
            choices,
            sample: vec![0.0; n],
            counts: vec![0; cells],
            ranks: Vec::with_capacity(cells),
            hat: vec![0.0; cells],
        })
    }

    // Fills `hat` from a fresh sample; returns whether a cell came out empty.
    fn replicate(&mut self, rng: &mut ChaCha8Rng) -> Result<bool> {
        let mother = self.scheme.mother();
        for x in self.sample.iter_mut() {
            *x = mother.sample(rng);
        }
        self.estimate_from_sample(rng)
    }

    fn estimate_from_sample(&mut self, rng: &mut ChaCha8Rng) -> Result<bool> {
        match self.scheme {
            Scheme::Fixed { partition, .. } => {
                self.counts.iter_mut().for_each(|c| *c = 0);
                for &x in &self.sample {
                    self.counts[partition.cell_of(x)] += 1;
                }
                let n = self.n as f64;
                for (h, &c) in self.hat.iter_mut().zip(&self.counts) {
                    *h = c as f64 / n;
                }
                Ok(self.counts.contains(&0))
            }
            Scheme::Moving { mother, .. } => {
                self.sample.sort_unstable_by(f64::total_cmp);
                draw_ranks(&self.choices, rng, &mut self.ranks)?;
                realized_cells(mother, &self.ranks, &self.sample, &mut self.hat)?;
                Ok(self.hat.contains(&0.0))
            }
        }
    }
}

fn record(t: &mut Tally, k: usize, d: ExtReal) {
    match d {
        ExtReal::Finite(v) => t.finite[k].push(v),
        ExtReal::PosInf => t.infinite[k] += 1,
    }
}

fn chunk_ranges(reps: u64) -> Vec<(u64, u64)> {
    (0..reps.div_ceil(CHUNK)).map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(reps))).collect()
}

fn rep_rng(base: &ChaCha8Rng, rep: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(rep);
    rng.set_word_pos(0);
    rng
}

/// Estimates the risk of one scheme under several kernels from the same
/// replications.
pub fn estimate_many(
    scheme: &Scheme,
    kernels: &[KernelSpec],
    n: usize,
    reps: u64,
    seed: u64,
) -> Result<Vec<RiskEstimate>> {
    if reps < 1 {
        return Err(Error::domain("reps must be at least 1"));
    }
    if kernels.is_empty() {
        return Err(Error::domain("no kernels given"));
    }
    Pipeline::new(scheme, n)?;
    let evals: Vec<KernelEvaluator> = kernels.iter().map(|k| k.evaluator()).collect();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let parts = chunk_ranges(reps)
        .into_par_iter()
        .map(|(lo, hi)| -> Result<Tally> {
            let mut pipe = Pipeline::new(scheme, n)?;
            let mut t = Tally::new(evals.len());
            for rep in lo..hi {
                let mut rng = rep_rng(&base, rep);
                let empty = pipe.replicate(&mut rng)?;
                t.reps += 1;
                t.zero_cells += empty as u64;
                for (k, e) in evals.iter().enumerate() {
                    record(&mut t, k, e.divergence(&pipe.target, &pipe.hat)?);
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = reduce(parts);
    Ok((0..kernels.len()).map(|k| total.estimate(k)).collect())
}

pub fn estimate_risk(cfg: &MCConfig) -> Result<RiskEstimate> {
    let mut v = estimate_many(&cfg.scheme, &[cfg.kernel], cfg.n, cfg.reps, cfg.seed)?;
    Ok(v.remove(0))
}

/// Risk of the multinomial MLE on a fixed partition.
pub fn estimate_fixed_risk(cfg: &MCConfig) -> Result<RiskEstimate> {
    if !matches!(cfg.scheme, Scheme::Fixed { .. }) {
        return Err(Error::domain("estimate_fixed_risk needs a fixed scheme"));
    }
    estimate_risk(cfg)
}

/// Risk of the moving-interval estimate under the randomized rank rule.
pub fn estimate_moving_risk(cfg: &MCConfig) -> Result<RiskEstimate> {
    if !matches!(cfg.scheme, Scheme::Moving { .. }) {
        return Err(Error::domain("estimate_moving_risk needs a moving scheme"));
    }
    estimate_risk(cfg)
}

/// Both schemes' risks and their difference (fixed − moving).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub fixed: RiskEstimate,
    pub moving: RiskEstimate,
    #[serde(with = "nan_as_null")]
    pub difference: f64,
    #[serde(with = "nan_as_null")]
    pub difference_se: f64,
    pub common_random_numbers: bool,
}

/// Compares the schemes on one kernel. With `common_random_numbers` each
/// replication feeds the same sample to both schemes and the standard error is
/// that of the paired differences; otherwise the schemes run on independent
/// seeds.
pub fn compare_schemes(
    fixed: &Scheme,
    moving: &Scheme,
    kernel: KernelSpec,
    n: usize,
    reps: u64,
    seed: u64,
    common_random_numbers: bool,
) -> Result<SchemeComparison> {
    let (Scheme::Fixed { mother: mf, .. }, Scheme::Moving { mother: mm, .. }) = (fixed, moving) else {
        return Err(Error::domain("compare_schemes takes a fixed and a moving scheme"));
    };
    if !common_random_numbers {
        let f = estimate_many(fixed, &[kernel], n, reps, seed)?.remove(0);
        let m = estimate_many(moving, &[kernel], n, reps, seed ^ 0x9E37_79B9_7F4A_7C15)?.remove(0);
        let difference = f.mean.to_f64() - m.mean.to_f64();
        let difference_se = f.std_error.hypot(m.std_error);
        return Ok(SchemeComparison { fixed: f, moving: m, difference, difference_se, common_random_numbers });
    }
    if mf != mm {
        return Err(Error::domain("common random numbers need the same mother in both schemes"));
    }
    if reps < 1 {
        return Err(Error::domain("reps must be at least 1"));
    }
    Pipeline::new(fixed, n)?;
    Pipeline::new(moving, n)?;
    let eval = kernel.evaluator();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let parts = chunk_ranges(reps)
        .into_par_iter()
        .map(|(lo, hi)| -> Result<(Tally, Tally)> {
            let mut pf = Pipeline::new(fixed, n)?;
            let mut pm = Pipeline::new(moving, n)?;
            let (mut tf, mut tm) = (Tally::new(1), Tally::new(1));
            for rep in lo..hi {
                let mut rng = rep_rng(&base, rep);
                let empty = pf.replicate(&mut rng)?;
                pm.sample.copy_from_slice(&pf.sample);
                let tied = pm.estimate_from_sample(&mut rng)?;
                let df = eval.divergence(&pf.target, &pf.hat)?;
                let dm = eval.divergence(&pm.target, &pm.hat)?;
                tf.reps += 1;
                tm.reps += 1;
                tf.zero_cells += empty as u64;
                tm.zero_cells += tied as u64;
                record(&mut tf, 0, df);
                record(&mut tm, 0, dm);
                if let (ExtReal::Finite(a), ExtReal::Finite(b)) = (df, dm) {
                    tf.diff.push(a - b);
                }
            }
            Ok((tf, tm))
        })
        .collect::<Result<Vec<_>>>()?;
    let (pf, pm): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let (tf, tm) = (reduce(pf), reduce(pm));
    let d = tf.diff;
    let difference_se = if d.count > 1 { (d.m2 / (d.count - 1) as f64 / d.count as f64).sqrt() } else { f64::NAN };
    Ok(SchemeComparison {
        fixed: tf.estimate(0),
        moving: tm.estimate(0),
        difference: d.mean,
        difference_se,
        common_random_numbers,
    })
}

fn kernel_kind(kernel: KernelSpec) -> KernelKind {
    if kernel.is_symmetric() {
        KernelKind::alpha_sym(kernel.alpha())
    } else {
        KernelKind::alpha(kernel.alpha())
    }
}

/// The expansion matching a scheme: the fixed-interval form for a partition,
/// the randomized moving-interval form for a design.
pub fn expansion_for(scheme: &Scheme, kernel: KernelSpec, n: u64) -> Result<RiskExpansion> {
    let kind = kernel_kind(kernel);
    match scheme {
        Scheme::Fixed { partition, mother } => {
            let m = cell_probabilities(mother, partition)?;
            ed_i_for(&kind, m.p(), m_statistic(&m).to_f64())
        }
        Scheme::Moving { design, .. } => ed_p_star(&kind, &design.target(), &design.fractional_parts(n)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: u64,
    pub mc_mean: ExtReal,
    #[serde(with = "nan_as_null")]
    pub mc_se: f64,
    pub expansion: ExtReal,
}

/// Monte Carlo risk and expansion value at every n of the grid.
pub fn risk_curve(scheme: &Scheme, kernel: KernelSpec, n_grid: &[u64], reps: u64, seed: u64) -> Result<Vec<CurveRow>> {
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::domain("n grid must be nonempty and positive"));
    }
    n_grid
        .iter()
        .map(|&n| {
            let est = estimate_many(scheme, &[kernel], n as usize, reps, seed)?.remove(0);
            let expansion = expansion_for(scheme, kernel, n)?.value(n as f64);
            Ok(CurveRow { n, mc_mean: est.mean, mc_se: est.std_error, expansion })
        })
        .collect()
}

pub const CURVE_HEADER: &str = "n,mc_mean,mc_se,expansion";

pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.n, r.mc_mean, r.mc_se, r.expansion));
    }
    out
}
