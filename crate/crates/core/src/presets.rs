//! The three reference experiments: N(0,1) and a skew-t on a half-unit grid,
//! and Beta(2,5) on tenths of [0, 1]. All use p = 9, decile levels for the
//! moving-interval side, the symmetrized α = 1 kernel and n = 100 as the
//! reference size.

use serde::{Deserialize, Serialize};

use crate::asymptotic::{ed_i_alpha_sym, ed_p_star, equivalent_sample_size, KernelKind, RiskExpansion};
use crate::discretize::{cell_probabilities, m_statistic, FixedPartition, QuantileDesign};
use crate::distributions::{make_beta, make_normal, make_skew_t, Mother};
use crate::divergence::KernelSpec;
use crate::montecarlo::Scheme;
use crate::{Error, ExtReal, Result};

pub const NAMES: [&str; 3] = ["normal-paper", "skewt-paper", "beta-paper"];

/// Skewness parameter and degrees of freedom of the skew-t preset (Hansen's
/// family; df = ∞ is its skewed-normal limit).
pub const SKEWT_PARAMS: (f64, f64) = (0.8, f64::INFINITY);

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: String,
    pub mother: Mother,
    pub partition: FixedPartition,
    pub levels: QuantileDesign,
    pub alpha: f64,
    pub reference_n: u64,
}

fn half_unit_grid() -> FixedPartition {
    FixedPartition::new((-4..=4).map(|i| i as f64 * 0.5).collect()).expect("valid grid")
}

fn tenths() -> FixedPartition {
    FixedPartition::new((1..10).map(|i| i as f64 / 10.0).collect()).expect("valid grid")
}

impl ExperimentPreset {
    fn build(name: &str, mother: Mother, partition: FixedPartition) -> Self {
        ExperimentPreset {
            name: name.to_string(),
            mother,
            partition,
            levels: QuantileDesign::equiprobable(10).expect("deciles"),
            alpha: 1.0,
            reference_n: 100,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "normal-paper" => Self::build(name, make_normal(0.0, 1.0)?, half_unit_grid()),
            "skewt-paper" => Self::build(name, make_skew_t(SKEWT_PARAMS.0, SKEWT_PARAMS.1)?, half_unit_grid()),
            "beta-paper" => Self::build(name, make_beta(2.0, 5.0)?, tenths()),
            other => return Err(Error::UnknownPreset(other.to_string())),
        })
    }

    pub fn all() -> Vec<Self> {
        NAMES.iter().map(|n| Self::by_name(n).expect("built-in preset")).collect()
    }

    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::SymAlpha(self.alpha)
    }

    pub fn fixed_scheme(&self) -> Scheme {
        Scheme::Fixed { partition: self.partition.clone(), mother: self.mother.clone() }
    }

    pub fn moving_scheme(&self) -> Scheme {
        Scheme::Moving { design: self.levels.clone(), mother: self.mother.clone() }
    }

    pub fn fixed_cells(&self) -> Result<Vec<f64>> {
        Ok(cell_probabilities(&self.mother, &self.partition)?.cells().to_vec())
    }

    pub fn fixed_expansion(&self) -> Result<RiskExpansion> {
        let m = cell_probabilities(&self.mother, &self.partition)?;
        ed_i_alpha_sym(self.alpha, m.p(), m_statistic(&m).to_f64())
    }

    /// Randomized moving-interval expansion; its r̄ depends on n.
    pub fn moving_expansion(&self, n: u64) -> Result<RiskExpansion> {
        ed_p_star(&KernelKind::alpha_sym(self.alpha), &self.levels.target(), &self.levels.fractional_parts(n))
    }

    /// The fixed-interval sample size whose expansion matches the moving-interval
    /// expansion at `reference_n`.
    pub fn equivalent_n(&self) -> Result<EquivalentN> {
        let fixed = self.fixed_expansion()?;
        let moving = self.moving_expansion(self.reference_n)?;
        let target = moving.value(self.reference_n as f64).to_f64();
        let n = equivalent_sample_size(&fixed, target)?;
        let cells = self.fixed_cells()?;
        Ok(EquivalentN {
            preset: self.name.clone(),
            n,
            reference_n: self.reference_n,
            target,
            m_statistic: fixed_m(&cells),
            fixed_cells: cells,
            fixed,
            moving,
        })
    }

    /// Both expansions over a grid of n.
    pub fn figure_curve(&self, n_grid: &[u64]) -> Result<Vec<FigureRow>> {
        let fixed = self.fixed_expansion()?;
        n_grid
            .iter()
            .map(|&n| {
                if n == 0 {
                    return Err(Error::domain("n must be positive"));
                }
                Ok(FigureRow {
                    n,
                    ed_i_expansion: fixed.value(n as f64),
                    ed_p_star_expansion: self.moving_expansion(n)?.value(n as f64),
                })
            })
            .collect()
    }

    pub fn summary(&self) -> Result<PresetSummary> {
        Ok(PresetSummary {
            name: self.name.clone(),
            mother: self.mother.to_string(),
            partition: self.partition.endpoints().to_vec(),
            levels: self.levels.levels().to_vec(),
            alpha: self.alpha,
            reference_n: self.reference_n,
            fixed_cells: self.fixed_cells()?,
        })
    }
}

fn fixed_m(cells: &[f64]) -> ExtReal {
    crate::divergence::ProbabilityVector::model_or_degenerate(cells.to_vec())
        .map(|m| m_statistic(&m))
        .unwrap_or(ExtReal::PosInf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetSummary {
    pub name: String,
    pub mother: String,
    pub partition: Vec<f64>,
    pub levels: Vec<f64>,
    pub alpha: f64,
    pub reference_n: u64,
    pub fixed_cells: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalentN {
    pub preset: String,
    pub n: f64,
    pub reference_n: u64,
    /// Moving-interval expansion value at `reference_n`.
    pub target: f64,
    pub m_statistic: ExtReal,
    pub fixed_cells: Vec<f64>,
    pub fixed: RiskExpansion,
    pub moving: RiskExpansion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub n: u64,
    pub ed_i_expansion: ExtReal,
    pub ed_p_star_expansion: ExtReal,
}

pub const FIGURE_HEADER: &str = "n,ed_i_expansion,ed_p_star_expansion";

pub fn figure_to_csv(rows: &[FigureRow]) -> String {
    let mut out = String::from(FIGURE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.n, r.ed_i_expansion, r.ed_p_star_expansion));
    }
    out
}
