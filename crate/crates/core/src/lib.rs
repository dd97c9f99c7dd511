//! # binrisk
//!
//! Risk analysis for two ways of discretizing an unknown continuous
//! distribution into a multinomial model:
//!
//! | Scheme | Interval endpoints | Estimated cell probabilities |
//! |--------|--------------------|------------------------------|
//! | fixed interval | chosen before sampling | counts / n (the MLE) |
//! | moving interval | order statistics at chosen percentile ranks | percentile spacings λᵢ₊₁ − λᵢ |
//!
//! The discrepancy between the true and estimated multinomial is measured by an
//! f-divergence (usually the α-family or its symmetrized |α| version), and the
//! risk is its expectation. The crate provides:
//!
//! - [`divergence`]: f-divergences, the α-family, duals, generator derivatives.
//! - [`distributions`]: mother distributions (normal, beta, Hansen skew-t, uniform).
//! - [`discretize`]: fixed partitions, quantile designs, the randomized rank rule.
//! - [`asymptotic`]: second-order risk expansions `p/(2n) + c2/n²`, upper bounds,
//!   the dominance gap and the equivalent-sample-size solver.
//! - [`oracle`]: exact referees (order-statistic moments, exhaustive multinomial
//!   enumeration) in big-rational arithmetic.
//! - [`montecarlo`]: seeded, thread-count-independent risk simulation.
//! - [`presets`]: the three reference experiments (normal, skew-t, beta).
//!
//! ```
//! use binrisk::asymptotic::{ed_i_alpha_sym, equivalent_sample_size};
//!
//! // p = 9 cells-minus-one, α = 1, M = Σ 1/mᵢ for equiprobable cells.
//! let fixed = ed_i_alpha_sym(1.0, 9, 100.0).unwrap();
//! assert_eq!(fixed.c1, 4.5);
//! let n = equivalent_sample_size(&fixed, fixed.value(100.0).to_f64()).unwrap();
//! assert!((n - 100.0).abs() < 1e-9);
//! ```

pub mod asymptotic;
pub mod discretize;
pub mod distributions;
pub mod divergence;
mod error;
mod ext;
pub mod montecarlo;
pub mod oracle;
pub mod presets;
pub mod special;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use ext::ExtReal;
