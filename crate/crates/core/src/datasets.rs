//! Published example data.

use crate::data::SummaryStats;

/// Per-subject group sizes of the 16-subject pulse-oximetry comparison study.
pub const OXIMETRY_M: [usize; 16] = [9, 10, 10, 10, 5, 10, 10, 10, 10, 10, 10, 10, 2, 10, 10, 10];

/// Per-subject mean differences (%SpO₂) of the oximetry study.
pub const OXIMETRY_MEANS: [f64; 16] = [
    -0.026, 0.447, 0.083, -0.103, -2.587, -0.610, 0.040, -0.593, 0.963, 0.643, -0.200, -1.337,
    -4.333, -2.807, 0.563, -0.797,
];

/// Within-subject sum of squares (%²) of the oximetry study.
pub const OXIMETRY_SSE: f64 = 221.037;

/// The oximetry study as sufficient statistics.
pub fn oximetry() -> SummaryStats {
    SummaryStats::new(OXIMETRY_M.to_vec(), OXIMETRY_MEANS.to_vec(), OXIMETRY_SSE)
        .expect("bundled dataset is valid")
}
