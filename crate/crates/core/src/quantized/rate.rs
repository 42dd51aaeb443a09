//! Bit-rate accounting for quantized episodes.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::quantized::algorithm::EpisodeLog;
use crate::quantized::codec::width;
use crate::setgeom::{grid, Hyperrect};

/// Episodes shorter than this are dominated by the first message.
pub const MIN_STEADY_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitRateReport {
    pub steps: usize,
    pub total_bits: u64,
    /// `total_bits / (steps τ)`.
    pub average_rate: f64,
    pub initial_bits: u64,
    /// Bits per window once the grid has its steady shape.
    pub steady_bits_per_step: u64,
    /// Cells per steady grid, `⌈e^{(L+α)τ}⌉^n`.
    pub steady_cells: u64,
    pub steady_rate: f64,
    /// Average over windows after the first; `None` for one-step episodes.
    pub measured_steady_rate: Option<f64>,
    /// `n (L + α) / ln 2`.
    pub asymptote: f64,
    /// `steady_rate - asymptote`, the cost of integer grid sizes and widths.
    pub ceiling_gap: f64,
    /// Fewer than [`MIN_STEADY_STEPS`] windows.
    pub transient: bool,
}

/// Cells of a steady-state grid, built with the same grid routine the
/// protocol uses.
pub fn steady_cells(n: usize, l_tau: f64, alpha: f64, tau: f64) -> Result<u64> {
    let unit = Hyperrect::ball(vec![0.0; n], 1.0)?;
    grid(&unit, (-(l_tau + alpha) * tau).exp())?.len()
}

pub fn bit_rate(log: &EpisodeLog) -> Result<BitRateReport> {
    let cfg = &log.header.config;
    let n = log.header.q.dim();
    let steps = log.steps.len();
    let cells = steady_cells(n, cfg.l_tau, cfg.alpha, cfg.tau)?;
    let steady_bits = width(cells) as u64;
    let steady_rate = steady_bits as f64 / cfg.tau;
    let asymptote = n as f64 * (cfg.l_tau + cfg.alpha) / std::f64::consts::LN_2;
    let later: u64 = log.steps.iter().skip(1).map(|s| s.bits.len() as u64).sum();
    Ok(BitRateReport {
        steps,
        total_bits: log.total_bits,
        average_rate: if steps == 0 { 0.0 } else { log.total_bits as f64 / (steps as f64 * cfg.tau) },
        initial_bits: log.steps.first().map_or(0, |s| s.bits.len() as u64),
        steady_bits_per_step: steady_bits,
        steady_cells: cells,
        steady_rate,
        measured_steady_rate: (steps > 1).then(|| later as f64 / ((steps - 1) as f64 * cfg.tau)),
        asymptote,
        ceiling_gap: steady_rate - asymptote,
        transient: steps < MIN_STEADY_STEPS,
    })
}
