use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sum_rate, PowerAllocation, RatePoint};
use crate::error::{invalid, Result};
use crate::scheduler::build_schedule;
use crate::simulate::{Instance, SimOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub m: usize,
    pub n: usize,
    pub snr_db: Vec<f64>,
    /// Channel realizations averaged per SNR point.
    pub draws: usize,
    pub base_seed: u64,
    pub normalize: bool,
    pub allocation: PowerAllocation,
}

impl SweepConfig {
    pub fn new(m: usize, n: usize, snr_db: Vec<f64>) -> Self {
        Self { m, n, snr_db, draws: 200, base_seed: 0, normalize: true, allocation: PowerAllocation::EqualSymbol }
    }
}

/// Ergodic sum rate at each SNR: the same `draws` channel realizations are
/// used at every point, and results are merged in draw order so the output
/// does not depend on thread scheduling.
pub fn rate_sweep(cfg: &SweepConfig) -> Result<Vec<RatePoint>> {
    if cfg.draws == 0 || cfg.snr_db.is_empty() {
        return Err(invalid("sweep needs at least one draw and one SNR point"));
    }
    let schedule = build_schedule(cfg.m, cfg.n)?;
    let options = SimOptions { noise: true, normalize: cfg.normalize, symbol_power: 1.0 };
    let per_draw: Vec<Vec<RatePoint>> = (0..cfg.draws as u64)
        .into_par_iter()
        .map(|d| {
            let inst = Instance::run(&schedule, cfg.base_seed.wrapping_add(d), options)?;
            cfg.snr_db
                .iter()
                .map(|&snr| sum_rate(&inst.systems, snr, cfg.allocation))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = 1.0 / cfg.draws as f64;
    Ok(cfg
        .snr_db
        .iter()
        .enumerate()
        .map(|(s, &snr)| {
            let mut per_receiver = vec![0.0; cfg.n];
            for draw in &per_draw {
                for (acc, v) in per_receiver.iter_mut().zip(&draw[s].per_receiver) {
                    *acc += v;
                }
            }
            per_receiver.iter_mut().for_each(|v| *v *= scale);
            RatePoint { snr_db: snr, sum_rate: per_receiver.iter().sum(), per_receiver }
        })
        .collect())
}
