//! Partition a fixed sample budget into blocks so that iterating a
//! contraction d_{k+1} <= rho d_k + C / M_k halves the gap to the
//! contraction target each round.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ErmSchedule {
    /// Per-round batch sizes M_1..M_K.
    pub block_sizes: Vec<u64>,
    /// Guaranteed bound on the final distance: tau * ((1 + rho)/2)^K.
    pub final_bound: f64,
}

impl ErmSchedule {
    pub fn rounds(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn total_samples(&self) -> u64 {
        self.block_sizes.iter().sum()
    }

    /// Run the recursion d_{k+1} = rho d_k + C / M_k over the schedule and
    /// return the final value. Used as the independent check of the bound.
    pub fn simulate_recursion(&self, rho: f64, noise_constant: f64, initial: f64) -> f64 {
        let mut d = initial;
        for &m in &self.block_sizes {
            d = rho * d + noise_constant / m as f64;
        }
        d
    }
}

/// Greedy maximal schedule: each block is the smallest integer M_k with
/// rho d_k + C / M_k <= ((1 + rho)/2) d_k, i.e. M_k = ceil(2C / ((1-rho) d_k)),
/// and blocks are appended while the budget allows.
pub fn erm_schedule(
    total_samples: u64,
    contraction: f64,
    noise_constant: f64,
    initial_distance: f64,
) -> Result<ErmSchedule> {
    if total_samples == 0 {
        return Err(Error::InvalidInput("sample budget must be positive".into()));
    }
    if !(contraction > 0.0 && contraction < 1.0) {
        return Err(Error::InvalidInput("contraction must lie in (0, 1)".into()));
    }
    if noise_constant <= 0.0
        || initial_distance <= 0.0
        || !noise_constant.is_finite()
        || !initial_distance.is_finite()
    {
        return Err(Error::InvalidInput(
            "noise constant and initial distance must be positive".into(),
        ));
    }

    let half_rate = (1.0 + contraction) / 2.0;
    let mut d = initial_distance;
    let mut remaining = total_samples;
    let mut blocks = Vec::new();
    loop {
        let needed = (2.0 * noise_constant / ((1.0 - contraction) * d)).ceil();
        if !needed.is_finite() || needed > remaining as f64 {
            if blocks.is_empty() {
                return Err(Error::Infeasible {
                    needed: if needed.is_finite() { needed as u64 } else { u64::MAX },
                    available: total_samples,
                });
            }
            break;
        }
        let m = (needed as u64).max(1);
        remaining -= m;
        blocks.push(m);
        d *= half_rate;
    }

    let final_bound = initial_distance * half_rate.powi(blocks.len() as i32);
    Ok(ErmSchedule {
        block_sizes: blocks,
        final_bound,
    })
}
