use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rank_transform, ObservationPanel};
use crate::error::{Error, Result};

/// Contiguous blocks of `block_length` rows covering 0..n_rows (the last
/// block may be short), plus the seed of the resampling stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPlan {
    block_length: usize,
    n_rows: usize,
    seed: u64,
}

impl BlockPlan {
    pub fn new(n_rows: usize, block_length: usize, seed: u64) -> Result<Self> {
        if block_length == 0 || block_length > n_rows {
            return Err(Error::Config(format!(
                "block length {block_length} must be in 1..={n_rows}"
            )));
        }
        Ok(Self {
            block_length,
            n_rows,
            seed,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_blocks(&self) -> usize {
        self.n_rows.div_ceil(self.block_length)
    }

    pub fn blocks(&self) -> Vec<Range<usize>> {
        (0..self.n_blocks())
            .map(|b| b * self.block_length..((b + 1) * self.block_length).min(self.n_rows))
            .collect()
    }

    /// Row indices of one resample: blocks drawn with replacement and
    /// concatenated, truncated to the original length.
    pub fn draw_rows(&self) -> Vec<usize> {
        let blocks = self.blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut rows = Vec::with_capacity(self.n_rows + self.block_length);
        while rows.len() < self.n_rows {
            let b = &blocks[rng.random_range(0..blocks.len())];
            rows.extend(b.clone());
        }
        rows.truncate(self.n_rows);
        rows
    }
}

/// Block-bootstrap resample of `panel`, re-ranked on the resample.
pub fn block_bootstrap(panel: &ObservationPanel, plan: &BlockPlan) -> Result<ObservationPanel> {
    if plan.n_rows != panel.n_rows() {
        return Err(Error::Config(format!(
            "plan covers {} rows but the panel has {}",
            plan.n_rows,
            panel.n_rows()
        )));
    }
    let resampled = panel.select_rows(&plan.draw_rows());
    Ok(rank_transform(&resampled, 0).0)
}
