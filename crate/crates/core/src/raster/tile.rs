//! Row-block tiling and deterministic reductions.
//!
//! Grids larger than the tile budget are split into contiguous row blocks
//! that may run on a rayon pool. Every reduction first produces one partial
//! per row and then folds the rows in index order, so results do not depend
//! on tile size or thread count.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{Error, Result};

/// Default pixel budget for a single tile.
pub const DEFAULT_TILE_PIXELS: usize = 1 << 20;

/// How grid work is partitioned and where it runs.
#[derive(Clone)]
pub struct Tiling {
    tile_pixels: Option<usize>,
    pool: Option<Arc<ThreadPool>>,
}

impl std::fmt::Debug for Tiling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tiling")
            .field("tile_pixels", &self.tile_pixels)
            .field(
                "threads",
                &self.pool.as_ref().map(|p| p.current_num_threads()),
            )
            .finish()
    }
}

impl Default for Tiling {
    fn default() -> Self {
        Tiling {
            tile_pixels: Some(DEFAULT_TILE_PIXELS),
            pool: None,
        }
    }
}

impl Tiling {
    /// Whole grid as one block on the calling thread.
    pub fn untiled() -> Self {
        Tiling {
            tile_pixels: None,
            pool: None,
        }
    }

    /// Blocks of at most `tile_pixels` pixels (at least one row each) on the
    /// global rayon pool.
    pub fn with_tile_pixels(tile_pixels: usize) -> Self {
        Tiling {
            tile_pixels: Some(tile_pixels.max(1)),
            pool: None,
        }
    }

    /// Runs tiles on a dedicated pool of `threads` workers.
    pub fn with_threads(mut self, threads: usize) -> Result<Self> {
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::InvalidData(format!("thread pool: {e}")))?;
        self.pool = Some(Arc::new(pool));
        Ok(self)
    }

    pub fn tile_pixels(&self) -> Option<usize> {
        self.tile_pixels
    }

    /// Row ranges covering `0..height`.
    pub fn row_blocks(&self, width: usize, height: usize) -> Vec<Range<usize>> {
        let rows = match self.tile_pixels {
            None => height.max(1),
            Some(budget) => (budget / width.max(1)).max(1),
        };
        (0..height)
            .step_by(rows)
            .map(|s| s..(s + rows).min(height))
            .collect()
    }

    /// Applies `f` to each row block and concatenates the outputs in row order.
    pub fn map_rows<T, F>(&self, width: usize, height: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> Vec<T> + Sync,
    {
        let blocks = self.row_blocks(width, height);
        if blocks.len() <= 1 && self.pool.is_none() {
            return blocks.into_iter().flat_map(&f).collect();
        }
        let run = || {
            blocks
                .into_par_iter()
                .map(&f)
                .collect::<Vec<Vec<T>>>()
                .into_iter()
                .flatten()
                .collect()
        };
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }

    /// Sums one `f64` partial per row, folding rows in order with
    /// compensated addition.
    pub fn sum_rows<F>(&self, width: usize, height: usize, row_sum: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let partials = self.map_rows(width, height, |rows| rows.map(&row_sum).collect());
        partials.into_iter().collect::<NeumaierSum>().value()
    }
}

/// Neumaier's compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
