//! Mini-batch index streams.
//!
//! PU batches mix positives and unlabeled samples in proportion to pool
//! sizes, with at least one of each per batch. An epoch is one pass over
//! the unlabeled pool; the positive pool cycles through reshuffles as
//! needed, so scarce positives are revisited many times per epoch.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Splits `batch_size` between the two pools proportionally, clamped so
/// every batch holds at least one sample from each.
pub(crate) fn pu_batch_shape(batch_size: usize, n_p: usize, n_u: usize) -> (usize, usize) {
    let raw = (batch_size as f64 * n_p as f64 / (n_p + n_u) as f64).round() as usize;
    let p_per_batch = raw.clamp(1, batch_size - 1);
    (p_per_batch, batch_size - p_per_batch)
}

/// Endless positive draws: a shuffled pass over the pool, reshuffled on
/// wrap, handed out `per_draw` at a time.
pub(crate) struct PCycler {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    per_draw: usize,
}

impl PCycler {
    pub(crate) fn new(pool: Vec<usize>, per_draw: usize, seed: u64) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::data("positive pool is empty"));
        }
        if per_draw == 0 {
            return Err(Error::config("positive draw size must be positive"));
        }
        Ok(PCycler {
            order: pool,
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            per_draw,
        })
    }

    pub(crate) fn draw(&mut self) -> Vec<usize> {
        (0..self.per_draw)
            .map(|_| {
                if self.cursor == 0 {
                    self.order.shuffle(&mut self.rng);
                }
                let idx = self.order[self.cursor];
                self.cursor = (self.cursor + 1) % self.order.len();
                idx
            })
            .collect()
    }
}

/// One shuffled pass over the unlabeled pool per epoch, in chunks; the
/// final chunk keeps whatever remainder the pool leaves.
pub(crate) struct UChunker {
    pool: Vec<usize>,
    per_batch: usize,
    rng: ChaCha8Rng,
}

impl UChunker {
    pub(crate) fn new(pool: Vec<usize>, per_batch: usize, seed: u64) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::data("unlabeled pool is empty"));
        }
        if per_batch == 0 {
            return Err(Error::config("unlabeled chunk size must be positive"));
        }
        Ok(UChunker {
            pool,
            per_batch,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub(crate) fn epoch_chunks(&mut self) -> Vec<Vec<usize>> {
        let mut order = self.pool.clone();
        order.shuffle(&mut self.rng);
        order
            .chunks(self.per_batch)
            .map(|c| c.to_vec())
            .collect()
    }
}

/// The paired stream PU trainers consume: proportional mixed batches of
/// `(positive indices, unlabeled indices)`.
pub(crate) struct PuBatcher {
    p: PCycler,
    u: UChunker,
}

impl PuBatcher {
    pub(crate) fn new(
        p_pool: Vec<usize>,
        u_pool: Vec<usize>,
        batch_size: usize,
        p_seed: u64,
        u_seed: u64,
    ) -> Result<Self> {
        if batch_size < 2 {
            return Err(Error::config("PU batches need room for both pools"));
        }
        if p_pool.is_empty() {
            return Err(Error::data("positive pool is empty"));
        }
        if u_pool.is_empty() {
            return Err(Error::data("unlabeled pool is empty"));
        }
        let (p_per_batch, u_per_batch) = pu_batch_shape(batch_size, p_pool.len(), u_pool.len());
        Ok(PuBatcher {
            p: PCycler::new(p_pool, p_per_batch, p_seed)?,
            u: UChunker::new(u_pool, u_per_batch, u_seed)?,
        })
    }

    pub(crate) fn epoch_batches(&mut self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.u
            .epoch_chunks()
            .into_iter()
            .map(|chunk| (self.p.draw(), chunk))
            .collect()
    }
}

/// Plain shuffled mini-batches over `0..n` for supervised training.
pub(crate) struct SupervisedBatcher {
    n: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl SupervisedBatcher {
    pub(crate) fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::data("training set is empty"));
        }
        if batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        Ok(SupervisedBatcher {
            n,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub(crate) fn epoch_batches(&mut self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(&mut self.rng);
        order.chunks(self.batch_size).map(|c| c.to_vec()).collect()
    }
}
