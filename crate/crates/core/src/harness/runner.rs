use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Seed domains, so equal indices in different batches draw unrelated streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedDomain {
    Dataset = 1,
    Calibration = 2,
    Training = 3,
    Update = 4,
    Evaluation = 5,
    Simulate = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based child seed of `root` for item `index` of `domain`.
pub fn derive_seed(root: u64, domain: SeedDomain, index: u64) -> u64 {
    splitmix(splitmix(root ^ splitmix(domain as u64)) ^ index)
}

pub fn derive_rng(root: u64, domain: SeedDomain, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, domain, index))
}

/// Worker pool whose results come back in index order regardless of the
/// thread count.
pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `threads == 0` uses every available core.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }

    /// Like [`Runner::map`], stopping at the first error in index order.
    pub fn try_map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}
