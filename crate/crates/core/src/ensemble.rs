//! Counter-based replica streams and the data-parallel ensemble driver.
//!
//! Replica `r` of a study seeded with `master` always draws from the ChaCha
//! stream `(master, r)`, so an ensemble result does not depend on how replicas
//! are scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Identifies one replica's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub replica: u64,
}

impl SeedRecord {
    pub fn new(master: u64, replica: u64) -> Self {
        SeedRecord { master, replica }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        replica_rng(self.master, self.replica)
    }
}

/// ChaCha stream for replica `replica` of the run seeded with `master`.
pub fn replica_rng(master: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replica);
    rng
}

/// Run `f` once per replica index, sequentially.
pub fn map_replicas_seq<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n as u64).map(f).collect()
}

/// Run `f` once per replica index on the rayon pool. Output order matches
/// replica order regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn map_replicas_par<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Ensemble driver used by every study: parallel when the `parallel` feature
/// is enabled, sequential otherwise.
pub fn map_replicas<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        map_replicas_par(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_replicas_seq(n, f)
    }
}
