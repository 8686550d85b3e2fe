use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::scalar::{lit, Real};

/// Generator for one replica: ChaCha8 keyed by `seed`, on stream `replica`.
///
/// ChaCha is a counter-based cipher, so every (seed, replica) pair gets its
/// own reproducible sequence independent of how replicas are scheduled.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[inline]
pub(crate) fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    lit(rng.sample::<f64, _>(StandardNormal))
}

#[inline]
pub(crate) fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    lit(rng.random::<f64>())
}

/// Splits `n` tasks into `replicas` contiguous chunks, runs chunk k with
/// `replica_rng(seed, first_replica + k)` in parallel, and returns the chunk
/// results in replica order. The output does not depend on the thread count.
pub fn run_replicas<F, Out>(n: usize, replicas: usize, seed: u64, first_replica: u64, f: F) -> Vec<Out>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Out + Sync,
    Out: Send,
{
    let replicas = replicas.max(1);
    (0..replicas)
        .into_par_iter()
        .map(|k| {
            let count = n / replicas + usize::from(k < n % replicas);
            let mut rng = replica_rng(seed, first_replica + k as u64);
            f(count, &mut rng)
        })
        .collect()
}
