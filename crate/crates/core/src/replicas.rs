//! Replica seeding and deterministic aggregation.
//!
//! Replica `i` of a run with seed `s` draws from the ChaCha8 generator seeded
//! with `s` and switched to stream `i`. Replicas are grouped into fixed-size
//! chunks; each chunk is folded sequentially and chunk results are merged in
//! index order, so the outcome does not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

/// Replicas per chunk.
pub const CHUNK: u64 = 4096;

/// Generator for replica `index` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, index: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Number of worker threads; `0` lets the thread pool decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workers(pub usize);

impl Workers {
    pub const SINGLE: Workers = Workers(1);
}

/// Folds `n` replicas. `step` receives the accumulator, the replica index and
/// that replica's generator; `merge` combines chunk accumulators in order.
pub fn fold_replicas<A, I, S, M>(
    n: u64,
    seed: u64,
    workers: Workers,
    identity: I,
    step: S,
    merge: M,
) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64, &mut ReplicaRng) + Sync,
    M: Fn(&mut A, A),
{
    let n_chunks = n.div_ceil(CHUNK);
    let run_chunk = |c: u64| {
        let mut acc = identity();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let mut rng = replica_rng(seed, i);
            step(&mut acc, i, &mut rng);
        }
        acc
    };
    let parts = chunk_results(n_chunks, workers, &run_chunk);
    let mut total = identity();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// Maps every replica to a value, returned in replica order.
pub fn map_replicas<T, F>(n: u64, seed: u64, workers: Workers, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ReplicaRng) -> T + Sync,
{
    fold_replicas(
        n,
        seed,
        workers,
        Vec::new,
        |acc, i, rng| acc.push(f(i, rng)),
        |acc, mut part| acc.append(&mut part),
    )
}

#[cfg(feature = "parallel")]
fn chunk_results<A, F>(n_chunks: u64, workers: Workers, run_chunk: &F) -> Vec<A>
where
    A: Send,
    F: Fn(u64) -> A + Sync,
{
    use rayon::prelude::*;
    if workers.0 == 1 || n_chunks <= 1 {
        return (0..n_chunks).map(run_chunk).collect();
    }
    let collect = || (0..n_chunks).into_par_iter().map(run_chunk).collect();
    if workers.0 == 0 {
        return collect();
    }
    match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.0)
        .build()
    {
        Ok(pool) => pool.install(collect),
        Err(_) => collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn chunk_results<A, F>(n_chunks: u64, _workers: Workers, run_chunk: &F) -> Vec<A>
where
    A: Send,
    F: Fn(u64) -> A + Sync,
{
    (0..n_chunks).map(run_chunk).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = replica_rng(5, 0).random();
        let b: u64 = replica_rng(4, 1).random();
        let c: u64 = replica_rng(5, 1).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, replica_rng(5, 0).random::<u64>());
    }

    #[test]
    fn fold_is_worker_independent() {
        let run = |w| {
            fold_replicas(
                10_000,
                3,
                Workers(w),
                || 0.0f64,
                |acc, _, rng| *acc += rng.random::<f64>(),
                |acc, p| *acc += p,
            )
        };
        let one = run(1);
        assert_eq!(one.to_bits(), run(2).to_bits());
        assert_eq!(one.to_bits(), run(0).to_bits());
        let v = map_replicas(9000, 3, Workers(2), |i, _| i);
        assert_eq!(v, (0..9000).collect::<Vec<_>>());
    }
}
