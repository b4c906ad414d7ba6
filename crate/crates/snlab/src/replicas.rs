//! Replica fan-out. Replicas are independent by construction (disjoint
//! derived seeds), aggregation is order-independent, and results come back
//! indexed by replica, so the parallel and sequential paths are bit-identical.

use crate::rng::StreamKey;

/// Derived master seed of replica `r`.
pub fn replica_seed(seed: u64, r: u32) -> u64 {
    StreamKey::root(seed, "replica").with(u64::from(r)).u64_at(0)
}

/// Map `f` over replica indices sequentially.
pub fn run_replicas_seq<T, F>(replicas: u32, f: F) -> Vec<T>
where
    F: Fn(u32) -> T,
{
    (0..replicas).map(f).collect()
}

/// Map `f` over replica indices, in parallel when the `parallel` feature is
/// enabled. Results are ordered by replica index either way.
#[cfg(feature = "parallel")]
pub fn run_replicas<T, F>(replicas: u32, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u32) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..replicas).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_replicas<T, F>(replicas: u32, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u32) -> T + Sync + Send,
{
    run_replicas_seq(replicas, f)
}
