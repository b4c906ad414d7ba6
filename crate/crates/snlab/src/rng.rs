//! Counter-based random number streams.
//!
//! Every random quantity in the crate is a pure function of one 64-bit master
//! seed and a derivation path: `seed -> stream tag -> index words -> counter`.
//! A [`StreamKey`] folds the path into a 64-bit base; drawing the value at a
//! counter is a single SplitMix64-style avalanche, so any (vertex, walker,
//! step) cell can be read in any order, any number of times, on any thread,
//! and always yields the same value. This is what makes walker trajectories
//! independent of the density and replicas reproducible under rayon.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a 64-bit avalanche bijection.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A derived random stream: the folded key plus a counter index the value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    /// Root key for a named stream of a master seed.
    pub fn root(seed: u64, tag: &str) -> Self {
        let mut key = StreamKey(mix64(seed ^ GOLDEN));
        for chunk in tag.as_bytes().chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            key = key.with(u64::from_le_bytes(word));
        }
        key.with(tag.len() as u64)
    }

    /// Fold one more index word (vertex id, walker index, replica, ...).
    #[inline]
    pub fn with(self, word: u64) -> Self {
        StreamKey(mix64(self.0.wrapping_add(GOLDEN).wrapping_add(word)))
    }

    /// Raw 64-bit draw at a counter.
    #[inline]
    pub fn u64_at(self, counter: u64) -> u64 {
        mix64(self.0.wrapping_add(counter.wrapping_mul(GOLDEN)).wrapping_add(GOLDEN))
    }

    /// Uniform draw in `[0, 1)` at a counter.
    #[inline]
    pub fn uniform_at(self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exp(1) draw at a counter, by inversion.
    #[inline]
    pub fn exp_at(self, counter: u64) -> f64 {
        -(-self.uniform_at(counter)).ln_1p()
    }
}

/// Sequential view over a stream, for consumers that draw in order.
#[derive(Clone, Debug)]
pub struct SeqStream {
    key: StreamKey,
    counter: u64,
}

impl SeqStream {
    pub fn new(key: StreamKey) -> Self {
        SeqStream { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = self.key.u64_at(self.counter);
        self.counter += 1;
        v
    }

    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        let v = self.key.uniform_at(self.counter);
        self.counter += 1;
        v
    }

    #[inline]
    pub fn next_poisson(&mut self, lambda: f64) -> u32 {
        poisson_inverse(self.next_uniform(), lambda)
    }
}

/// Poisson quantile by sequential inversion; consumes exactly one uniform.
///
/// Accurate for the desk-scale means used here (lambda up to ~60; the term
/// `e^-lambda` stays well above the subnormal range).
pub fn poisson_inverse(u: f64, lambda: f64) -> u32 {
    debug_assert!((0.0..1.0).contains(&u));
    if lambda <= 0.0 {
        return 0;
    }
    let mut term = (-lambda).exp();
    let mut cum = term;
    let mut k = 0u32;
    while u >= cum {
        k += 1;
        term *= lambda / f64::from(k);
        cum += term;
        if k > 100_000 {
            break; // unreachable for sane lambda; guards against NaN input
        }
    }
    k
}

/// Quantile of Poisson(lambda) conditioned on being positive.
///
/// Maps `u` into the conditional tail and inverts; one uniform per draw so
/// the value is a monotone function of `(u, lambda)`, which is what couples
/// occupancy-forced counts across a density grid.
pub fn poisson_positive_inverse(u: f64, lambda: f64) -> u32 {
    debug_assert!((0.0..1.0).contains(&u));
    if lambda <= 0.0 {
        return 1; // degenerate conditional law at lambda -> 0
    }
    let p0 = (-lambda).exp();
    let shifted = p0 + u * (1.0 - p0);
    poisson_inverse(shifted, lambda).max(1)
}

/// Number of arrivals of a unit-rate Poisson process in `[0, lambda]`,
/// realized as cumulative Exp(1) sums read off the keyed stream.
pub fn arrival_count(key: StreamKey, lambda: f64) -> u32 {
    let mut sum = 0.0;
    let mut i = 0u64;
    loop {
        sum += key.exp_at(i);
        if sum > lambda {
            return i as u32;
        }
        i += 1;
    }
}

/// Arrival times of the unit-rate process up to `lambda_max`, in order.
pub fn arrival_times(key: StreamKey, lambda_max: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let mut sum = 0.0;
    let mut i = 0u64;
    loop {
        sum += key.exp_at(i);
        if sum > lambda_max {
            return times;
        }
        times.push(sum);
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_replayable_and_distinct() {
        let a = StreamKey::root(7, "walk").with(3).with(0);
        let b = StreamKey::root(7, "walk").with(3).with(1);
        assert_eq!(a.u64_at(5), a.u64_at(5));
        assert_ne!(a.u64_at(5), b.u64_at(5));
        assert_ne!(a.u64_at(5), a.u64_at(6));
        let c = StreamKey::root(8, "walk").with(3).with(0);
        assert_ne!(a.u64_at(5), c.u64_at(5));
    }

    #[test]
    fn uniform_range_and_mean() {
        let key = StreamKey::root(1, "unif");
        let n = 200_000u64;
        let mut sum = 0.0;
        for i in 0..n {
            let u = key.uniform_at(i);
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "uniform mean {mean}");
    }

    #[test]
    fn poisson_inverse_matches_moments() {
        let key = StreamKey::root(2, "pois");
        let lambda = 3.25;
        let n = 200_000u64;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for i in 0..n {
            let k = f64::from(poisson_inverse(key.uniform_at(i), lambda));
            sum += k;
            sumsq += k * k;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((mean - lambda).abs() < 0.03, "mean {mean}");
        assert!((var / lambda - 1.0).abs() < 0.03, "dispersion {}", var / lambda);
    }

    #[test]
    fn positive_poisson_is_positive_and_monotone_in_lambda() {
        let key = StreamKey::root(3, "forc");
        for i in 0..20_000u64 {
            let u = key.uniform_at(i);
            let small = poisson_positive_inverse(u, 0.05);
            let large = poisson_positive_inverse(u, 2.0);
            assert!(small >= 1);
            assert!(large >= small, "coupled counts must be monotone");
        }
    }

    #[test]
    fn arrival_counts_are_nested_across_lambda() {
        let key = StreamKey::root(4, "arr");
        for v in 0..2_000u64 {
            let k = key.with(v);
            let a = arrival_count(k, 0.3);
            let b = arrival_count(k, 1.0);
            let c = arrival_count(k, 3.0);
            assert!(a <= b && b <= c);
        }
    }

    #[test]
    fn arrival_count_mean_matches_rate() {
        let key = StreamKey::root(5, "arrm");
        let n = 100_000u64;
        let mut sum = 0u64;
        for v in 0..n {
            sum += u64::from(arrival_count(key.with(v), 1.0));
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }
}
