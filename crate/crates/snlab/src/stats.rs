//! Small statistics helpers shared by the estimators and the test suites.

/// Streaming mean/variance accumulator (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub struct OnlineStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl OnlineStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    /// Variance-to-mean ratio (index of dispersion).
    pub fn dispersion(&self) -> f64 {
        if self.mean == 0.0 {
            0.0
        } else {
            self.variance() / self.mean
        }
    }
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Least-squares slope of `ys` against `xs`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Extinction probability by generation `depth` for a Galton-Watson tree with
/// Binomial(out_degree, p) offspring, iterated from the empty tree.
pub fn gw_extinction_by_depth(out_degree: u32, p: f64, depth: u32) -> f64 {
    let mut q = 0.0f64;
    for _ in 0..depth {
        q = (1.0 - p + p * q).powi(out_degree as i32);
    }
    q
}

/// Probability that the root component of a percolated tree with
/// `root_degree` root children and `out_degree` thereafter reaches `depth`.
pub fn gw_root_survival_to_depth(root_degree: u32, out_degree: u32, p: f64, depth: u32) -> f64 {
    if depth == 0 {
        return 1.0;
    }
    let q_child = gw_extinction_by_depth(out_degree, p, depth - 1);
    1.0 - (1.0 - p + p * q_child).powi(root_degree as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn online_stats_match_direct_computation() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let mut acc = OnlineStats::new();
        for &x in &xs {
            acc.push(x);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((acc.mean() - mean).abs() < 1e-12);
        assert!((acc.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate() {
        let (lo, hi) = wilson_interval(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(lo > 0.2 && hi < 0.41);
        let (lo0, hi0) = wilson_interval(0, 50);
        assert!(lo0.abs() < 1e-12);
        assert!(hi0 > 0.0 && hi0 < 0.12);
    }

    #[test]
    fn slope_of_exact_line() {
        let xs: Vec<f64> = (1..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 0.5 * x).collect();
        assert!((linear_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn extinction_iteration_converges_to_fixed_point() {
        // out-degree 2, p = 0.75: q solves q = (0.25 + 0.75 q)^2 => q = 1/9.
        let q = gw_extinction_by_depth(2, 0.75, 200);
        assert!((q - 1.0 / 9.0).abs() < 1e-10, "q = {q}");
        // At or below criticality (p_c = 1/2) extinction is certain.
        assert!(gw_extinction_by_depth(2, 0.5, 100_000) > 0.999);
        assert!(gw_extinction_by_depth(2, 0.3, 2_000) > 1.0 - 1e-10);
    }
}
