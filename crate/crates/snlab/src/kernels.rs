//! Lazy simple random walk kernels: step laws, spectral radii, exact
//! distance-indexed transition tables on the d-regular tree, and the
//! inequalities those tables must satisfy.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::GraphFamily;

/// Step law of a lazy simple random walk: stay with probability `holding`,
/// otherwise move to a uniform neighbor. The two named regimes are
/// `holding = 1/2` and `holding = 1/(d+1)` (where staying and each move are
/// equally likely).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkKernel {
    pub degree: u32,
    pub holding: f64,
}

/// What a single uniform draw resolves to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepChoice {
    Stay,
    /// Index into the fixed neighbor order, `0..degree`.
    Neighbor(u32),
}

impl WalkKernel {
    pub fn new(degree: u32, holding: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&holding) {
            return Err(Error::domain("holding probability must lie in [0, 1)"));
        }
        Ok(WalkKernel { degree, holding })
    }

    /// Uniform holding for the given degree: h = 1/(d+1).
    pub fn uniform_holding(degree: u32) -> Self {
        WalkKernel {
            degree,
            holding: 1.0 / f64::from(degree + 1),
        }
    }

    pub fn half_holding(degree: u32) -> Self {
        WalkKernel {
            degree,
            holding: 0.5,
        }
    }

    /// Resolve one uniform draw into a step over `fan` directions.
    /// With `fan = degree` this is the infinite-graph law; the Absorb policy
    /// passes the in-window degree instead, renormalizing the move mass.
    #[inline]
    pub fn resolve(&self, u: f64, fan: u32) -> StepChoice {
        if u < self.holding || fan == 0 {
            return StepChoice::Stay;
        }
        let scaled = (u - self.holding) / (1.0 - self.holding) * f64::from(fan);
        let idx = (scaled as u32).min(fan - 1);
        StepChoice::Neighbor(idx)
    }
}

/// Spectral radius of the simple (non-lazy) walk on the family.
/// The d-regular tree gives 2*sqrt(d-1)/d; cycle and torus are amenable (1).
pub fn spectral_radius_srw(family: GraphFamily) -> f64 {
    match family {
        GraphFamily::RegularTree { degree } => {
            let d = f64::from(degree);
            2.0 * (d - 1.0).sqrt() / d
        }
        GraphFamily::Cycle { .. } | GraphFamily::Torus { .. } => 1.0,
    }
}

/// Spectral radius of the lazy walk: rho_h = h + (1-h) * rho_srw.
pub fn spectral_radius_lazy(family: GraphFamily, holding: f64) -> f64 {
    holding + (1.0 - holding) * spectral_radius_srw(family)
}

/// Distance-indexed t-step law of the lazy walk on the d-regular tree.
///
/// `q[t][k]` is the probability that the walk sits at distance `k` from its
/// start after `t` steps; `P^t(x, y) = q[t][k] / N_d(k)` for `k = d(x, y)`
/// by radial symmetry, with `N_d(k) = d (d-1)^(k-1)` vertices on the sphere.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub degree: u32,
    pub holding: f64,
    pub horizon: u32,
    q: Vec<Vec<f64>>,
}

/// Build the table by the radial dynamic program: from distance k >= 1 the
/// distance drops with probability (1-h)/d, grows with (1-h)(d-1)/d and holds
/// with h; from distance 0 every move grows.
pub fn tree_kernel(degree: u32, holding: f64, horizon: u32) -> Result<KernelTable> {
    if degree < 3 {
        return Err(Error::domain("kernel table requires a tree of degree >= 3"));
    }
    if !(0.0..1.0).contains(&holding) {
        return Err(Error::domain("holding probability must lie in [0, 1)"));
    }
    let d = f64::from(degree);
    let h = holding;
    let up = (1.0 - h) / d;
    let down = (1.0 - h) * (d - 1.0) / d;
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(horizon as usize + 1);
    q.push(vec![1.0]);
    for t in 0..horizon as usize {
        let prev = &q[t];
        let mut next = vec![0.0; t + 2];
        next[0] = prev[0] * h + prev.get(1).copied().unwrap_or(0.0) * up;
        for k in 1..=t + 1 {
            let mut p = prev.get(k).copied().unwrap_or(0.0) * h;
            if k >= 2 {
                p += prev.get(k - 1).copied().unwrap_or(0.0) * down;
            } else {
                p += prev[0] * (1.0 - h); // from the start every move grows
            }
            p += prev.get(k + 1).copied().unwrap_or(0.0) * up;
            next[k] = p;
        }
        q.push(next);
    }
    let table = KernelTable {
        degree,
        holding,
        horizon,
        q,
    };
    table.validate()?;
    Ok(table)
}

impl KernelTable {
    /// Probability of being at distance `k` after `t` steps.
    pub fn radial(&self, t: u32, k: u32) -> f64 {
        self.q[t as usize].get(k as usize).copied().unwrap_or(0.0)
    }

    /// Number of tree vertices at distance `k`.
    pub fn sphere_size(&self, k: u32) -> f64 {
        if k == 0 {
            1.0
        } else {
            f64::from(self.degree) * f64::from(self.degree - 1).powi(k as i32 - 1)
        }
    }

    /// Per-vertex transition probability P^t(x, y) at distance k = d(x, y).
    pub fn point(&self, t: u32, k: u32) -> f64 {
        self.radial(t, k) / self.sphere_size(k)
    }

    fn validate(&self) -> Result<()> {
        for (t, row) in self.q.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invariant(format!(
                    "kernel row {t} sums to {sum} (off by {})",
                    sum - 1.0
                )));
            }
        }
        Ok(())
    }

    /// CSV export: t, k, radial mass q, per-vertex probability P.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,k,q,p")?;
        for t in 0..=self.horizon {
            for k in 0..=t {
                writeln!(out, "{},{},{},{}", t, k, self.radial(t, k), self.point(t, k))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelBoundReport {
    /// min over (t, k) of rho^t - P^t(x, y); nonnegative iff the uniform
    /// exponential-decay bound holds everywhere.
    pub min_decay_slack: f64,
    /// min over t of P^(2 floor(t/2))(x, x) - max_k P^t; nonnegative iff the
    /// even-return-time domination holds everywhere.
    pub min_return_slack: f64,
}

/// Check, for every t <= horizon and every reachable distance k, that
/// P^t(x,y) <= rho^t and that sup_y P^t(x,y) <= P^(2 floor(t/2))(x,x).
pub fn check_kernel_bounds(table: &KernelTable) -> Result<KernelBoundReport> {
    let rho = spectral_radius_lazy(
        GraphFamily::RegularTree {
            degree: table.degree,
        },
        table.holding,
    );
    let mut min_decay = f64::INFINITY;
    let mut min_return = f64::INFINITY;
    for t in 0..=table.horizon {
        let bound = rho.powi(t as i32);
        let even_return = table.point(2 * (t / 2), 0);
        let mut max_point = 0.0f64;
        for k in 0..=t {
            let p = table.point(t, k);
            let slack = bound - p;
            if slack < min_decay {
                min_decay = slack;
            }
            if slack < -1e-13 {
                return Err(Error::invariant(format!(
                    "decay bound fails at (t={t}, k={k}): P={p} > rho^t={bound}"
                )));
            }
            max_point = max_point.max(p);
        }
        let slack = even_return - max_point;
        if slack < min_return {
            min_return = slack;
        }
        if slack < -1e-13 {
            return Err(Error::invariant(format!(
                "even-return bound fails at t={t}: max P={max_point} > {even_return}"
            )));
        }
    }
    Ok(KernelBoundReport {
        min_decay_slack: min_decay,
        min_return_slack: min_return,
    })
}

/// Probability that a lazy walk started at `a` spends steps 1..=t strictly
/// inside the left subtree below `a` (the tree hung on the floor((d-1)/2)
/// leftmost children: the root of that subtree has l children, interior
/// vertices d-1 children plus a parent). Requires holding 1/(d+1).
pub fn walk_survival_in_left_subtree(degree: u32, holding: f64, t: u32) -> Result<f64> {
    let expected = 1.0 / f64::from(degree + 1);
    if (holding - expected).abs() > 1e-12 {
        return Err(Error::domain(
            "left-subtree survival is defined for holding probability 1/(d+1)",
        ));
    }
    if t < 1 {
        return Err(Error::domain("survival horizon must be >= 1"));
    }
    if degree < 3 {
        return Err(Error::domain("requires degree >= 3"));
    }
    let d = f64::from(degree);
    let l = f64::from((degree - 1) / 2);
    let unit = 1.0 / (d + 1.0); // per-direction probability, also the holding
    // depth distribution inside the subtree, conditioned on survival so far
    let mut alive = vec![0.0f64; t as usize + 2];
    alive[1] = l * unit; // first step must enter one of the l left children
    for _ in 1..t {
        let mut next = vec![0.0f64; alive.len()];
        for k in 1..alive.len() - 1 {
            let mass = alive[k];
            if mass == 0.0 {
                continue;
            }
            next[k] += mass * unit; // hold
            next[k + 1] += mass * (d - 1.0) * unit; // deeper
            if k >= 2 {
                next[k - 1] += mass * unit; // toward a, still below it
            }
            // from depth 1 the parent step hits `a` and the walk dies
        }
        alive = next;
    }
    Ok(alive.iter().sum())
}

/// Large-t limit of the survival probability (monotone nonincreasing in t;
/// evaluated at a horizon where the tail has converged).
pub fn walk_survival_limit(degree: u32) -> f64 {
    walk_survival_in_left_subtree(degree, 1.0 / f64::from(degree + 1), 400)
        .expect("valid parameters")
}
