//! Lazy branching random walk used as the upper-bounding oracle for
//! friend-cluster visit counts.
//!
//! The process starts with 1 + Pois(lambda) particles at the root. At every
//! stage each particle takes one lazy step and then drops 2*Pois(lambda)
//! newborns at its new position; the particle itself carries on (it is the
//! deterministic "1" of the offspring law 1 + 2*Pois(lambda)). With
//! `Q_n(v)` the particles sitting at `v` right after the stage-n step and
//! before the stage-n births, the generation means satisfy
//! `E[Q_n(v)] = (1+lambda)(1+2lambda)^{n-1} P^n(o, v)` exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::GraphFamily;
use crate::kernels::{spectral_radius_lazy, KernelTable, StepChoice, WalkKernel};
use crate::rng::{SeqStream, StreamKey};

/// One particle: position as the root path on the infinite tree, plus its
/// parent in the birth forest.
#[derive(Clone, Debug)]
pub struct BrwParticle {
    pub id: u32,
    pub parent: Option<u32>,
    pub path: Vec<u8>,
}

/// Counts reported for one stage.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct StageCounts {
    /// Particles at the root right after the step (the Q_n(o) statistic).
    pub at_root_after_step: u32,
    /// Newborns dropped at the root during the stage.
    pub births_at_root: u32,
    /// Population including the newborns.
    pub population: u32,
}

/// Forward simulation of the branching walk on the infinite d-regular tree.
pub struct BrwSim {
    pub kernel: WalkKernel,
    pub lambda: f64,
    particles: Vec<BrwParticle>,
    rng: SeqStream,
    next_id: u32,
    stage: u32,
    /// Hard particle cap; supercritical runs that cross it are truncated.
    pub cap: usize,
    pub truncated: bool,
}

impl BrwSim {
    /// Start the process: 1 + Pois(lambda) particles at the root.
    pub fn new(kernel: WalkKernel, lambda: f64, seed: u64) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::domain("density must be nonnegative"));
        }
        let mut rng = SeqStream::new(StreamKey::root(seed, "brw"));
        let initial = 1 + rng.next_poisson(lambda);
        let particles = (0..initial)
            .map(|id| BrwParticle {
                id,
                parent: None,
                path: Vec::new(),
            })
            .collect();
        Ok(BrwSim {
            kernel,
            lambda,
            particles,
            rng,
            next_id: initial,
            stage: 0,
            cap: 10_000_000,
            truncated: false,
        })
    }

    pub fn population(&self) -> &[BrwParticle] {
        &self.particles
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    /// Advance one stage: every particle steps, then spawns 2*Pois(lambda)
    /// newborns at its position. Returns the stage counts.
    pub fn step_generation(&mut self) -> Result<StageCounts> {
        if self.particles.is_empty() {
            return Err(Error::domain("current generation is empty"));
        }
        self.stage += 1;
        let d = self.kernel.degree;
        let mut at_root = 0u32;
        let mut births_at_root = 0u32;
        let mut newborns: Vec<BrwParticle> = Vec::new();
        for i in 0..self.particles.len() {
            let u = self.rng.next_uniform();
            let fan = d; // every tree vertex has d neighbors
            match self.kernel.resolve(u, fan) {
                StepChoice::Stay => {}
                StepChoice::Neighbor(j) => {
                    let path = &mut self.particles[i].path;
                    if path.is_empty() {
                        path.push(j as u8);
                    } else if j == 0 {
                        path.pop();
                    } else {
                        path.push((j - 1) as u8);
                    }
                }
            }
            if self.particles[i].path.is_empty() {
                at_root += 1;
            }
            let kids = 2 * self.rng.next_poisson(self.lambda);
            for _ in 0..kids {
                let parent = self.particles[i].id;
                let path = self.particles[i].path.clone();
                if path.is_empty() {
                    births_at_root += 1;
                }
                newborns.push(BrwParticle {
                    id: self.next_id,
                    parent: Some(parent),
                    path,
                });
                self.next_id += 1;
            }
        }
        self.particles.extend(newborns);
        if self.particles.len() > self.cap {
            self.truncated = true;
            self.particles.truncate(self.cap);
        }
        Ok(StageCounts {
            at_root_after_step: at_root,
            births_at_root,
            population: self.particles.len() as u32,
        })
    }

    /// Particles currently at the given root path.
    pub fn count_at(&self, path: &[u8]) -> u32 {
        self.particles.iter().filter(|p| p.path == path).count() as u32
    }
}

/// Exact generation mean `(1+lambda)(1+2lambda)^{n-1} P^n(o, v)` for a vertex
/// at distance `k`, together with the bound `((1+2lambda) rho)^n`; errors if
/// the mean ever exceeded the bound.
pub fn expected_generation_mean(
    n: u32,
    lambda: f64,
    distance: u32,
    table: &KernelTable,
) -> Result<(f64, f64)> {
    let rho = spectral_radius_lazy(
        GraphFamily::RegularTree {
            degree: table.degree,
        },
        table.holding,
    );
    if n == 0 {
        // defined separately: the initial particles all sit at the root
        let value = if distance == 0 { 1.0 + lambda } else { 0.0 };
        return Ok((value, 1.0 + lambda));
    }
    let value =
        (1.0 + lambda) * (1.0 + 2.0 * lambda).powi(n as i32 - 1) * table.point(n, distance);
    let bound = ((1.0 + 2.0 * lambda) * rho).powi(n as i32);
    if value > bound * (1.0 + 1e-12) {
        return Err(Error::invariant(format!(
            "generation mean {value} exceeds its bound {bound} at n={n}, k={distance}"
        )));
    }
    Ok((value, bound))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SubcriticalReport {
    /// The density threshold (rho^{-1} - 1)/2.
    pub threshold: f64,
    pub rho: f64,
    /// Whether (1+2 lambda) rho < 1 at the queried density.
    pub contracting: bool,
}

/// Closed-form subcriticality verdict: total root visits of the branching
/// walk have finite mean iff (1+2 lambda) rho < 1, i.e. iff the density is
/// below (rho^{-1} - 1)/2. Amenable families give threshold 0 (vacuous).
pub fn subcritical_check(lambda: f64, family: GraphFamily, holding: f64) -> SubcriticalReport {
    let rho = spectral_radius_lazy(family, holding);
    let threshold = if rho < 1.0 { (1.0 / rho - 1.0) / 2.0 } else { 0.0 };
    SubcriticalReport {
        threshold,
        rho,
        contracting: (1.0 + 2.0 * lambda) * rho < 1.0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VisitStabilityReport {
    pub horizon: u32,
    pub mean_half: f64,
    pub mean_full: f64,
    pub tail_mean: f64,
    pub tail_se: f64,
    /// Tail contribution compatible with zero at 3 standard errors.
    pub stable: bool,
}

/// Monte Carlo stability of the total root-visit count under horizon
/// doubling: mean of sum_{n <= H} Q_n(o) versus sum_{n <= 2H} Q_n(o).
pub fn total_visit_stability(
    kernel: WalkKernel,
    lambda: f64,
    horizon_half: u32,
    replicas: u32,
    seed: u64,
) -> Result<VisitStabilityReport> {
    use crate::replicas::{replica_seed, run_replicas};
    use crate::stats::OnlineStats;
    let horizon = 2 * horizon_half;
    let runs = run_replicas(replicas, |r| {
        let mut sim = BrwSim::new(kernel, lambda, replica_seed(seed, r)).expect("valid");
        let mut half = f64::from(sim.count_at(&[]));
        let mut full = half;
        for n in 1..=horizon {
            let counts = sim.step_generation().expect("population alive");
            let q = f64::from(counts.at_root_after_step);
            if n <= horizon_half {
                half += q;
            }
            full += q;
        }
        (half, full)
    });
    let mut half_acc = OnlineStats::new();
    let mut tail_acc = OnlineStats::new();
    let mut full_acc = OnlineStats::new();
    for (half, full) in runs {
        half_acc.push(half);
        full_acc.push(full);
        tail_acc.push(full - half);
    }
    let stable = tail_acc.mean() <= 3.0 * tail_acc.stderr().max(1e-12);
    Ok(VisitStabilityReport {
        horizon,
        mean_half: half_acc.mean(),
        mean_full: full_acc.mean(),
        tail_mean: tail_acc.mean(),
        tail_se: tail_acc.stderr(),
        stable,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub lambda: f64,
    pub horizon: u32,
    pub replicas: u32,
    /// Mean visits to the root by walkers of the root's friend cluster,
    /// full trajectories included.
    pub cluster_visits_mean: f64,
    pub cluster_visits_se: f64,
    /// Mean visits to the root by branching-walk particles (births count).
    pub brw_visits_mean: f64,
    pub brw_visits_se: f64,
    pub mean_dominates: bool,
    /// Empirical CDF comparison at the 0.5 and 0.9 cluster-visit quantiles:
    /// the branching side must put at least as much mass above them.
    pub cdf_dominates_q50: bool,
    pub cdf_dominates_q90: bool,
}

/// Desk-scale shadow of the visit-count domination: compare root visits by
/// the friend cluster of the (occupancy-conditioned) root against root
/// visits of the branching walk run for the same number of stages.
pub fn domination_experiment(
    window: &crate::graphs::Window,
    kernel: WalkKernel,
    lambda: f64,
    horizon: u32,
    replicas: u32,
    seed: u64,
) -> Result<DominationReport> {
    use crate::replicas::{replica_seed, run_replicas};
    use crate::snsim::coupling::CouplingStream;
    use crate::snsim::field::realize_field;
    use crate::snsim::meetings::simulate_meetings;
    use crate::stats::OnlineStats;

    if !matches!(window.family, GraphFamily::RegularTree { .. }) {
        return Err(Error::domain("domination experiment runs on tree windows"));
    }
    let root = window.root();
    let cluster_runs = run_replicas(replicas, |r| -> Result<f64> {
        let stream = CouplingStream::new(replica_seed(seed, r));
        let field = realize_field(&stream, window, kernel, lambda, horizon, &[root])?;
        let (clusters, _) = simulate_meetings(&field)?;
        let members = clusters.friend_cluster(root, horizon);
        let mut visits = 0u64;
        for &w in &members {
            let walker = &field.walkers[w as usize];
            for t in 0..=horizon {
                if walker.is_active(t) && walker.position(t) == root {
                    visits += 1;
                }
            }
        }
        Ok(visits as f64)
    });
    let brw_runs = run_replicas(replicas, |r| {
        let mut sim =
            BrwSim::new(kernel, lambda, replica_seed(seed ^ 0x6272_7761, r)).expect("valid");
        let mut visits = f64::from(sim.count_at(&[])); // births at the root, stage 0
        for _ in 1..=horizon {
            let counts = sim.step_generation().expect("population alive");
            visits += f64::from(counts.at_root_after_step) + f64::from(counts.births_at_root);
        }
        visits
    });

    let mut x_acc = OnlineStats::new();
    let mut xs = Vec::with_capacity(replicas as usize);
    for run in cluster_runs {
        let v = run?;
        x_acc.push(v);
        xs.push(v);
    }
    let mut y_acc = OnlineStats::new();
    let mut ys = Vec::with_capacity(replicas as usize);
    for v in brw_runs {
        y_acc.push(v);
        ys.push(v);
    }
    let joint_se = (x_acc.stderr().powi(2) + y_acc.stderr().powi(2)).sqrt();
    let mean_dominates = x_acc.mean() <= y_acc.mean() + 2.0 * joint_se;

    xs.sort_by(f64::total_cmp);
    let quantile = |v: &[f64], q: f64| v[((v.len() - 1) as f64 * q) as usize];
    let q50 = quantile(&xs, 0.5);
    let q90 = quantile(&xs, 0.9);
    let upper_mass = |v: &[f64], cut: f64| v.iter().filter(|&&x| x > cut).count() as f64;
    let n = replicas as f64;
    let ci = 2.0 * (0.25 / n).sqrt() * 2.0; // conservative two-sample allowance
    let cdf_dominates_q50 = upper_mass(&ys, q50) / n >= upper_mass(&xs, q50) / n - ci;
    let cdf_dominates_q90 = upper_mass(&ys, q90) / n >= upper_mass(&xs, q90) / n - ci;

    Ok(DominationReport {
        lambda,
        horizon,
        replicas,
        cluster_visits_mean: x_acc.mean(),
        cluster_visits_se: x_acc.stderr(),
        brw_visits_mean: y_acc.mean(),
        brw_visits_se: y_acc.stderr(),
        mean_dominates,
        cdf_dominates_q50,
        cdf_dominates_q90,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{BoundaryPolicy, Window};
    use crate::kernels::tree_kernel;
    use crate::replicas::{replica_seed, run_replicas};
    use crate::stats::OnlineStats;

    #[test]
    fn zero_density_is_a_single_lazy_walk() {
        let kernel = WalkKernel::half_holding(3);
        let mut sim = BrwSim::new(kernel, 0.0, 1).unwrap();
        assert_eq!(sim.population().len(), 1);
        for _ in 0..20 {
            let counts = sim.step_generation().unwrap();
            assert_eq!(counts.population, 1, "no branching at density zero");
            assert_eq!(counts.births_at_root, 0);
        }
    }

    #[test]
    fn generation_sizes_follow_the_growth_recursion() {
        // population after n stages (newborns included) has mean
        // (1 + lambda)(1 + 2 lambda)^n
        let kernel = WalkKernel::half_holding(3);
        let lambda = 0.5;
        let n_stages = 4u32;
        let reps = 40_000u32;
        let runs = run_replicas(reps, |r| {
            let mut sim = BrwSim::new(kernel, lambda, replica_seed(11, r)).unwrap();
            let mut last = sim.population().len() as f64;
            for _ in 0..n_stages {
                last = f64::from(sim.step_generation().unwrap().population);
            }
            last
        });
        let mut acc = OnlineStats::new();
        for v in runs {
            acc.push(v);
        }
        let expected = (1.0 + lambda) * (1.0 + 2.0 * lambda).powi(n_stages as i32);
        assert!(
            (acc.mean() - expected).abs() <= 3.0 * acc.stderr(),
            "mean {} vs {expected} (se {})",
            acc.mean(),
            acc.stderr()
        );
    }

    #[test]
    fn generation_mean_formula_examples() {
        let table = tree_kernel(3, 0.5, 8).unwrap();
        // n=1, lambda=1, v=o: 2 * P(o,o) = 2 * 1/2 = 1
        let (value, bound) = expected_generation_mean(1, 1.0, 0, &table).unwrap();
        assert!((value - 1.0).abs() < 1e-12);
        assert!(value <= bound);
        // beyond the walk range the mean is zero
        let (far, _) = expected_generation_mean(3, 1.0, 4, &table).unwrap();
        assert_eq!(far, 0.0);
        // n = 0 special case
        let (v0, _) = expected_generation_mean(0, 0.7, 0, &table).unwrap();
        assert!((v0 - 1.7).abs() < 1e-12);
    }

    #[test]
    fn formula_stays_below_bound_for_all_computed_entries() {
        let table = tree_kernel(3, 0.5, 8).unwrap();
        for lambda in [0.25, 0.5, 1.0] {
            for n in 1..=8u32 {
                for k in 0..=n {
                    expected_generation_mean(n, lambda, k, &table).unwrap();
                }
            }
        }
    }

    #[test]
    fn monte_carlo_generation_mean_matches_formula() {
        let kernel = WalkKernel::half_holding(3);
        let lambda = 0.5;
        let table = tree_kernel(3, 0.5, 3).unwrap();
        let (expected, _) = expected_generation_mean(3, lambda, 0, &table).unwrap();
        let reps = 60_000u32;
        let runs = run_replicas(reps, |r| {
            let mut sim = BrwSim::new(kernel, lambda, replica_seed(23, r)).unwrap();
            let mut q3 = 0.0;
            for n in 1..=3 {
                let counts = sim.step_generation().unwrap();
                if n == 3 {
                    q3 = f64::from(counts.at_root_after_step);
                }
            }
            q3
        });
        let mut acc = OnlineStats::new();
        for v in runs {
            acc.push(v);
        }
        assert!(
            (acc.mean() - expected).abs() <= 3.0 * acc.stderr(),
            "MC {} vs formula {expected} (se {})",
            acc.mean(),
            acc.stderr()
        );
    }

    #[test]
    fn subcritical_threshold_examples() {
        let report = subcritical_check(
            0.03,
            GraphFamily::RegularTree { degree: 4 },
            1.0 / 5.0,
        );
        assert!((report.rho - 0.892_820_323_027_550_9).abs() < 1e-12);
        assert!((report.threshold - 0.060_023_094_349_489_714).abs() < 1e-12);
        assert!(report.contracting);
        // the algebraic identity: lambda < threshold iff (1+2 lambda) rho < 1
        for lambda in [0.0, 0.02, 0.0600, 0.0601, 0.3] {
            let r = subcritical_check(lambda, GraphFamily::RegularTree { degree: 4 }, 0.2);
            assert_eq!(r.contracting, lambda < r.threshold);
        }
        let cyc = subcritical_check(0.1, GraphFamily::Cycle { length: 100 }, 0.5);
        assert_eq!(cyc.threshold, 0.0);
        assert!(!cyc.contracting);
    }

    #[test]
    fn zero_density_domination_is_an_equality_in_law() {
        // At lambda -> 0 both sides reduce to the visit count of a single
        // lazy walk started at the root; compare their Monte Carlo means.
        let window = Window::new(
            GraphFamily::RegularTree { degree: 4 },
            8,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let kernel = WalkKernel::uniform_holding(4);
        let report = domination_experiment(&window, kernel, 1e-9, 8, 4_000, 31).unwrap();
        let gap = (report.cluster_visits_mean - report.brw_visits_mean).abs();
        let joint = (report.cluster_visits_se.powi(2) + report.brw_visits_se.powi(2)).sqrt();
        assert!(gap <= 3.0 * joint, "gap {gap} vs 3se {}", 3.0 * joint);
        assert!(report.mean_dominates);
    }
}
