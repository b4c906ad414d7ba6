//! Simultaneous construction of the model at every density.
//!
//! Each vertex carries a unit-rate Poisson arrival process; the walkers
//! present at density `lambda` are exactly the arrivals in `[0, lambda]`, so
//! the walker sets are nested across densities and walker `(v, i)` performs
//! the same trajectory at every density at which it exists. All of it is
//! read off counter-based streams, so nothing has to be stored.

use crate::graphs::{BoundaryPolicy, VertexId, Window};
use crate::kernels::{StepChoice, WalkKernel};
use crate::rng::{self, StreamKey};

#[derive(Clone, Copy, Debug)]
pub struct CouplingStream {
    pub seed: u64,
}

impl CouplingStream {
    pub fn new(seed: u64) -> Self {
        CouplingStream { seed }
    }

    fn arrivals_key(&self, v: VertexId) -> StreamKey {
        StreamKey::root(self.seed, "arrivals").with(v.0)
    }

    fn forced_key(&self, v: VertexId) -> StreamKey {
        StreamKey::root(self.seed, "forced").with(v.0)
    }

    /// Walk substream of walker `(v, index)`; counter = step number.
    pub fn walk_key(&self, v: VertexId, index: u32) -> StreamKey {
        StreamKey::root(self.seed, "walk").with(v.0).with(u64::from(index))
    }

    /// Number of walkers initially at `v` for density `lambda`:
    /// arrivals of the vertex process in [0, lambda].
    pub fn walker_count(&self, v: VertexId, lambda: f64) -> u32 {
        rng::arrival_count(self.arrivals_key(v), lambda)
    }

    /// Conditioned-on-occupancy count: Poisson(lambda) given >= 1, drawn by
    /// inversion from a single per-vertex uniform so the coupled counts stay
    /// monotone across densities.
    pub fn walker_count_forced(&self, v: VertexId, lambda: f64) -> u32 {
        rng::poisson_positive_inverse(self.forced_key(v).uniform_at(0), lambda)
    }

    /// Counts at every density of an ascending grid, nested by construction.
    pub fn walker_counts_on_grid(&self, v: VertexId, grid: &[f64], forced: bool) -> Vec<u32> {
        if forced {
            let u = self.forced_key(v).uniform_at(0);
            grid.iter()
                .map(|&l| rng::poisson_positive_inverse(u, l))
                .collect()
        } else {
            let lambda_max = grid.last().copied().unwrap_or(0.0);
            let times = rng::arrival_times(self.arrivals_key(v), lambda_max);
            grid.iter()
                .map(|&l| times.iter().take_while(|&&t| t <= l).count() as u32)
                .collect()
        }
    }
}

/// Outcome of advancing a walker by one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Moved(VertexId),
    Stayed,
    /// Under the Reject policy the walker drew an out-of-window target:
    /// it freezes in place and leaves the dynamics.
    Frozen,
}

/// Advance a walker sitting at `pos` using the uniform draw for step
/// `t -> t+1` from its substream. Exactly one counter cell per step,
/// regardless of policy, so trajectories are window- and density-replayable.
#[inline]
pub fn step_walker(
    window: &Window,
    kernel: &WalkKernel,
    walk: StreamKey,
    t: u32,
    pos: VertexId,
) -> StepOutcome {
    let u = walk.uniform_at(u64::from(t));
    match window.boundary_policy {
        BoundaryPolicy::Reject => match kernel.resolve(u, kernel.degree) {
            StepChoice::Stay => StepOutcome::Stayed,
            StepChoice::Neighbor(j) => {
                let (target, inside) = window.step_target(pos, j);
                if inside {
                    StepOutcome::Moved(target)
                } else {
                    StepOutcome::Frozen
                }
            }
        },
        BoundaryPolicy::Absorb => {
            let fan = window.in_window_degree(pos);
            match kernel.resolve(u, fan) {
                StepChoice::Stay => StepOutcome::Stayed,
                StepChoice::Neighbor(j) => {
                    let target = window
                        .in_window_neighbor(pos, j)
                        .expect("index within in-window degree");
                    StepOutcome::Moved(target)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphFamily;

    #[test]
    fn counts_nest_across_densities() {
        let stream = CouplingStream::new(42);
        for raw in 0..500u64 {
            let v = VertexId(raw);
            let c1 = stream.walker_count(v, 0.1);
            let c2 = stream.walker_count(v, 0.3);
            let c3 = stream.walker_count(v, 3.0);
            assert!(c1 <= c2 && c2 <= c3);
            let grid = stream.walker_counts_on_grid(v, &[0.1, 0.3, 3.0], false);
            assert_eq!(grid, vec![c1, c2, c3]);
        }
    }

    #[test]
    fn forced_counts_are_positive_and_nested() {
        let stream = CouplingStream::new(43);
        for raw in 0..500u64 {
            let v = VertexId(raw);
            let grid = stream.walker_counts_on_grid(v, &[0.05, 1.0, 4.0], true);
            assert!(grid[0] >= 1);
            assert!(grid[0] <= grid[1] && grid[1] <= grid[2]);
        }
    }

    #[test]
    fn reject_freezes_only_at_the_boundary() {
        let window = Window::new(
            GraphFamily::RegularTree { degree: 3 },
            2,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let kernel = WalkKernel::half_holding(3);
        let stream = CouplingStream::new(7);
        // walk a few hundred walkers; freezing must only ever happen at depth R
        for i in 0..300u32 {
            let key = stream.walk_key(window.root(), i);
            let mut pos = window.root();
            for t in 0..50u32 {
                match step_walker(&window, &kernel, key, t, pos) {
                    StepOutcome::Moved(p) => pos = p,
                    StepOutcome::Stayed => {}
                    StepOutcome::Frozen => {
                        assert_eq!(window.depth(pos).unwrap(), 2);
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn absorb_never_leaves_the_window() {
        let window = Window::new(
            GraphFamily::RegularTree { degree: 4 },
            3,
            BoundaryPolicy::Absorb,
        )
        .unwrap();
        let kernel = WalkKernel::uniform_holding(4);
        let stream = CouplingStream::new(8);
        for i in 0..200u32 {
            let key = stream.walk_key(window.root(), i);
            let mut pos = window.root();
            for t in 0..80u32 {
                match step_walker(&window, &kernel, key, t, pos) {
                    StepOutcome::Moved(p) => {
                        assert!(window.contains(p));
                        pos = p;
                    }
                    StepOutcome::Stayed => {}
                    StepOutcome::Frozen => panic!("absorb must not freeze"),
                }
            }
        }
    }
}
