//! Realized walker fields: per-vertex Poisson counts plus trajectories.

use std::io::Write;

use crate::error::{Error, Result};
use crate::graphs::{VertexId, Window};
use crate::kernels::WalkKernel;
use crate::snsim::coupling::{step_walker, CouplingStream, StepOutcome};

/// One walker: its origin, per-origin index, and trajectory. The stored
/// trajectory ends at the freeze step under the Reject policy; the walker
/// then sits at its last position but no longer takes part in meetings.
#[derive(Clone, Debug)]
pub struct Walker {
    pub origin: VertexId,
    pub index: u32,
    pub trajectory: Vec<VertexId>,
    /// First time at which the walker is no longer active (Reject only).
    pub frozen_at: Option<u32>,
    /// First time the walker stood on the window boundary, if ever.
    pub first_boundary: Option<u32>,
}

impl Walker {
    #[inline]
    pub fn position(&self, t: u32) -> VertexId {
        let idx = (t as usize).min(self.trajectory.len() - 1);
        self.trajectory[idx]
    }

    #[inline]
    pub fn is_active(&self, t: u32) -> bool {
        match self.frozen_at {
            Some(f) => t < f,
            None => true,
        }
    }

    pub fn touched_boundary(&self) -> bool {
        self.first_boundary.is_some()
    }
}

/// A realized field: all walkers of one replica at one density, with full
/// trajectories up to the horizon.
#[derive(Clone, Debug)]
pub struct WalkerField {
    pub window: Window,
    pub kernel: WalkKernel,
    pub horizon: u32,
    pub lambda: f64,
    pub walkers: Vec<Walker>,
}

/// Draw the coupled field at density `lambda` and simulate every walker for
/// `horizon` steps. Vertices listed in `forced` get occupancy-conditioned
/// counts (Poisson given >= 1); everything else follows the arrival process.
pub fn realize_field(
    stream: &CouplingStream,
    window: &Window,
    kernel: WalkKernel,
    lambda: f64,
    horizon: u32,
    forced: &[VertexId],
) -> Result<WalkerField> {
    if lambda <= 0.0 {
        return Err(Error::domain("density must be positive"));
    }
    if kernel.degree != window.family.degree() {
        return Err(Error::domain("kernel degree does not match the window family"));
    }
    let mut walkers = Vec::new();
    for origin in window.iter_vertices() {
        let count = if forced.contains(&origin) {
            stream.walker_count_forced(origin, lambda)
        } else {
            stream.walker_count(origin, lambda)
        };
        for index in 0..count {
            walkers.push(spawn_walker(stream, window, &kernel, origin, index, horizon));
        }
    }
    Ok(WalkerField {
        window: window.clone(),
        kernel,
        horizon,
        lambda,
        walkers,
    })
}

fn spawn_walker(
    stream: &CouplingStream,
    window: &Window,
    kernel: &WalkKernel,
    origin: VertexId,
    index: u32,
    horizon: u32,
) -> Walker {
    let key = stream.walk_key(origin, index);
    let mut trajectory = Vec::with_capacity(horizon as usize + 1);
    trajectory.push(origin);
    let mut first_boundary = window.is_boundary(origin).then_some(0);
    let mut frozen_at = None;
    let mut pos = origin;
    for t in 0..horizon {
        match step_walker(window, kernel, key, t, pos) {
            StepOutcome::Stayed => trajectory.push(pos),
            StepOutcome::Moved(next) => {
                pos = next;
                trajectory.push(pos);
                if first_boundary.is_none() && window.is_boundary(pos) {
                    first_boundary = Some(t + 1);
                }
            }
            StepOutcome::Frozen => {
                frozen_at = Some(t + 1);
                if first_boundary.is_none() {
                    first_boundary = Some(t);
                }
                break;
            }
        }
    }
    Walker {
        origin,
        index,
        trajectory,
        frozen_at,
        first_boundary,
    }
}

impl WalkerField {
    /// Indices of the walkers whose origin is `v`.
    pub fn walkers_at_origin(&self, v: VertexId) -> Vec<u32> {
        self.walkers
            .iter()
            .enumerate()
            .filter(|(_, w)| w.origin == v)
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Debug CSV dump: walker id, origin, frozen time, trajectory.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "walker,origin,frozen_at,trajectory")?;
        for (i, w) in self.walkers.iter().enumerate() {
            let path: Vec<String> = w.trajectory.iter().map(|v| v.0.to_string()).collect();
            writeln!(
                out,
                "{},{},{},{}",
                i,
                w.origin.0,
                w.frozen_at.map_or(String::new(), |f| f.to_string()),
                path.join(" ")
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{BoundaryPolicy, GraphFamily};
    use crate::stats::OnlineStats;

    fn cycle_window(n: u64) -> Window {
        Window::full(GraphFamily::Cycle { length: n }, BoundaryPolicy::Reject).unwrap()
    }

    #[test]
    fn rejects_nonpositive_density() {
        let w = cycle_window(10);
        let stream = CouplingStream::new(1);
        assert!(realize_field(&stream, &w, WalkKernel::half_holding(2), 0.0, 4, &[]).is_err());
    }

    #[test]
    fn trajectories_start_at_origin_and_move_by_edges() {
        let w = Window::new(
            GraphFamily::RegularTree { degree: 3 },
            5,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let stream = CouplingStream::new(5);
        let field =
            realize_field(&stream, &w, WalkKernel::half_holding(3), 1.0, 16, &[]).unwrap();
        assert!(!field.walkers.is_empty());
        for walker in &field.walkers {
            assert_eq!(walker.trajectory[0], walker.origin);
            for pair in walker.trajectory.windows(2) {
                let d = w.distance(pair[0], pair[1]).unwrap();
                assert!(d <= 1, "consecutive positions equal or adjacent");
            }
        }
    }

    #[test]
    fn coupled_fields_nest_and_share_trajectories() {
        let w = Window::new(
            GraphFamily::RegularTree { degree: 4 },
            4,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let stream = CouplingStream::new(11);
        let kernel = WalkKernel::half_holding(4);
        let small = realize_field(&stream, &w, kernel, 0.4, 12, &[]).unwrap();
        let large = realize_field(&stream, &w, kernel, 1.7, 12, &[]).unwrap();
        assert!(small.walkers.len() <= large.walkers.len());
        use std::collections::HashMap;
        let by_id: HashMap<(VertexId, u32), &Walker> = large
            .walkers
            .iter()
            .map(|w| ((w.origin, w.index), w))
            .collect();
        for walker in &small.walkers {
            let twin = by_id
                .get(&(walker.origin, walker.index))
                .expect("every low-density walker exists at the higher density");
            assert_eq!(walker.trajectory, twin.trajectory);
        }
    }

    #[test]
    fn tiny_density_gives_an_empty_field_with_high_probability() {
        let w = Window::new(
            GraphFamily::RegularTree { degree: 3 },
            2,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let mut empties = 0;
        for seed in 0..200 {
            let stream = CouplingStream::new(seed);
            let field =
                realize_field(&stream, &w, WalkKernel::half_holding(3), 1e-4, 4, &[]).unwrap();
            if field.walkers.is_empty() {
                empties += 1;
            }
        }
        assert!(empties >= 198, "10 vertices at density 1e-4 are almost surely empty");
    }

    #[test]
    fn mean_walker_count_matches_density() {
        // cycle(1000) at density 1, horizon 0: counts over many vertex draws
        let w = cycle_window(1000);
        let kernel = WalkKernel::half_holding(2);
        let mut acc = OnlineStats::new();
        for seed in 0..100 {
            let stream = CouplingStream::new(9000 + seed);
            let field = realize_field(&stream, &w, kernel, 1.0, 0, &[]).unwrap();
            acc.push(field.walkers.len() as f64 / 1000.0);
        }
        // 1e5 vertex draws in total: 3 sigma of Pois(1) mean at that volume
        assert!(
            (acc.mean() - 1.0).abs() < 0.03,
            "mean per-vertex count {}",
            acc.mean()
        );
    }

    #[test]
    fn forced_vertices_are_always_occupied() {
        let w = cycle_window(50);
        let kernel = WalkKernel::half_holding(2);
        let u = VertexId(0);
        let v = VertexId(4);
        for seed in 0..100 {
            let stream = CouplingStream::new(seed);
            let field = realize_field(&stream, &w, kernel, 0.05, 2, &[u, v]).unwrap();
            assert!(!field.walkers_at_origin(u).is_empty());
            assert!(!field.walkers_at_origin(v).is_empty());
        }
    }
}
