//! Streaming pair-connectivity estimation, coupled across a density grid.
//!
//! One replica realizes the coupled placement once at the top density and
//! runs the meeting dynamics for every grid level simultaneously: each walker
//! carries the lowest grid level at which it exists, and one union-find per
//! level tracks the partition. Nothing is materialized per time step, so the
//! same code handles windows of millions of vertices.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::{GraphFamily, VertexId, Window};
use crate::kernels::WalkKernel;
use crate::replicas::{replica_seed, run_replicas};
use crate::snsim::coupling::{step_walker, CouplingStream, StepOutcome};
use crate::snsim::unionfind::UnionFind;
use crate::stats::wilson_interval;

#[derive(Clone, Copy, Debug)]
pub struct PairSweepConfig<'a> {
    pub window: &'a Window,
    pub kernel: WalkKernel,
    /// Ascending density grid.
    pub lambdas: &'a [f64],
    pub horizon: u32,
    pub u: VertexId,
    pub v: VertexId,
    /// Condition both endpoints on being initially occupied (exact
    /// conditional sampling; keeps the grid coupling monotone).
    pub force_occupancy: bool,
}

/// Per-density outcome of one replica.
#[derive(Clone, Copy, Debug)]
pub struct LevelOutcome {
    /// Both endpoints initially occupied at this density.
    pub defined: bool,
    /// First time at which the endpoints shared a friend cluster.
    pub connected_at: Option<u32>,
    /// Whether the endpoint clusters touched the window boundary.
    pub censored: bool,
}

struct WalkerState {
    pos: VertexId,
    depth: u32,
    key: crate::rng::StreamKey,
    level: u8,
    frozen: bool,
}

/// Run the coupled meeting dynamics of one replica and report, per density
/// level, when the tracked pair became connected. Fails if the outcomes ever
/// violate the deterministic grid monotonicity.
pub fn run_pair_replica(stream: &CouplingStream, cfg: &PairSweepConfig) -> Result<Vec<LevelOutcome>> {
    let window = cfg.window;
    let levels = cfg.lambdas.len();
    if levels == 0 {
        return Err(Error::domain("empty density grid"));
    }
    if cfg.lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("density grid must be strictly ascending"));
    }
    if cfg.lambdas[0] <= 0.0 {
        return Err(Error::domain("densities must be positive"));
    }
    if !window.contains(cfg.u) {
        return Err(Error::OutOfWindow(cfg.u));
    }
    if !window.contains(cfg.v) {
        return Err(Error::OutOfWindow(cfg.v));
    }

    // placement, coupled across the grid
    let is_tree = matches!(window.family, GraphFamily::RegularTree { .. });
    let watch_boundary = !window.is_saturated();
    let mut walkers: Vec<WalkerState> = Vec::new();
    let mut endpoint_first: [Option<(u32, u8)>; 2] = [None, None];
    for origin in window.iter_vertices() {
        let forced = cfg.force_occupancy && (origin == cfg.u || origin == cfg.v);
        let counts = stream.walker_counts_on_grid(origin, cfg.lambdas, forced);
        let total = *counts.last().expect("nonempty grid");
        if total == 0 {
            continue;
        }
        let depth = window.depth(origin).expect("origin inside window");
        for index in 0..total {
            let level = counts
                .iter()
                .position(|&c| c > index)
                .expect("index below top count") as u8;
            if index == 0 {
                if origin == cfg.u {
                    endpoint_first[0] = Some((walkers.len() as u32, level));
                }
                if origin == cfg.v {
                    endpoint_first[1] = Some((walkers.len() as u32, level));
                }
            }
            walkers.push(WalkerState {
                pos: origin,
                depth,
                key: stream.walk_key(origin, index),
                level,
                frozen: false,
            });
        }
    }

    let mut ufs: Vec<UnionFind> = (0..levels).map(|_| UnionFind::new(walkers.len())).collect();
    let mut touched: Vec<Vec<bool>> = (0..levels).map(|_| vec![false; walkers.len()]).collect();
    let mut connected_at: Vec<Option<u32>> = vec![None; levels];

    let u0 = endpoint_first[0];
    let v0 = endpoint_first[1];
    let same_endpoint = cfg.u == cfg.v;

    let mark_touch = |ufs: &mut [UnionFind], touched: &mut [Vec<bool>], w: u32, level: u8| {
        for (l, (uf, tl)) in ufs.iter_mut().zip(touched.iter_mut()).enumerate() {
            if l as u8 >= level {
                let r = uf.find(w);
                tl[r as usize] = true;
            }
        }
    };

    // initial boundary contacts
    if watch_boundary {
        for i in 0..walkers.len() {
            if walkers[i].depth == window.radius {
                let lv = walkers[i].level;
                mark_touch(&mut ufs, &mut touched, i as u32, lv);
            }
        }
    }

    let mut buckets: HashMap<VertexId, Vec<u32>> = HashMap::new();
    let mut active = walkers.len();
    for t in 0..=cfg.horizon {
        // meetings at time t
        buckets.clear();
        for (i, w) in walkers.iter().enumerate() {
            if !w.frozen {
                buckets.entry(w.pos).or_default().push(i as u32);
            }
        }
        for members in buckets.values() {
            if members.len() < 2 {
                continue;
            }
            for (l, (uf, tl)) in ufs.iter_mut().zip(touched.iter_mut()).enumerate() {
                let mut head: Option<u32> = None;
                for &m in members {
                    if walkers[m as usize].level as usize > l {
                        continue;
                    }
                    match head {
                        None => head = Some(m),
                        Some(h) => {
                            let (rh, rm) = (uf.find(h), uf.find(m));
                            if rh != rm {
                                let hit = tl[rh as usize] || tl[rm as usize];
                                uf.union(rh, rm);
                                let root = uf.find(h);
                                tl[root as usize] = hit || tl[root as usize];
                            }
                        }
                    }
                }
            }
        }
        // connectivity checkpoints
        if let (Some((wu, lu)), Some((wv, lv))) = (u0, v0) {
            for l in 0..levels {
                if connected_at[l].is_none() && l as u8 >= lu && l as u8 >= lv {
                    let joined = same_endpoint || ufs[l].connected(wu, wv);
                    if joined {
                        connected_at[l] = Some(t);
                    }
                }
            }
        }
        if t == cfg.horizon || active == 0 {
            break;
        }
        // advance walkers t -> t+1
        for (i, w) in walkers.iter_mut().enumerate() {
            if w.frozen {
                continue;
            }
            match step_walker(window, &cfg.kernel, w.key, t, w.pos) {
                StepOutcome::Stayed => {}
                StepOutcome::Moved(next) => {
                    if is_tree {
                        // tree ids are breadth-first: parents have smaller ids
                        w.depth = if next < w.pos { w.depth - 1 } else { w.depth + 1 };
                    } else {
                        w.depth = window.depth(next).expect("moved inside window");
                    }
                    w.pos = next;
                    if watch_boundary && w.depth == window.radius {
                        let lv = w.level;
                        mark_touch(&mut ufs, &mut touched, i as u32, lv);
                    }
                }
                StepOutcome::Frozen => {
                    w.frozen = true;
                    active -= 1;
                    let lv = w.level;
                    mark_touch(&mut ufs, &mut touched, i as u32, lv);
                }
            }
        }
    }

    let mut outcomes = Vec::with_capacity(levels);
    for l in 0..levels {
        let defined = match (u0, v0) {
            (Some((_, lu)), Some((_, lv))) => l as u8 >= lu && l as u8 >= lv,
            _ => false,
        };
        let censored = if defined {
            let (wu, lv_pair) = (u0.expect("defined").0, v0.expect("defined").0);
            let ru = ufs[l].find(wu);
            let rv = ufs[l].find(lv_pair);
            touched[l][ru as usize] || touched[l][rv as usize]
        } else {
            false
        };
        outcomes.push(LevelOutcome {
            defined,
            connected_at: if defined { connected_at[l] } else { None },
            censored,
        });
    }
    // deterministic grid monotonicity: a connection can only appear earlier
    // (never disappear) as the density grows
    for pair in outcomes.windows(2) {
        if let (Some(lo), hi) = (pair[0].connected_at, pair[1].connected_at) {
            let ok = matches!(hi, Some(h) if h <= lo);
            if pair[1].defined && !ok {
                return Err(Error::invariant(
                    "coupled replica lost a connection at a higher density",
                ));
            }
        }
    }
    Ok(outcomes)
}

/// Aggregated pair-connectivity estimate at one density.
#[derive(Clone, Debug, Serialize)]
pub struct PairConnectivityReport {
    pub lambda: f64,
    pub horizon: u32,
    pub replicas: u32,
    /// Replicas in which both endpoints were occupied.
    pub defined: u32,
    pub connected: u32,
    pub censored: u32,
    /// Conditional estimate P[u ~ v | both occupied]; None when no replica
    /// had both endpoints occupied.
    pub estimate: Option<f64>,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub censored_fraction: f64,
}

/// One line of the replica record stream (JSON lines).
#[derive(Clone, Debug, Serialize)]
pub struct ReplicaRecord {
    pub seed: u64,
    pub replica: u32,
    pub lambda: f64,
    pub horizon: u32,
    pub radius: u32,
    pub family: GraphFamily,
    pub defined: bool,
    pub connected_at: Option<u32>,
    pub censored: bool,
}

/// Monte Carlo estimate of the probability that the tracked pair shares a
/// friend cluster by the horizon, conditioned on both endpoints occupied.
pub fn pair_connectivity(
    window: &Window,
    kernel: WalkKernel,
    lambda: f64,
    horizon: u32,
    u: VertexId,
    v: VertexId,
    replicas: u32,
    seed: u64,
    force_occupancy: bool,
) -> Result<(PairConnectivityReport, Vec<ReplicaRecord>)> {
    let lambdas = [lambda];
    let cfg = PairSweepConfig {
        window,
        kernel,
        lambdas: &lambdas,
        horizon,
        u,
        v,
        force_occupancy,
    };
    let runs = run_replicas(replicas, |r| {
        let stream = CouplingStream::new(replica_seed(seed, r));
        run_pair_replica(&stream, &cfg)
    });
    let mut outcomes = Vec::with_capacity(replicas as usize);
    for run in runs {
        outcomes.push(run?[0]);
    }
    let records: Vec<ReplicaRecord> = outcomes
        .iter()
        .enumerate()
        .map(|(r, o)| ReplicaRecord {
            seed,
            replica: r as u32,
            lambda,
            horizon,
            radius: window.radius,
            family: window.family,
            defined: o.defined,
            connected_at: o.connected_at,
            censored: o.censored,
        })
        .collect();
    Ok((summarize(lambda, horizon, replicas, &outcomes), records))
}

pub(crate) fn summarize(
    lambda: f64,
    horizon: u32,
    replicas: u32,
    outcomes: &[LevelOutcome],
) -> PairConnectivityReport {
    let defined = outcomes.iter().filter(|o| o.defined).count() as u32;
    let connected = outcomes
        .iter()
        .filter(|o| o.defined && o.connected_at.is_some())
        .count() as u32;
    let censored = outcomes.iter().filter(|o| o.defined && o.censored).count() as u32;
    let estimate = (defined > 0).then(|| f64::from(connected) / f64::from(defined));
    let (lo, hi) = if defined > 0 {
        wilson_interval(u64::from(connected), u64::from(defined))
    } else {
        (0.0, 1.0)
    };
    PairConnectivityReport {
        lambda,
        horizon,
        replicas,
        defined,
        connected,
        censored,
        estimate,
        wilson_low: lo,
        wilson_high: hi,
        censored_fraction: if defined > 0 {
            f64::from(censored) / f64::from(defined)
        } else {
            0.0
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::BoundaryPolicy;

    #[test]
    fn identical_endpoints_connect_with_probability_one() {
        let window = Window::full(GraphFamily::Cycle { length: 40 }, BoundaryPolicy::Reject)
            .unwrap();
        let kernel = WalkKernel::half_holding(2);
        let u = VertexId(3);
        let (report, _) =
            pair_connectivity(&window, kernel, 0.5, 4, u, u, 60, 1, true).unwrap();
        assert_eq!(report.defined, 60);
        assert_eq!(report.estimate, Some(1.0));
    }

    #[test]
    fn high_density_close_pair_connects_almost_surely() {
        let window = Window::new(
            GraphFamily::RegularTree { degree: 4 },
            6,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let kernel = WalkKernel::half_holding(4);
        let u = window.root();
        let v = window.vertex_at_distance(2).unwrap();
        let (report, _) =
            pair_connectivity(&window, kernel, 50.0, 32, u, v, 40, 2, true).unwrap();
        assert!(report.estimate.unwrap() >= 0.9, "estimate {:?}", report.estimate);
    }

    #[test]
    fn tiny_density_short_horizon_cannot_bridge_distance_six() {
        let window = Window::new(
            GraphFamily::RegularTree { degree: 4 },
            8,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let kernel = WalkKernel::half_holding(4);
        let u = window.root();
        let v = window.vertex_at_distance(6).unwrap();
        let (report, _) =
            pair_connectivity(&window, kernel, 0.01, 4, u, v, 200, 3, true).unwrap();
        assert_eq!(report.connected, 0, "chains of length ~1 cannot span distance 6");
        assert!(report.wilson_high < 0.05);
    }

    #[test]
    fn replica_records_carry_provenance() {
        let window = Window::full(GraphFamily::Cycle { length: 30 }, BoundaryPolicy::Reject)
            .unwrap();
        let kernel = WalkKernel::half_holding(2);
        let (_, records) = pair_connectivity(
            &window,
            kernel,
            1.0,
            8,
            VertexId(0),
            VertexId(3),
            5,
            77,
            true,
        )
        .unwrap();
        assert_eq!(records.len(), 5);
        for (r, rec) in records.iter().enumerate() {
            assert_eq!(rec.replica, r as u32);
            assert_eq!(rec.seed, 77);
            assert!(rec.defined);
        }
        let line = serde_json::to_string(&records[0]).unwrap();
        assert!(line.contains("\"lambda\""));
    }

    #[test]
    fn grid_levels_are_monotone_within_every_replica() {
        let window = Window::new(
            GraphFamily::RegularTree { degree: 4 },
            5,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let kernel = WalkKernel::half_holding(4);
        let lambdas = [0.3, 1.0, 3.0, 8.0];
        let cfg = PairSweepConfig {
            window: &window,
            kernel,
            lambdas: &lambdas,
            horizon: 16,
            u: window.root(),
            v: window.vertex_at_distance(2).unwrap(),
            force_occupancy: true,
        };
        for r in 0..50 {
            let stream = CouplingStream::new(replica_seed(4242, r));
            let outcomes = run_pair_replica(&stream, &cfg).unwrap();
            for pair in outcomes.windows(2) {
                if let Some(lo) = pair[0].connected_at {
                    let hi = pair[1].connected_at.expect("connection persists");
                    assert!(hi <= lo);
                }
            }
        }
    }
}
