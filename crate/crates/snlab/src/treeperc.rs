//! Subtree first-arrival streams, two-sided edge indicators, good-at-time
//! certificates, and the Bernoulli-percolation comparison on the right
//! subtree forest of the d-regular tree.
//!
//! For each vertex `a` of the right forest, the number of walkers that start
//! in the left subtree below `a`, reach `a` for the first time at time `t`
//! and then step to a fixed neighbor is Poisson(alpha_t), independent across
//! oriented edges and times; `alpha_t = lambda * survival(t) / (d+1)` with
//! the left-subtree survival probability from the kernels module. The
//! indicator field is sampled directly from that law through counter-based
//! streams, so any (edge, time) cell can be queried lazily and consistently.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{walk_survival_in_left_subtree, walk_survival_limit};
use crate::rng::{poisson_inverse, SeqStream, StreamKey};
use crate::stats::wilson_interval;

/// Direction of an oriented subtree edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeDir {
    /// Parent to child (deeper into the subtree).
    Down,
    /// Child back to parent.
    Up,
}

/// Lazily sampled field of fresh-arrival counts on the oriented edges of an
/// abstract subtree, one independent Poisson(alpha_t) per (edge, t).
#[derive(Clone, Debug)]
pub struct ArrivalStream {
    pub degree: u32,
    pub lambda: f64,
    key: StreamKey,
    alphas: Vec<f64>,
}

impl ArrivalStream {
    /// Requires the uniform holding probability 1/(d+1).
    pub fn new(degree: u32, holding: f64, lambda: f64, time_cap: u32, seed: u64) -> Result<Self> {
        let expected = 1.0 / f64::from(degree + 1);
        if (holding - expected).abs() > 1e-12 {
            return Err(Error::domain(
                "arrival streams are defined for holding probability 1/(d+1)",
            ));
        }
        if lambda < 0.0 {
            return Err(Error::domain("density must be nonnegative"));
        }
        let mut alphas = Vec::with_capacity(time_cap as usize + 1);
        alphas.push(lambda / f64::from(degree + 1)); // survival factor 1 at t = 0
        for t in 1..=time_cap {
            let s = walk_survival_in_left_subtree(degree, holding, t)?;
            alphas.push(lambda * s / f64::from(degree + 1));
        }
        Ok(ArrivalStream {
            degree,
            lambda,
            key: StreamKey::root(seed, "treeperc"),
            alphas,
        })
    }

    pub fn alpha(&self, t: u32) -> f64 {
        self.alphas[t as usize]
    }

    pub fn time_cap(&self) -> u32 {
        self.alphas.len() as u32 - 1
    }

    /// Root key for the subtree hung at an abstract root; `tag` separates
    /// independent subtrees (the two goodness trees are disjoint).
    pub fn subtree_root(&self, tag: u64) -> StreamKey {
        self.key.with(tag)
    }

    /// Key of a child vertex given its parent key.
    pub fn child_key(&self, parent: StreamKey, child: u32) -> StreamKey {
        parent.with(u64::from(child) + 1)
    }

    /// Fresh-arrival count on the oriented edge (parent, child) at time `t`.
    pub fn count(&self, parent: StreamKey, child: u32, dir: EdgeDir, t: u32) -> u32 {
        let dir_word = match dir {
            EdgeDir::Down => 0u64,
            EdgeDir::Up => 1u64,
        };
        let u = parent
            .with(u64::from(child) + 1)
            .with(dir_word)
            .with(u64::from(t))
            .uniform_at(0);
        poisson_inverse(u, self.alpha(t))
    }

    /// Indicator that the count is positive.
    pub fn flag(&self, parent: StreamKey, child: u32, dir: EdgeDir, t: u32) -> bool {
        self.count(parent, child, dir, t) > 0
    }
}

/// Branching shape of a goodness subtree: the root fans out `root_degree`
/// children, interior vertices `out_degree`; at most one descendant path may
/// be carved out (the other endpoint's subtree).
#[derive(Clone, Debug)]
pub struct SubtreeShape {
    pub root_degree: u32,
    pub out_degree: u32,
    pub excluded: Option<Vec<u8>>,
}

impl SubtreeShape {
    fn fan(&self, depth: u32) -> u32 {
        if depth == 0 {
            self.root_degree
        } else {
            self.out_degree
        }
    }
}

/// Depth-first search for a certificate path gamma_0 .. gamma_t from the
/// subtree root such that every edge carries a fresh arrival forward at time
/// i and backward at time 2t - i - 1. Returns the child-index path of one
/// certificate, or None. Deterministic given the stream.
pub fn good_at_time(
    stream: &ArrivalStream,
    shape: &SubtreeShape,
    root_tag: u64,
    t: u32,
) -> Option<Vec<u8>> {
    if t == 0 {
        return Some(Vec::new()); // trivially good: the empty path
    }
    if 2 * t - 1 > stream.time_cap() {
        panic!("time cap too small for goodness at 2t = {}", 2 * t);
    }
    // frontier of live partial paths: (vertex key, path, excluded-marker)
    let root = stream.subtree_root(root_tag);
    let mut frontier: Vec<(StreamKey, Vec<u8>, bool)> = vec![(root, Vec::new(), shape.excluded.is_some())];
    for depth in 0..t {
        let mut next = Vec::new();
        for (key, path, on_excluded) in &frontier {
            let fan = shape.fan(depth);
            for child in 0..fan {
                if *on_excluded {
                    let ex = shape.excluded.as_ref().expect("marker implies path");
                    if ex.len() as u32 == depth + 1 && u32::from(ex[depth as usize]) == child {
                        continue; // the carved-out vertex itself
                    }
                }
                let fwd = stream.flag(*key, child, EdgeDir::Down, depth);
                let bwd = stream.flag(*key, child, EdgeDir::Up, 2 * t - depth - 1);
                if fwd && bwd {
                    let mut p = path.clone();
                    p.push(child as u8);
                    let marker = *on_excluded
                        && shape
                            .excluded
                            .as_ref()
                            .map(|ex| {
                                (depth as usize) < ex.len()
                                    && u32::from(ex[depth as usize]) == child
                            })
                            .unwrap_or(false);
                    next.push((stream.child_key(*key, child), p, marker));
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        frontier = next;
    }
    frontier.into_iter().next().map(|(_, p, _)| p)
}

/// Memory-light goodness indicator: same reachability recursion without
/// storing paths (the frontier keeps only vertex keys).
pub fn is_good_at_time(
    stream: &ArrivalStream,
    shape: &SubtreeShape,
    root_tag: u64,
    t: u32,
) -> bool {
    if t == 0 {
        return true;
    }
    assert!(2 * t - 1 <= stream.time_cap(), "time cap too small");
    let excl = shape.excluded.as_deref();
    let mut live: Vec<(StreamKey, bool)> = vec![(stream.subtree_root(root_tag), excl.is_some())];
    for depth in 0..t {
        let mut next: Vec<(StreamKey, bool)> = Vec::new();
        for (key, on_excluded) in &live {
            let fan = shape.fan(depth);
            for child in 0..fan {
                if *on_excluded {
                    if let Some(ex) = excl {
                        if ex.len() as u32 == depth + 1 && u32::from(ex[depth as usize]) == child {
                            continue;
                        }
                    }
                }
                let fwd = stream.flag(*key, child, EdgeDir::Down, depth);
                let bwd = stream.flag(*key, child, EdgeDir::Up, 2 * t - depth - 1);
                if fwd && bwd {
                    let marker = *on_excluded
                        && excl
                            .map(|ex| {
                                (depth as usize) < ex.len()
                                    && u32::from(ex[depth as usize]) == child
                            })
                            .unwrap_or(false);
                    next.push((stream.child_key(*key, child), marker));
                }
            }
        }
        if next.is_empty() {
            return false;
        }
        live = next;
    }
    true
}

/// Bernoulli bond percolation tree: root degree, interior out-degree, and
/// the critical density 1/(out_degree) of the interior branching.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PercTree {
    pub root_degree: u32,
    pub out_degree: u32,
    pub depth_cap: u32,
}

impl PercTree {
    pub fn critical_density(&self) -> f64 {
        1.0 / f64::from(self.out_degree)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClusterStats {
    pub size: u64,
    pub reached_depth: u32,
}

/// Open each edge independently with probability `p` and return the root
/// component statistics up to the depth cap.
pub fn percolation_cluster(tree: &PercTree, p: f64, seed: u64) -> Result<ClusterStats> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("edge density must lie in [0, 1]"));
    }
    let mut rng = SeqStream::new(StreamKey::root(seed, "perc"));
    let mut size = 1u64;
    let mut reached = 0u32;
    let mut frontier = 1u64; // open vertices at the current depth
    for depth in 0..tree.depth_cap {
        let fan = if depth == 0 {
            tree.root_degree
        } else {
            tree.out_degree
        };
        let mut next = 0u64;
        for _ in 0..frontier {
            for _ in 0..fan {
                if rng.next_uniform() < p {
                    next += 1;
                }
            }
        }
        if next == 0 {
            break;
        }
        frontier = next;
        size += next;
        reached = depth + 1;
    }
    Ok(ClusterStats {
        size,
        reached_depth: reached,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodnessRow {
    pub two_t: u32,
    pub freq_u: f64,
    pub freq_v: f64,
    pub freq_both: f64,
    pub product: f64,
    pub both_wilson_low: f64,
    pub both_wilson_high: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodnessReport {
    pub degree: u32,
    pub lambda: f64,
    pub replicas: u32,
    pub v_depth: u32,
    pub rows: Vec<GoodnessRow>,
    /// Fraction of replicas in which both roots were good at every listed
    /// even time simultaneously.
    pub all_times_both: f64,
}

/// Frequency that the two subtree roots are simultaneously good at each even
/// time `2t` of `t_list`, over independent indicator fields. The two
/// subtrees carry independent streams, mirroring their disjointness.
pub fn simultaneous_goodness_rate(
    degree: u32,
    lambda: f64,
    replicas: u32,
    t_list: &[u32],
    v_depth: u32,
    seed: u64,
) -> Result<GoodnessReport> {
    use crate::replicas::{replica_seed, run_replicas};
    let l = (degree - 1) / 2;
    let holding = 1.0 / f64::from(degree + 1);
    let t_max = t_list.iter().copied().max().unwrap_or(1);
    let shape_u = SubtreeShape {
        root_degree: degree - l,
        out_degree: degree - l - 1,
        excluded: (v_depth > 0).then(|| vec![0u8; v_depth as usize]),
    };
    let shape_v = SubtreeShape {
        root_degree: degree - l - 1,
        out_degree: degree - l - 1,
        excluded: None,
    };
    let per_replica = run_replicas(replicas, move |r| {
        let stream_u =
            ArrivalStream::new(degree, holding, lambda, 2 * t_max, replica_seed(seed, r))
                .expect("valid parameters");
        let stream_v = ArrivalStream::new(
            degree,
            holding,
            lambda,
            2 * t_max,
            replica_seed(seed ^ 0x7472_7065, r),
        )
        .expect("valid parameters");
        t_list
            .iter()
            .map(|&t| {
                let gu = is_good_at_time(&stream_u, &shape_u, 0, t);
                let gv = is_good_at_time(&stream_v, &shape_v, 1, t);
                (gu, gv)
            })
            .collect::<Vec<_>>()
    });
    let n = f64::from(replicas);
    let mut rows = Vec::with_capacity(t_list.len());
    let mut all_both = 0u64;
    for outcomes in &per_replica {
        if outcomes.iter().all(|&(gu, gv)| gu && gv) {
            all_both += 1;
        }
    }
    for (i, &t) in t_list.iter().enumerate() {
        let cu = per_replica.iter().filter(|o| o[i].0).count() as u64;
        let cv = per_replica.iter().filter(|o| o[i].1).count() as u64;
        let cb = per_replica.iter().filter(|o| o[i].0 && o[i].1).count() as u64;
        let (lo, hi) = wilson_interval(cb, u64::from(replicas));
        rows.push(GoodnessRow {
            two_t: 2 * t,
            freq_u: cu as f64 / n,
            freq_v: cv as f64 / n,
            freq_both: cb as f64 / n,
            product: (cu as f64 / n) * (cv as f64 / n),
            both_wilson_low: lo,
            both_wilson_high: hi,
        });
    }
    Ok(GoodnessReport {
        degree,
        lambda,
        replicas,
        v_depth,
        rows,
        all_times_both: all_both as f64 / n,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub degree: u32,
    /// Long-time limit of the left-subtree survival probability.
    pub survival_limit: f64,
    /// Target edge-opening bound 2/sqrt(d - l - 1).
    pub bound_rhs: f64,
    /// True when the bound exceeds 1 and cannot be met by any density.
    pub saturated: bool,
    /// Smallest C such that lambda = C sqrt(d) pushes inf_t (1 - e^-alpha_t)
    /// to the bound; None when saturated.
    pub c_min: Option<f64>,
    /// The corresponding density C sqrt(d).
    pub lambda_at_c: Option<f64>,
}

/// Numerically calibrate the density prefactor: the smallest C with
/// alpha_inf(C sqrt(d)) >= |log(1 - 2/sqrt(d - l - 1))|.
pub fn calibrate_density_prefactor(degree: u32) -> Result<CalibrationReport> {
    if degree < 3 {
        return Err(Error::domain("requires degree >= 3"));
    }
    let l = (degree - 1) / 2;
    let k = f64::from(degree - l - 1);
    let rhs = 2.0 / k.sqrt();
    let survival = walk_survival_limit(degree);
    if rhs >= 1.0 {
        return Ok(CalibrationReport {
            degree,
            survival_limit: survival,
            bound_rhs: rhs,
            saturated: true,
            c_min: None,
            lambda_at_c: None,
        });
    }
    let target_alpha = -(1.0 - rhs).ln();
    let d = f64::from(degree);
    let c_min = (d + 1.0) * target_alpha / (d.sqrt() * survival);
    Ok(CalibrationReport {
        degree,
        survival_limit: survival,
        bound_rhs: rhs,
        saturated: false,
        c_min: Some(c_min),
        lambda_at_c: Some(c_min * d.sqrt()),
    })
}
