//! Staged exploration of a friend cluster through s-walks.
//!
//! The walk is observed only at multiples of `s`, which shrinks its spectral
//! radius to rho^s. Starting from the root's first walker, each stage checks
//! one unchecked space-time coordinate, reveals the walkers present there
//! that avoided every previously claimed coordinate at other s-multiples,
//! recruits one, and claims the coordinates of its s-walk. Recruitment is
//! gated on the vertex being "good": its s-walk return probability to the
//! current claimed set must be small.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::{GraphFamily, VertexId, Window};
use crate::kernels::{KernelTable, StepChoice, WalkKernel};
use crate::rng::StreamKey;
use crate::snsim::field::WalkerField;
use crate::snsim::meetings::FriendClusters;

/// Parameters of the exploration: margin K, density, spectral radius, and
/// the derived block length `s = ceil(8K/(1-rho))` and coordinate budget
/// `M = ceil(32K/lambda)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExploreParams {
    pub margin: f64,
    pub lambda: f64,
    pub rho: f64,
    pub s: u32,
    pub m: u32,
}

impl ExploreParams {
    /// Derive `s` and `M` from the margin; requires a nonamenable kernel.
    pub fn derive(margin: f64, lambda: f64, rho: f64) -> Result<Self> {
        if margin < 3.0 {
            return Err(Error::domain("margin K must be at least 3"));
        }
        if lambda <= 0.0 {
            return Err(Error::domain("density must be positive"));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::domain(
                "exploration requires spectral radius < 1 (nonamenable walk)",
            ));
        }
        let s = (8.0 * margin / (1.0 - rho)).ceil() as u32;
        let m = (32.0 * margin / lambda).ceil() as u32;
        let params = ExploreParams {
            margin,
            lambda,
            rho,
            s,
            m,
        };
        debug_assert!(params.rho_s() <= (-8.0 * margin).exp() * (1.0 + 1e-12));
        Ok(params)
    }

    /// Desk-scale override: explicit `s` and `M` with the same bookkeeping.
    pub fn with_overrides(margin: f64, lambda: f64, rho: f64, s: u32, m: u32) -> Result<Self> {
        if s == 0 || m == 0 {
            return Err(Error::domain("s and M must be positive"));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::domain("spectral radius must lie in [0, 1)"));
        }
        Ok(ExploreParams {
            margin,
            lambda,
            rho,
            s,
            m,
        })
    }

    /// Spectral radius of the s-walk kernel.
    pub fn rho_s(&self) -> f64 {
        self.rho.powi(self.s as i32)
    }

    /// Goodness threshold e^{-4K}.
    pub fn good_threshold(&self) -> f64 {
        (-4.0 * self.margin).exp()
    }
}

/// The s-walk kernel Q = P^s: one Q-step advances the base walk s steps.
#[derive(Clone, Copy, Debug)]
pub struct SWalkKernel {
    pub base: WalkKernel,
    pub s: u32,
}

pub fn s_walk_kernel(base: WalkKernel, s: u32) -> Result<SWalkKernel> {
    if s == 0 {
        return Err(Error::domain("s must be at least 1"));
    }
    Ok(SWalkKernel { base, s })
}

impl SWalkKernel {
    /// Exact Q-step probability of landing at tree distance `k`, read off a
    /// kernel table with horizon >= s.
    pub fn point(&self, table: &KernelTable, k: u32) -> f64 {
        table.point(self.s, k)
    }

    pub fn radial(&self, table: &KernelTable, k: u32) -> f64 {
        table.radial(self.s, k)
    }
}

/// Lazy walk on the infinite d-regular tree around a finite window: inside
/// the window positions are exact vertex ids; beyond it only the excess
/// depth matters for re-entry, because the walk comes back through the same
/// boundary vertex it left.
struct BallWalk<'a> {
    window: &'a Window,
    kernel: WalkKernel,
    pos: VertexId,
    depth: u32,
    excess: u32,
}

impl<'a> BallWalk<'a> {
    fn new(window: &'a Window, kernel: WalkKernel, start: VertexId) -> Result<Self> {
        let depth = window.depth(start)?;
        Ok(BallWalk {
            window,
            kernel,
            pos: start,
            depth,
            excess: 0,
        })
    }

    /// Current position when inside the window.
    fn position(&self) -> Option<VertexId> {
        (self.excess == 0).then_some(self.pos)
    }

    fn total_depth(&self) -> u32 {
        self.depth + self.excess
    }

    fn step(&mut self, key: StreamKey, t: u32) {
        let u = key.uniform_at(u64::from(t));
        match self.kernel.resolve(u, self.kernel.degree) {
            StepChoice::Stay => {}
            StepChoice::Neighbor(j) => {
                if self.excess > 0 {
                    // beyond the window: slot 0 is the parent direction
                    if j == 0 {
                        self.excess -= 1;
                    } else {
                        self.excess += 1;
                    }
                } else {
                    let (target, inside) = self.window.step_target(self.pos, j);
                    if inside {
                        self.depth = if target < self.pos {
                            self.depth - 1
                        } else {
                            self.depth + 1
                        };
                        self.pos = target;
                    } else {
                        self.excess = 1;
                    }
                }
            }
        }
    }
}

/// Estimated goodness of a vertex set under the s-walk.
#[derive(Clone, Debug, Serialize)]
pub struct GoodSetReport {
    /// Vertices classified good: estimate + 2 stderr <= e^{-4K}.
    pub members: Vec<VertexId>,
    /// Per-vertex (estimate, stderr) of the truncated return probability.
    pub estimates: Vec<(VertexId, f64, f64)>,
    /// Uniform-over-A average return probability and its standard error.
    pub pi_avg: f64,
    pub pi_avg_se: f64,
}

/// Monte Carlo s-walk return probabilities to `targets` (truncated at M
/// s-steps) for every vertex of `targets`, on the infinite tree containing
/// the window.
pub fn estimate_good_set(
    window: &Window,
    kernel: WalkKernel,
    targets: &[VertexId],
    params: &ExploreParams,
    n_mc: u32,
    seed: u64,
) -> Result<GoodSetReport> {
    if targets.is_empty() {
        return Err(Error::domain("target set must be nonempty"));
    }
    if n_mc == 0 {
        return Err(Error::domain("goodness estimation needs at least one sample"));
    }
    if !matches!(window.family, GraphFamily::RegularTree { .. }) {
        return Err(Error::domain("good sets are estimated on tree windows"));
    }
    let target_set: HashSet<VertexId> = targets.iter().copied().collect();
    let max_target_depth = targets
        .iter()
        .map(|&v| window.depth(v))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let key = StreamKey::root(seed, "goodset");
    let mut estimates = Vec::with_capacity(targets.len());
    let mut members = Vec::new();
    let mut pooled_hits = 0u64;
    let threshold = params.good_threshold();
    for (ai, &a) in targets.iter().enumerate() {
        let mut hits = 0u64;
        for sample in 0..n_mc {
            let walk_key = key.with(ai as u64).with(u64::from(sample));
            if swalk_returns(window, kernel, a, &target_set, max_target_depth, params, walk_key)? {
                hits += 1;
            }
        }
        let est = hits as f64 / f64::from(n_mc);
        let se = (est * (1.0 - est) / f64::from(n_mc)).sqrt();
        if est + 2.0 * se <= threshold {
            members.push(a);
        }
        estimates.push((a, est, se));
        pooled_hits += hits;
    }
    let total = u64::from(n_mc) * targets.len() as u64;
    let pi_avg = pooled_hits as f64 / total as f64;
    let pi_avg_se = (pi_avg * (1.0 - pi_avg) / total as f64).sqrt();
    Ok(GoodSetReport {
        members,
        estimates,
        pi_avg,
        pi_avg_se,
    })
}

/// One sample of the truncated s-walk return event from `a` to `targets`.
fn swalk_returns(
    window: &Window,
    kernel: WalkKernel,
    a: VertexId,
    targets: &HashSet<VertexId>,
    max_target_depth: u32,
    params: &ExploreParams,
    walk_key: StreamKey,
) -> Result<bool> {
    let mut walk = BallWalk::new(window, kernel, a)?;
    let mut t = 0u32;
    for block in 1..=params.m {
        for _ in 0..params.s {
            walk.step(walk_key, t);
            t += 1;
        }
        if let Some(pos) = walk.position() {
            if targets.contains(&pos) {
                return Ok(true);
            }
        }
        // the walk cannot come back once it is deeper than the remaining
        // steps allow
        let remaining = (params.m - block) * params.s;
        if walk.total_depth() > max_target_depth + remaining {
            return Ok(false);
        }
    }
    Ok(false)
}

/// A claimed space-time coordinate (vertex, s-step index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Coord {
    discovered: u32,
    t: u32,
    v: VertexId,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StageRecord {
    pub stage: u32,
    pub a_len: u32,
    pub u_len: u32,
    /// Set when no unchecked coordinate passed the goodness gate and the
    /// stage fell back to the overall least coordinate.
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    Exhausted,
    StageCap,
    RootUnoccupied,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExplorationTrace {
    pub stages: Vec<StageRecord>,
    /// Field indices of the recruited walkers, in recruitment order.
    pub recruited: Vec<u32>,
    pub terminated: Termination,
}

impl ExplorationTrace {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "stage,a_len,u_len,flagged")?;
        for s in &self.stages {
            writeln!(out, "{},{},{},{}", s.stage, s.a_len, s.u_len, s.flagged)?;
        }
        Ok(())
    }
}

pub struct ExploreOptions {
    /// Monte Carlo samples per goodness query; 0 disables the gate.
    pub good_mc: u32,
    /// Hard stage cap (censored windows can starve the unchecked set).
    pub stage_cap: u32,
    pub seed: u64,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            good_mc: 200,
            stage_cap: 0, // 0 = 10 * window radius
            seed: 0,
        }
    }
}

/// Run the staged exploration over a realized field.
pub fn run_exploration(
    field: &WalkerField,
    params: &ExploreParams,
    root: VertexId,
    opts: &ExploreOptions,
) -> Result<ExplorationTrace> {
    let window = &field.window;
    if !matches!(window.family, GraphFamily::RegularTree { .. }) {
        return Err(Error::domain("exploration runs on tree windows"));
    }
    let span = params
        .s
        .checked_mul(params.m)
        .ok_or_else(|| Error::domain("s * M overflows"))?;
    if field.horizon < span {
        return Err(Error::domain(format!(
            "field horizon {} shorter than s*M = {span}",
            field.horizon
        )));
    }
    let stage_cap = if opts.stage_cap == 0 {
        10 * window.radius.max(1)
    } else {
        opts.stage_cap
    };

    // positions of every walker at the s-multiples, None once frozen
    let grid: Vec<Vec<Option<VertexId>>> = field
        .walkers
        .iter()
        .map(|w| {
            (0..=params.m)
                .map(|k| {
                    let t = k * params.s;
                    w.is_active(t).then(|| w.position(t))
                })
                .collect()
        })
        .collect();

    let mut unchecked: BTreeSet<Coord> = BTreeSet::new();
    let mut checked: Vec<Coord> = Vec::new();
    let mut claimed_space: HashSet<VertexId> = HashSet::new();
    let mut recruited: Vec<u32> = Vec::new();
    let mut recruited_set: HashSet<u32> = HashSet::new();
    let mut stages = Vec::new();

    // stage 1: expose one walker of the root
    let seed_walker = field
        .walkers
        .iter()
        .position(|w| w.origin == root && w.is_active(0));
    let Some(w0) = seed_walker else {
        return Ok(ExplorationTrace {
            stages,
            recruited,
            terminated: Termination::RootUnoccupied,
        });
    };
    let root_coord = Coord {
        discovered: 0,
        t: 0,
        v: root,
    };
    claimed_space.insert(root);
    checked.push(root_coord);
    recruited.push(w0 as u32);
    recruited_set.insert(w0 as u32);
    claim_swalk_coords(
        &grid[w0],
        0,
        1,
        &mut claimed_space,
        &mut unchecked,
    )?;
    stages.push(StageRecord {
        stage: 1,
        a_len: (checked.len() + unchecked.len()) as u32,
        u_len: unchecked.len() as u32,
        flagged: false,
    });
    validate_state(&checked, &unchecked, &claimed_space, 1)?;

    let mut stage = 1u32;
    while !unchecked.is_empty() && stage < stage_cap {
        stage += 1;
        // pick the least unchecked coordinate whose vertex is good for the
        // current claimed set; fall back to the least overall
        let claimed_vec: Vec<VertexId> = {
            let mut v: Vec<_> = claimed_space.iter().copied().collect();
            v.sort();
            v
        };
        let mut pick: Option<Coord> = None;
        let mut flagged = false;
        if opts.good_mc > 0 {
            let mut good_cache: HashMap<VertexId, bool> = HashMap::new();
            for cand in unchecked.iter() {
                let good = *good_cache.entry(cand.v).or_insert_with(|| {
                    vertex_is_good(window, field.kernel, cand.v, &claimed_vec, params, opts, stage)
                });
                if good {
                    pick = Some(*cand);
                    break;
                }
            }
            if pick.is_none() {
                flagged = true;
            }
        }
        let coord = pick.unwrap_or_else(|| *unchecked.iter().next().expect("nonempty"));
        unchecked.remove(&coord);
        checked.push(coord);

        // reveal the walkers at the coordinate that avoided every other
        // claimed space at s-multiples
        let mut candidates: Vec<u32> = Vec::new();
        for (i, row) in grid.iter().enumerate() {
            if row[coord.t as usize] != Some(coord.v) {
                continue;
            }
            let avoids = row.iter().enumerate().all(|(k, cell)| {
                k as u32 == coord.t
                    || match cell {
                        Some(p) => !claimed_space.contains(p),
                        None => true,
                    }
            });
            if !avoids {
                continue;
            }
            if recruited_set.contains(&(i as u32)) {
                return Err(Error::invariant(
                    "a recruited walker reappeared in a revealed set",
                ));
            }
            candidates.push(i as u32);
        }
        if let Some(&w) = candidates.first() {
            recruited.push(w);
            recruited_set.insert(w);
            claim_swalk_coords(
                &grid[w as usize],
                coord.t,
                stage,
                &mut claimed_space,
                &mut unchecked,
            )?;
        }
        stages.push(StageRecord {
            stage,
            a_len: (checked.len() + unchecked.len()) as u32,
            u_len: unchecked.len() as u32,
            flagged,
        });
        validate_state(&checked, &unchecked, &claimed_space, stage)?;
    }

    Ok(ExplorationTrace {
        stages,
        recruited,
        terminated: if unchecked.is_empty() {
            Termination::Exhausted
        } else {
            Termination::StageCap
        },
    })
}

/// Monte Carlo goodness of one vertex against the currently claimed spaces.
fn vertex_is_good(
    window: &Window,
    kernel: WalkKernel,
    v: VertexId,
    claimed: &[VertexId],
    params: &ExploreParams,
    opts: &ExploreOptions,
    stage: u32,
) -> bool {
    let target_set: HashSet<VertexId> = claimed.iter().copied().collect();
    let max_depth = claimed
        .iter()
        .filter_map(|&c| window.depth(c).ok())
        .max()
        .unwrap_or(0);
    let key = StreamKey::root(opts.seed, "stage-good")
        .with(u64::from(stage))
        .with(v.0);
    let mut hits = 0u32;
    for sample in 0..opts.good_mc {
        if swalk_returns(
            window,
            kernel,
            v,
            &target_set,
            max_depth,
            params,
            key.with(u64::from(sample)),
        )
        .unwrap_or(false)
        {
            hits += 1;
        }
    }
    let est = f64::from(hits) / f64::from(opts.good_mc);
    let se = (est * (1.0 - est) / f64::from(opts.good_mc)).sqrt();
    est + 2.0 * se <= params.good_threshold()
}

/// Claim the (space-deduplicated) coordinates of a recruited walker's s-walk,
/// skipping the meeting index itself.
fn claim_swalk_coords(
    row: &[Option<VertexId>],
    meeting_index: u32,
    discovered_stage: u32,
    claimed_space: &mut HashSet<VertexId>,
    unchecked: &mut BTreeSet<Coord>,
) -> Result<()> {
    let mut seen: HashSet<VertexId> = HashSet::new();
    for (k, cell) in row.iter().enumerate() {
        let Some(p) = cell else { continue };
        if k as u32 == meeting_index {
            seen.insert(*p);
            continue;
        }
        if seen.contains(p) {
            continue; // repetition in the space coordinate
        }
        seen.insert(*p);
        if claimed_space.contains(p) {
            if *p == row[meeting_index as usize].expect("meeting cell is occupied") {
                continue;
            }
            return Err(Error::invariant(
                "recruited walk visited an already-claimed vertex despite avoidance",
            ));
        }
        claimed_space.insert(*p);
        unchecked.insert(Coord {
            discovered: discovered_stage,
            t: k as u32,
            v: *p,
        });
    }
    Ok(())
}

fn validate_state(
    checked: &[Coord],
    unchecked: &BTreeSet<Coord>,
    claimed_space: &HashSet<VertexId>,
    stage: u32,
) -> Result<()> {
    if checked.len() != stage as usize {
        return Err(Error::invariant(format!(
            "checked set has {} coordinates at stage {stage}",
            checked.len()
        )));
    }
    let mut spaces: HashSet<VertexId> = HashSet::new();
    for c in checked.iter() {
        if !spaces.insert(c.v) {
            return Err(Error::invariant("duplicate space coordinate in checked set"));
        }
    }
    for c in unchecked.iter() {
        if !spaces.insert(c.v) {
            return Err(Error::invariant(
                "checked and unchecked sets share a space coordinate",
            ));
        }
    }
    if spaces != *claimed_space {
        return Err(Error::invariant("claimed-space ledger out of sync"));
    }
    Ok(())
}

/// Exact cross-check: every recruited walker lies in one friend cluster of
/// the field at time s*M.
pub fn recruited_share_one_cluster(
    trace: &ExplorationTrace,
    clusters: &FriendClusters,
    span: u32,
) -> bool {
    let Some((&first, rest)) = trace.recruited.split_first() else {
        return true;
    };
    let mut uf = clusters.partition_at(span.min(clusters.horizon));
    let root = uf.find(first);
    rest.iter().all(|&w| uf.find(w) == root)
}

/// Time threshold ceil(C / (lambda (1 - rho))) for cluster growth.
pub fn t_threshold(c: f64, lambda: f64, rho: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::domain("threshold requires spectral radius < 1"));
    }
    if !(0.0..=1.0).contains(&lambda) || lambda == 0.0 {
        return Err(Error::domain("density must lie in (0, 1]"));
    }
    if c <= 0.0 {
        return Err(Error::domain("constant must be positive"));
    }
    let raw = c / (lambda * (1.0 - rho));
    // snap to the nearest integer before the ceiling: 1 - rho is inexact and
    // a few ulps above an integer ratio must not bump the threshold
    let snapped = raw.round();
    if (raw - snapped).abs() < 1e-9 * snapped.max(1.0) {
        Ok(snapped as u64)
    } else {
        Ok(raw.ceil() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::BoundaryPolicy;
    use crate::kernels::{spectral_radius_lazy, tree_kernel};
    use crate::snsim::coupling::CouplingStream;
    use crate::snsim::field::{realize_field, Walker};
    use crate::snsim::meetings::simulate_meetings;

    fn tree_window(d: u32, r: u32) -> Window {
        Window::new(GraphFamily::RegularTree { degree: d }, r, BoundaryPolicy::Reject).unwrap()
    }

    #[test]
    fn derived_parameters_match_the_formulas() {
        let rho = spectral_radius_lazy(GraphFamily::RegularTree { degree: 6 }, 0.5);
        let p = ExploreParams::derive(3.0, 1.0, rho).unwrap();
        assert_eq!(p.s, (24.0 / (1.0 - rho)).ceil() as u32);
        assert_eq!(p.m, 96);
        assert!(p.rho_s() <= (-24.0f64).exp() * (1.0 + 1e-9));
        assert!(ExploreParams::derive(2.0, 1.0, rho).is_err());
        assert!(ExploreParams::derive(3.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn s_walk_of_one_step_is_the_base_kernel() {
        let base = WalkKernel::half_holding(4);
        let q = s_walk_kernel(base, 1).unwrap();
        let table = tree_kernel(4, 0.5, 1).unwrap();
        assert_eq!(q.point(&table, 0), table.point(1, 0));
        assert!(s_walk_kernel(base, 0).is_err());
    }

    #[test]
    fn s_walk_diagonal_matches_monte_carlo() {
        let d = 4u32;
        let base = WalkKernel::half_holding(d);
        let s = 10u32;
        let q = s_walk_kernel(base, s).unwrap();
        let table = tree_kernel(d, 0.5, s).unwrap();
        let exact = q.point(&table, 0);
        // Monte Carlo: sample s steps on the infinite tree, count returns
        let window = tree_window(d, 12);
        let key = StreamKey::root(31, "swalk-mc");
        let n = 200_000u32;
        let mut hits = 0u64;
        for i in 0..n {
            let mut walk = BallWalk::new(&window, base, window.root()).unwrap();
            for t in 0..s {
                walk.step(key.with(u64::from(i)), t);
            }
            if walk.position() == Some(window.root()) {
                hits += 1;
            }
        }
        let mc = hits as f64 / f64::from(n);
        let se = (mc * (1.0 - mc) / f64::from(n)).sqrt();
        assert!((mc - exact).abs() <= 3.0 * se, "mc {mc} vs exact {exact}");
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(t_threshold(10.0, 0.5, 0.9).unwrap(), 200);
        assert_eq!(t_threshold(1.0, 1.0, 0.0).unwrap(), 1);
        let rho = spectral_radius_lazy(GraphFamily::RegularTree { degree: 4 }, 0.5);
        assert_eq!(t_threshold(32.0, 1.0, rho).unwrap(), 478);
        assert!(t_threshold(32.0, 1.0, 1.0).is_err());
        assert!(t_threshold(32.0, 1.5, 0.9).is_err());
    }

    #[test]
    fn goodness_rejects_empty_inputs() {
        let window = tree_window(4, 4);
        let kernel = WalkKernel::half_holding(4);
        let params = ExploreParams::with_overrides(3.0, 1.0, 0.9, 4, 8).unwrap();
        assert!(estimate_good_set(&window, kernel, &[], &params, 10, 0).is_err());
        assert!(
            estimate_good_set(&window, kernel, &[window.root()], &params, 0, 0).is_err()
        );
    }

    #[test]
    fn far_vertex_with_long_blocks_is_good() {
        let d = 6u32;
        let window = tree_window(d, 6);
        let kernel = WalkKernel::half_holding(d);
        let rho = spectral_radius_lazy(GraphFamily::RegularTree { degree: d }, 0.5);
        let params = ExploreParams::derive(3.0, 1.0, rho).unwrap();
        let report =
            estimate_good_set(&window, kernel, &[window.root()], &params, 2_000, 9).unwrap();
        assert_eq!(report.members, vec![window.root()], "transient s-walk never returns");
        assert!(report.pi_avg <= params.rho_s() + 2.0 * report.pi_avg_se + 1e-12);
    }

    #[test]
    fn empty_field_terminates_immediately() {
        let window = tree_window(4, 3);
        let kernel = WalkKernel::half_holding(4);
        let field = WalkerField {
            window: window.clone(),
            kernel,
            horizon: 64,
            lambda: 1.0,
            walkers: vec![],
        };
        let params = ExploreParams::with_overrides(3.0, 1.0, 0.93, 4, 8).unwrap();
        let trace =
            run_exploration(&field, &params, window.root(), &ExploreOptions::default()).unwrap();
        assert_eq!(trace.terminated, Termination::RootUnoccupied);
        assert!(trace.stages.is_empty());
        assert!(trace.recruited.is_empty());
    }

    #[test]
    fn horizon_shorter_than_span_is_rejected() {
        let window = tree_window(4, 3);
        let kernel = WalkKernel::half_holding(4);
        let stream = CouplingStream::new(3);
        let field = realize_field(&stream, &window, kernel, 1.0, 8, &[]).unwrap();
        let params = ExploreParams::with_overrides(3.0, 1.0, 0.93, 4, 8).unwrap();
        assert!(run_exploration(&field, &params, window.root(), &ExploreOptions::default())
            .is_err());
    }

    #[test]
    fn fixture_recruitment_adds_m_or_m_minus_one_coordinates() {
        // one root walker whose s-walk (s=1, M=6) visits distinct vertices:
        // root -> chain of depth 6 along first children
        let window = tree_window(3, 8);
        let kernel = WalkKernel::half_holding(3);
        let chain: Vec<VertexId> = (0..=6u32)
            .map(|k| window.vertex_at_distance(k).unwrap())
            .collect();
        let walkers = vec![Walker {
            origin: window.root(),
            index: 0,
            trajectory: chain.clone(),
            frozen_at: None,
            first_boundary: None,
        }];
        let field = WalkerField {
            window: window.clone(),
            kernel,
            horizon: 6,
            lambda: 1.0,
            walkers,
        };
        let params = ExploreParams::with_overrides(3.0, 1.0, 0.9, 1, 6).unwrap();
        let opts = ExploreOptions {
            good_mc: 0,
            ..Default::default()
        };
        let trace = run_exploration(&field, &params, window.root(), &opts).unwrap();
        // |A_1| = 1 (root) + 6 distinct new coordinates
        assert_eq!(trace.stages[0].a_len, 7);
        assert_eq!(trace.stages[0].u_len, 6);
        assert_eq!(trace.recruited, vec![0]);
    }

    #[test]
    fn exploration_bookkeeping_and_cluster_certificate() {
        let d = 4u32;
        let window = tree_window(d, 6);
        let kernel = WalkKernel::half_holding(d);
        let params = ExploreParams::with_overrides(3.0, 1.0, 0.93, 3, 8).unwrap();
        let opts = ExploreOptions {
            good_mc: 0,
            stage_cap: 200,
            seed: 5,
        };
        for seed in 0..20u64 {
            let stream = CouplingStream::new(seed);
            let field = realize_field(&stream, &window, kernel, 1.0, 24, &[window.root()])
                .unwrap();
            let trace = run_exploration(&field, &params, window.root(), &opts).unwrap();
            // recruited exactly once
            let mut sorted = trace.recruited.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), trace.recruited.len());
            // all recruited walkers share one friend cluster at time s*M
            let (clusters, _) = simulate_meetings(&field).unwrap();
            assert!(recruited_share_one_cluster(&trace, &clusters, 24));
        }
    }

    #[test]
    fn trace_csv_layout() {
        let trace = ExplorationTrace {
            stages: vec![StageRecord {
                stage: 1,
                a_len: 5,
                u_len: 4,
                flagged: false,
            }],
            recruited: vec![0],
            terminated: Termination::Exhausted,
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "stage,a_len,u_len,flagged\n1,5,4,false\n"
        );
    }
}
