//! Statistical validators for the model's distributional identities and the
//! closed-form critical-density brackets, plus the density sweep estimator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::{GraphFamily, VertexId, Window};
use crate::kernels::{spectral_radius_lazy, WalkKernel};
use crate::replicas::{replica_seed, run_replicas};
use crate::rng::StreamKey;
use crate::snsim::coupling::{step_walker, CouplingStream, StepOutcome};
use crate::snsim::estimators::{
    run_pair_replica, summarize, PairConnectivityReport, PairSweepConfig, ReplicaRecord,
};
use crate::stats::{linear_slope, pearson, OnlineStats};

/// Exact t-step law of the lazy walk on the cycle, as the displacement
/// distribution `row[j] = P^t(0, j)`.
pub fn cycle_kernel_row(length: u64, holding: f64, t: u32) -> Vec<f64> {
    let n = length as usize;
    let mut row = vec![0.0f64; n];
    row[0] = 1.0;
    let move_half = (1.0 - holding) / 2.0;
    for _ in 0..t {
        let mut next = vec![0.0f64; n];
        for (j, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            next[j] += p * holding;
            next[(j + 1) % n] += p * move_half;
            next[(j + n - 1) % n] += p * move_half;
        }
        row = next;
    }
    row
}

#[derive(Clone, Debug, Serialize)]
pub struct StationarityRow {
    pub t: u32,
    pub mean: f64,
    pub mean_band: f64,
    pub dispersion: f64,
    pub neighbor_corr: f64,
    pub corr_band: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationarityReport {
    pub lambda: f64,
    pub samples: u64,
    pub rows: Vec<StationarityRow>,
    pub warning: Option<String>,
    pub pass: bool,
}

/// Occupation-measure stationarity: on a periodic window the per-vertex
/// counts at any fixed time are i.i.d. Poisson(lambda). Checks the sample
/// mean within 3 sqrt(lambda/N), the dispersion index in [0.95, 1.05], and
/// the neighbor-count correlation within 3 standard errors of zero.
pub fn stationarity_test(
    window: &Window,
    kernel: WalkKernel,
    lambda: f64,
    t_list: &[u32],
    target_samples: u64,
    seed: u64,
) -> Result<StationarityReport> {
    if lambda <= 0.0 {
        return Err(Error::domain("density must be positive"));
    }
    let warning = if !window.is_saturated() {
        Some("window has a boundary; occupation stationarity is biased there".to_string())
    } else {
        None
    };
    let vertex_count = window.ball_size();
    let replicas = target_samples.div_ceil(vertex_count).max(1) as u32;
    let t_max = t_list.iter().copied().max().unwrap_or(0);

    // per replica: per-vertex counts at each requested time
    let per_replica = run_replicas(replicas, |r| {
        let stream = CouplingStream::new(replica_seed(seed, r));
        let mut walkers: Vec<(VertexId, StreamKey)> = Vec::new();
        for v in window.iter_vertices() {
            let count = stream.walker_count(v, lambda);
            for i in 0..count {
                walkers.push((v, stream.walk_key(v, i)));
            }
        }
        let mut positions: Vec<VertexId> = walkers.iter().map(|&(v, _)| v).collect();
        let mut snapshots: Vec<Vec<u32>> = Vec::with_capacity(t_list.len());
        for t in 0..=t_max {
            if t_list.contains(&t) {
                let mut hist = vec![0u32; vertex_count as usize];
                for &p in &positions {
                    hist[p.0 as usize] += 1;
                }
                snapshots.push(hist);
            }
            if t == t_max {
                break;
            }
            for (i, pos) in positions.iter_mut().enumerate() {
                match step_walker(window, &kernel, walkers[i].1, t, *pos) {
                    StepOutcome::Moved(next) => *pos = next,
                    StepOutcome::Stayed => {}
                    StepOutcome::Frozen => {}
                }
            }
        }
        snapshots
    });

    let mut rows = Vec::with_capacity(t_list.len());
    let mut sorted_times: Vec<u32> = t_list.to_vec();
    sorted_times.sort_unstable();
    sorted_times.dedup();
    for (idx, &t) in sorted_times.iter().enumerate() {
        let mut acc = OnlineStats::new();
        let mut pairs_x = Vec::new();
        let mut pairs_y = Vec::new();
        for snap in &per_replica {
            let hist = &snap[idx];
            for (v, &c) in hist.iter().enumerate() {
                acc.push(f64::from(c));
                let (nbr, _) = window.step_target(VertexId(v as u64), 0);
                pairs_x.push(f64::from(c));
                pairs_y.push(f64::from(hist[nbr.0 as usize]));
            }
        }
        let n = acc.count() as f64;
        let mean_band = 3.0 * (lambda / n).sqrt();
        let corr = pearson(&pairs_x, &pairs_y);
        let corr_band = 3.0 / (pairs_x.len() as f64).sqrt();
        let dispersion = acc.dispersion();
        let pass = (acc.mean() - lambda).abs() <= mean_band
            && (0.95..=1.05).contains(&dispersion)
            && corr.abs() <= corr_band;
        rows.push(StationarityRow {
            t,
            mean: acc.mean(),
            mean_band,
            dispersion,
            neighbor_corr: corr,
            corr_band,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(StationarityReport {
        lambda,
        samples: per_replica.len() as u64 * vertex_count,
        rows,
        warning,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RegenRow {
    pub t: u32,
    pub vertex: u64,
    pub distance_to_set: u64,
    pub mean: f64,
    pub se: f64,
    /// The thinning identity lambda (1 - sum_{a in A} P^t(v, a)).
    pub expected: f64,
    pub identity_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegenerationReport {
    pub lambda: f64,
    pub replicas: u32,
    pub rows: Vec<RegenRow>,
    /// Mean at the far vertex and largest time within 5% of lambda.
    pub far_band_pass: bool,
    /// Deficit at the excluded vertex nonincreasing across the time list.
    pub deficit_monotone_pass: bool,
    pub pass: bool,
}

/// Regeneration: walkers originating outside the finite set `a_set` restore
/// near-Poisson(lambda) occupancy as t grows. Counts are measured at the
/// first excluded vertex, a nearby vertex, and the antipodal vertex, and
/// compared against the exact thinning identity.
pub fn regeneration_test(
    length: u64,
    lambda: f64,
    a_set: &[VertexId],
    t_list: &[u32],
    replicas: u32,
    seed: u64,
) -> Result<RegenerationReport> {
    let window = Window::full(GraphFamily::Cycle { length }, crate::graphs::BoundaryPolicy::Reject)?;
    let kernel = WalkKernel::half_holding(2);
    if t_list.is_empty() {
        return Err(Error::domain("need at least one time"));
    }
    let mut times: Vec<u32> = t_list.to_vec();
    times.sort_unstable();
    let t_max = *times.last().expect("nonempty");
    let anchor = a_set.first().copied().unwrap_or(VertexId(0));
    let near = VertexId((anchor.0 + 10) % length);
    let far = VertexId((anchor.0 + length / 2) % length);
    let measured = [anchor, near, far];

    let per_replica = run_replicas(replicas, |r| {
        let stream = CouplingStream::new(replica_seed(seed, r));
        let mut walkers: Vec<(VertexId, StreamKey)> = Vec::new();
        for v in window.iter_vertices() {
            if a_set.contains(&v) {
                continue; // only walkers from outside the set count
            }
            let count = stream.walker_count(v, lambda);
            for i in 0..count {
                walkers.push((v, stream.walk_key(v, i)));
            }
        }
        let mut positions: Vec<VertexId> = walkers.iter().map(|&(v, _)| v).collect();
        let mut out = vec![[0u32; 3]; times.len()];
        for t in 0..=t_max {
            if let Some(slot) = times.iter().position(|&x| x == t) {
                for &p in &positions {
                    for (m, &mv) in measured.iter().enumerate() {
                        if p == mv {
                            out[slot][m] += 1;
                        }
                    }
                }
            }
            if t == t_max {
                break;
            }
            for (i, pos) in positions.iter_mut().enumerate() {
                if let StepOutcome::Moved(next) =
                    step_walker(&window, &kernel, walkers[i].1, t, *pos)
                {
                    *pos = next;
                }
            }
        }
        out
    });

    let mut rows = Vec::new();
    let mut anchor_deficits: Vec<(f64, f64)> = Vec::new(); // (deficit, se)
    let mut far_band_pass = true;
    for (slot, &t) in times.iter().enumerate() {
        let krow = cycle_kernel_row(length, kernel.holding, t);
        for (m, &mv) in measured.iter().enumerate() {
            let mut acc = OnlineStats::new();
            for rep in &per_replica {
                acc.push(f64::from(rep[slot][m]));
            }
            let hit_mass: f64 = a_set
                .iter()
                .map(|a| krow[((a.0 + length - mv.0) % length) as usize])
                .sum();
            let expected = lambda * (1.0 - hit_mass);
            let identity_pass = (acc.mean() - expected).abs() <= 4.0 * acc.stderr().max(1e-9);
            let distance = window.distance(mv, anchor)?;
            if m == 0 {
                anchor_deficits.push((lambda - acc.mean(), acc.stderr()));
            }
            if m == 2 && t == t_max {
                far_band_pass = (acc.mean() - lambda).abs() <= 0.05 * lambda;
            }
            rows.push(RegenRow {
                t,
                vertex: mv.0,
                distance_to_set: distance,
                mean: acc.mean(),
                se: acc.stderr(),
                expected,
                identity_pass,
            });
        }
    }
    let mut deficit_monotone_pass = true;
    for pair in anchor_deficits.windows(2) {
        let (d0, s0) = pair[0];
        let (d1, s1) = pair[1];
        let allowance = 3.0 * (s0 * s0 + s1 * s1).sqrt();
        if d1 > d0 + allowance {
            deficit_monotone_pass = false;
        }
    }
    let identity_all = rows.iter().all(|r| r.identity_pass);
    Ok(RegenerationReport {
        lambda,
        replicas,
        rows,
        far_band_pass,
        deficit_monotone_pass,
        pass: identity_all && far_band_pass && deficit_monotone_pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MeetingCountReport {
    pub lambda: f64,
    pub replicas: u32,
    /// (t, mean of N_t) on the fitted grid.
    pub curve: Vec<(u32, f64)>,
    pub slope: f64,
    pub dispersion_at_horizon: f64,
    pub monotone: bool,
}

/// Distinct outside walkers meeting a fixed trajectory: N_t counts walkers
/// (not starting at the path's origin) that co-occupied the path position at
/// some time <= t. The path is held constant at the origin vertex; on the
/// cycle the count grows diffusively, so log E[N_t] against log t fits a
/// slope near 1/2.
pub fn meeting_count_test(
    length: u64,
    lambda: f64,
    t_max: u32,
    replicas: u32,
    seed: u64,
) -> Result<MeetingCountReport> {
    let window = Window::full(GraphFamily::Cycle { length }, crate::graphs::BoundaryPolicy::Reject)?;
    let kernel = WalkKernel::half_holding(2);
    let path_vertex = VertexId(0);

    // geometric fit grid within [10, t_max]
    let mut grid: Vec<u32> = Vec::new();
    let mut g = 10f64;
    while (g as u32) < t_max {
        grid.push(g as u32);
        g *= 1.4;
    }
    grid.push(t_max);
    grid.dedup();

    let per_replica = run_replicas(replicas, |r| {
        let stream = CouplingStream::new(replica_seed(seed, r));
        // distinct-walker first hits of the constant path, histogrammed by time
        let mut first_hits = vec![0u32; t_max as usize + 1];
        for v in window.iter_vertices() {
            if v == path_vertex {
                continue; // outside walkers only
            }
            if window.distance(v, path_vertex).expect("in window") > u64::from(t_max) {
                continue; // cannot reach the path in time
            }
            let count = stream.walker_count(v, lambda);
            for i in 0..count {
                let key = stream.walk_key(v, i);
                let mut pos = v;
                for t in 0..=t_max {
                    if pos == path_vertex {
                        first_hits[t as usize] += 1;
                        break;
                    }
                    if t == t_max {
                        break;
                    }
                    if let StepOutcome::Moved(next) = step_walker(&window, &kernel, key, t, pos)
                    {
                        pos = next;
                    }
                }
            }
        }
        // prefix sums: N_t
        let mut acc = 0u32;
        for h in first_hits.iter_mut() {
            acc += *h;
            *h = acc;
        }
        first_hits
    });

    // fit over every integer t in [10, t_max]; report the geometric grid
    let reps = per_replica.len() as f64;
    let mut means = vec![0.0f64; t_max as usize + 1];
    for rep in &per_replica {
        for (m, &n) in means.iter_mut().zip(rep.iter()) {
            *m += f64::from(n) / reps;
        }
    }
    let curve: Vec<(u32, f64)> = grid.iter().map(|&t| (t, means[t as usize])).collect();
    let fit_lo = 10usize.min(t_max as usize);
    let xs: Vec<f64> = (fit_lo..=t_max as usize).map(|t| (t as f64).ln()).collect();
    let ys: Vec<f64> = (fit_lo..=t_max as usize)
        .map(|t| means[t].max(1e-12).ln())
        .collect();
    let slope = linear_slope(&xs, &ys);
    let mut disp = OnlineStats::new();
    for rep in &per_replica {
        disp.push(f64::from(rep[t_max as usize]));
    }
    let monotone = curve.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12);
    Ok(MeetingCountReport {
        lambda,
        replicas,
        curve,
        slope,
        dispersion_at_horizon: disp.dispersion(),
        monotone,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bracket {
    pub lower: f64,
    /// None for amenable families, where the critical density is zero and
    /// the nonamenable upper-bound formulas do not apply.
    pub upper: Option<f64>,
}

/// Closed-form critical-density bracket on the d-regular tree: the lower
/// bound (rho^{-1} - 1)/2 from the branching-walk comparison, and the upper
/// bound (d + 1 + 2/(1-rho)) log 8 at holding 1/(d+1), or
/// 20 log d / (1 - rho) at holding 1/2.
pub fn lambda_c_bracket(family: GraphFamily, holding: f64) -> Result<Bracket> {
    let rho = spectral_radius_lazy(family, holding);
    let GraphFamily::RegularTree { degree } = family else {
        return Ok(Bracket {
            lower: 0.0,
            upper: None,
        });
    };
    let d = f64::from(degree);
    let lower = (1.0 / rho - 1.0) / 2.0;
    let uniform = (holding - 1.0 / (d + 1.0)).abs() < 1e-12;
    let half = (holding - 0.5).abs() < 1e-12;
    let upper = if uniform {
        (d + 1.0 + 2.0 / (1.0 - rho)) * 8.0f64.ln()
    } else if half {
        20.0 * d.ln() / (1.0 - rho)
    } else {
        return Err(Error::domain(
            "bracket formulas exist for holding 1/2 and 1/(d+1) only",
        ));
    };
    if lower >= upper {
        return Err(Error::invariant(format!(
            "bracket degenerate: lower {lower} >= upper {upper}"
        )));
    }
    Ok(Bracket {
        lower,
        upper: Some(upper),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub horizon: u32,
    pub radius: u32,
    pub pair_distance: u32,
    pub points: Vec<PairConnectivityReport>,
    /// First grid density whose estimate reaches 1/2 (a labeling heuristic,
    /// not an estimate of the true critical density).
    pub crossover: Option<f64>,
    pub max_censored_fraction: f64,
}

/// Pair-connectivity estimates over an ascending density grid, one coupled
/// stream per replica reused across the whole grid. Per-replica curves are
/// nondecreasing in the density by construction, and that is checked.
pub fn lambda_sweep(
    window: &Window,
    kernel: WalkKernel,
    lambda_grid: &[f64],
    horizon: u32,
    pair_distance: u32,
    replicas: u32,
    seed: u64,
) -> Result<(SweepReport, Vec<ReplicaRecord>)> {
    let u = window.root();
    let v = window.vertex_at_distance(pair_distance)?;
    let cfg = PairSweepConfig {
        window,
        kernel,
        lambdas: lambda_grid,
        horizon,
        u,
        v,
        force_occupancy: true,
    };
    let runs = run_replicas(replicas, |r| {
        let stream = CouplingStream::new(replica_seed(seed, r));
        run_pair_replica(&stream, &cfg)
    });
    let mut per_level = vec![Vec::with_capacity(replicas as usize); lambda_grid.len()];
    let mut records = Vec::with_capacity(replicas as usize * lambda_grid.len());
    for (r, run) in runs.into_iter().enumerate() {
        let outcomes = run?;
        for (l, outcome) in outcomes.into_iter().enumerate() {
            records.push(ReplicaRecord {
                seed,
                replica: r as u32,
                lambda: lambda_grid[l],
                horizon,
                radius: window.radius,
                family: window.family,
                defined: outcome.defined,
                connected_at: outcome.connected_at,
                censored: outcome.censored,
            });
            per_level[l].push(outcome);
        }
    }
    let mut points = Vec::with_capacity(lambda_grid.len());
    for (l, outcomes) in per_level.iter().enumerate() {
        points.push(summarize(lambda_grid[l], horizon, replicas, outcomes));
    }
    let crossover = points
        .iter()
        .find(|p| p.estimate.unwrap_or(0.0) >= 0.5)
        .map(|p| p.lambda);
    let max_censored = points
        .iter()
        .map(|p| p.censored_fraction)
        .fold(0.0f64, f64::max);
    Ok((
        SweepReport {
            horizon,
            radius: window.radius,
            pair_distance,
            points,
            crossover,
            max_censored_fraction: max_censored,
        },
        records,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::BoundaryPolicy;

    #[test]
    fn cycle_kernel_row_is_a_distribution_with_symmetry() {
        let row = cycle_kernel_row(101, 0.5, 25);
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for j in 1..50 {
            assert!((row[j] - row[101 - j]).abs() < 1e-14);
        }
        assert!(row[0] > row[1]);
    }

    #[test]
    fn bracket_examples() {
        let t4 = GraphFamily::RegularTree { degree: 4 };
        let b = lambda_c_bracket(t4, 0.2).unwrap();
        assert!((b.lower - 0.060_023_094_349_489_714).abs() < 1e-12, "lower {}", b.lower);
        let upper = b.upper.unwrap();
        assert!((upper - 49.201_2).abs() < 0.01, "upper {upper}");
        let bh = lambda_c_bracket(t4, 0.5).unwrap();
        assert!((bh.upper.unwrap() - 413.897).abs() < 0.05);
        assert!(bh.lower < bh.upper.unwrap());
        let amen = lambda_c_bracket(GraphFamily::Cycle { length: 64 }, 0.5).unwrap();
        assert_eq!(amen.lower, 0.0);
        assert!(amen.upper.is_none());
        assert!(lambda_c_bracket(t4, 0.33).is_err());
    }

    #[test]
    fn bracket_orders_for_all_desk_degrees() {
        for d in 3..=64u32 {
            for holding in [0.5, 1.0 / f64::from(d + 1)] {
                let b =
                    lambda_c_bracket(GraphFamily::RegularTree { degree: d }, holding).unwrap();
                assert!(b.lower < b.upper.unwrap(), "d={d} h={holding}");
            }
        }
    }

    #[test]
    fn stationarity_on_a_small_cycle() {
        let window = Window::full(GraphFamily::Cycle { length: 200 }, BoundaryPolicy::Reject)
            .unwrap();
        let report = stationarity_test(
            &window,
            WalkKernel::half_holding(2),
            1.0,
            &[0, 5],
            20_000,
            77,
        )
        .unwrap();
        assert!(report.warning.is_none());
        assert!(report.pass, "report: {report:?}");
    }

    #[test]
    fn stationarity_warns_on_tree_windows() {
        let window = Window::new(
            GraphFamily::RegularTree { degree: 3 },
            4,
            BoundaryPolicy::Absorb,
        )
        .unwrap();
        let report = stationarity_test(
            &window,
            WalkKernel::half_holding(3),
            0.5,
            &[0],
            2_000,
            1,
        )
        .unwrap();
        assert!(report.warning.is_some());
    }

    #[test]
    fn regeneration_with_empty_set_degenerates_to_stationarity() {
        let report = regeneration_test(200, 1.0, &[], &[5, 20], 800, 3).unwrap();
        for row in &report.rows {
            assert!((row.expected - 1.0).abs() < 1e-12, "no exclusion: identity is lambda");
        }
        assert!(report.pass, "report: {report:?}");
    }

    #[test]
    fn regeneration_identity_at_time_zero() {
        // at t=0 outside-originating walkers cannot sit inside A: the count
        // at the excluded vertex is exactly zero and the identity gives 0
        let report = regeneration_test(100, 1.0, &[VertexId(0)], &[0], 400, 9).unwrap();
        let row0 = report
            .rows
            .iter()
            .find(|r| r.t == 0 && r.vertex == 0)
            .expect("measured");
        assert_eq!(row0.mean, 0.0);
        assert!((row0.expected - 0.0).abs() < 1e-12);
        assert!(row0.identity_pass);
    }

    #[test]
    fn sweep_reports_monotone_points_and_crossover() {
        let window = Window::new(
            GraphFamily::RegularTree { degree: 4 },
            5,
            BoundaryPolicy::Reject,
        )
        .unwrap();
        let (report, records) = lambda_sweep(
            &window,
            WalkKernel::half_holding(4),
            &[0.2, 2.0, 20.0],
            16,
            2,
            80,
            5,
        )
        .unwrap();
        assert_eq!(report.points.len(), 3);
        let ests: Vec<f64> = report.points.iter().map(|p| p.estimate.unwrap()).collect();
        assert!(ests[0] <= ests[1] + 1e-12 && ests[1] <= ests[2] + 1e-12);
        assert!(report.crossover.is_some(), "density 20 saturates connectivity");
        assert_eq!(records.len(), 3 * 80);
    }
}
