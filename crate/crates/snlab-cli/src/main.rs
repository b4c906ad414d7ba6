//! Reproducible experiment runner for the social-network model laboratory.
//!
//! Every subcommand is a pure function of its resolved configuration: the
//! run writes CSV/JSON artifacts plus a manifest echoing the configuration
//! and the crate version, and rerunning with the same flags and seed yields
//! byte-identical files. Exit codes: 0 ok, 1 invalid configuration,
//! 2 invariant failure, 3 statistical acceptance failure.

mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use snlab::analysis::{
    lambda_c_bracket, lambda_sweep, meeting_count_test, regeneration_test, stationarity_test,
};
use snlab::brw::{domination_experiment, expected_generation_mean, subcritical_check, BrwSim};
use snlab::explore::{run_exploration, ExploreOptions, ExploreParams};
use snlab::graphs::{BoundaryPolicy, GraphFamily, VertexId, Window};
use snlab::kernels::{check_kernel_bounds, spectral_radius_lazy, tree_kernel, WalkKernel};
use snlab::replicas::{replica_seed, run_replicas};
use snlab::snsim::{realize_field, simulate_meetings, CouplingStream};
use snlab::stats::OnlineStats;
use snlab::treeperc::{calibrate_density_prefactor, simultaneous_goodness_rate};
use snlab::Error as SnError;

const EXIT_CONFIG: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_STATISTICAL: u8 = 3;

#[derive(Debug)]
struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn config(msg: impl Into<String>) -> Self {
        CmdError {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    fn invariant(msg: impl Into<String>) -> Self {
        CmdError {
            code: EXIT_INVARIANT,
            message: msg.into(),
        }
    }

    fn statistical(msg: impl Into<String>) -> Self {
        CmdError {
            code: EXIT_STATISTICAL,
            message: msg.into(),
        }
    }
}

impl From<SnError> for CmdError {
    fn from(e: SnError) -> Self {
        match e {
            SnError::Domain(_) => CmdError::config(e.to_string()),
            SnError::Invariant(_) | SnError::OutOfWindow(_) => CmdError::invariant(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::config(format!("io error: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "snlab",
    version,
    about = "Experiment runner for the social-network model on regular graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form critical-density bracket on the d-regular tree.
    Bracket(BracketArgs),
    /// Exact kernel table, bound checks, optional enumeration oracle.
    Kernels(KernelsArgs),
    /// Occupation-measure stationarity on a periodic window.
    Stationarity(StationarityArgs),
    /// Regeneration of occupancy outside a finite excluded set.
    Regen(RegenArgs),
    /// Meeting counts along a fixed trajectory.
    Meetings(MeetingsArgs),
    /// Pair-connectivity sweep over a density grid.
    Sweep(SweepArgs),
    /// Staged exploration over a realized field.
    Explore(ExploreArgs),
    /// Branching-walk generation means, subcriticality, domination.
    Brw(BrwArgs),
    /// Tree-percolation goodness experiment and calibration.
    Treeperc(TreepercArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory for artifacts and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed; every random quantity derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BracketArgs {
    #[arg(long)]
    d: u32,
    /// Holding probability (1/2 or 1/(d+1)).
    #[arg(long)]
    h: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct KernelsArgs {
    #[arg(long, default_value_t = 3)]
    d: u32,
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    /// Table horizon exported to CSV.
    #[arg(long, default_value_t = 6)]
    t: u32,
    /// Horizon of the decay/return bound checks.
    #[arg(long, default_value_t = 64)]
    bounds_t: u32,
    /// Compare the table against exhaustive walk enumeration (t <= 8).
    #[arg(long, default_value_t = false)]
    oracle: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct StationarityArgs {
    /// Periodic family: cycle or torus.
    #[arg(long, default_value = "cycle")]
    family: String,
    /// Cycle length.
    #[arg(long, default_value_t = 1000)]
    n: u64,
    /// Torus side (dim fixed to 2).
    #[arg(long, default_value_t = 32)]
    side: u64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,10,50")]
    t_list: Vec<u32>,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RegenArgs {
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Excluded vertex (the finite set A = {a}).
    #[arg(long, default_value_t = 0)]
    a: u64,
    #[arg(long, value_delimiter = ',', default_value = "10,30,100")]
    t_list: Vec<u32>,
    #[arg(long, default_value_t = 3000)]
    replicas: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MeetingsArgs {
    #[arg(long, default_value_t = 4000)]
    n: u64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1000)]
    t_max: u32,
    #[arg(long, default_value_t = 1000)]
    replicas: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Family: tree or torus.
    #[arg(long, default_value = "tree")]
    family: String,
    #[arg(long, default_value_t = 4)]
    d: u32,
    #[arg(long, default_value_t = 0.2)]
    h: f64,
    /// Torus side when family = torus.
    #[arg(long, default_value_t = 64)]
    side: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,1,2,4,8,16,32")]
    lambda_grid: Vec<f64>,
    /// Horizon T.
    #[arg(long, default_value_t = 64)]
    t: u32,
    /// Window radius R (tree family).
    #[arg(long, default_value_t = 8)]
    r: u32,
    #[arg(long, default_value_t = 4)]
    pair_distance: u32,
    #[arg(long, default_value_t = 100)]
    replicas: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long, default_value_t = 6)]
    d: u32,
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    /// Margin K (>= 3) feeding s and M.
    #[arg(long, default_value_t = 3.0)]
    k: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Desk-scale overrides for the derived block length and budget.
    #[arg(long)]
    s: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, default_value_t = 4)]
    r: u32,
    #[arg(long, default_value_t = 50)]
    replicas: u32,
    /// Monte Carlo samples per goodness query (0 disables the gate).
    #[arg(long, default_value_t = 200)]
    good_mc: u32,
    #[arg(long, default_value_t = 0)]
    stage_cap: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BrwArgs {
    #[arg(long, default_value_t = 3)]
    d: u32,
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Largest generation for the mean checks.
    #[arg(long, default_value_t = 5)]
    n_max: u32,
    /// Populations for the generation-mean Monte Carlo.
    #[arg(long, default_value_t = 100_000)]
    pops: u32,
    /// Also run the visit-count domination experiment.
    #[arg(long, default_value_t = false)]
    domination: bool,
    /// Window radius for the domination experiment.
    #[arg(long, default_value_t = 12)]
    r: u32,
    /// Horizon (generations) for the domination experiment.
    #[arg(long, default_value_t = 10)]
    horizon: u32,
    #[arg(long, default_value_t = 2000)]
    dom_replicas: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct TreepercArgs {
    #[arg(long, default_value_t = 25)]
    d: u32,
    /// Density; defaults to 1.05 * C_min * sqrt(d) from the calibration.
    #[arg(long)]
    lambda: Option<f64>,
    /// Half-times t; goodness is reported at the even times 2t.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    t_list: Vec<u32>,
    #[arg(long, default_value_t = 2000)]
    replicas: u32,
    /// Depth of the second root inside the right forest.
    #[arg(long, default_value_t = 2)]
    v_depth: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct Manifest {
    subcommand: String,
    version: String,
    seed: u64,
    config: Vec<(String, String)>,
    warnings: Vec<String>,
    outputs: Vec<String>,
}

struct RunContext {
    subcommand: String,
    out_dir: PathBuf,
    seed: u64,
    config: Vec<(String, String)>,
    warnings: Vec<String>,
    outputs: Vec<String>,
}

impl RunContext {
    fn new(subcommand: &str, output: &OutputArgs) -> Self {
        RunContext {
            subcommand: subcommand.to_string(),
            out_dir: output.out.clone(),
            seed: output.seed,
            config: vec![("seed".into(), output.seed.to_string())],
            warnings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn record(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    fn write_text(&mut self, name: &str, contents: &str) -> Result<(), CmdError> {
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CmdError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CmdError::invariant(format!("serialization failed: {e}")))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn finish(mut self) -> Result<(), CmdError> {
        let manifest = Manifest {
            subcommand: self.subcommand.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: std::mem::take(&mut self.config),
            warnings: self.warnings.clone(),
            outputs: self.outputs.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CmdError::invariant(format!("serialization failed: {e}")))?;
        text.push('\n');
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    match run(raw) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(raw: Vec<String>) -> Result<(), CmdError> {
    let mut iter = raw.into_iter();
    let bin = iter.next().unwrap_or_else(|| "snlab".to_string());
    let rest: Vec<String> = iter.collect();
    let (rest, config_path) = config::split_config_flag(rest).map_err(CmdError::config)?;
    let args = match config_path {
        Some(path) => {
            if rest.is_empty() {
                return Err(CmdError::config("missing subcommand"));
            }
            let injected = config::file_to_args(Path::new(&path)).map_err(CmdError::config)?;
            // explicit flags win: drop config pairs the user already passed
            let user_flags: BTreeSet<String> = rest[1..]
                .iter()
                .filter_map(|a| a.strip_prefix("--"))
                .map(|s| s.split('=').next().unwrap_or(s).to_string())
                .collect();
            let mut merged = vec![rest[0].clone()];
            let mut pairs = injected.chunks_exact(2);
            for pair in &mut pairs {
                let key = pair[0].trim_start_matches("--");
                if !user_flags.contains(key) {
                    merged.push(pair[0].clone());
                    merged.push(pair[1].clone());
                }
            }
            merged.extend(rest[1..].iter().cloned());
            merged
        }
        None => rest,
    };
    let cli = Cli::try_parse_from(std::iter::once(bin).chain(args))
        .map_err(|e| CmdError::config(e.to_string()))?;
    match cli.command {
        Command::Bracket(args) => cmd_bracket(args),
        Command::Kernels(args) => cmd_kernels(args),
        Command::Stationarity(args) => cmd_stationarity(args),
        Command::Regen(args) => cmd_regen(args),
        Command::Meetings(args) => cmd_meetings(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Explore(args) => cmd_explore(args),
        Command::Brw(args) => cmd_brw(args),
        Command::Treeperc(args) => cmd_treeperc(args),
    }
}

fn cmd_bracket(args: BracketArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("bracket", &args.output);
    ctx.record("d", args.d);
    ctx.record("h", args.h);
    let family = GraphFamily::RegularTree { degree: args.d };
    family.validate()?;
    let bracket = lambda_c_bracket(family, args.h)?;
    #[derive(Serialize)]
    struct BracketOut {
        d: u32,
        h: f64,
        rho: f64,
        lower: f64,
        upper: Option<f64>,
    }
    let out = BracketOut {
        d: args.d,
        h: args.h,
        rho: spectral_radius_lazy(family, args.h),
        lower: bracket.lower,
        upper: bracket.upper,
    };
    ctx.write_json("bracket.json", &out)?;
    println!(
        "bracket d={} h={}: lower {} upper {}",
        args.d,
        args.h,
        out.lower,
        out.upper.map_or("none".to_string(), |u| u.to_string())
    );
    ctx.finish()
}

/// Exhaustive lazy-walk enumeration over a deep-enough window; the CLI's own
/// cross-check of the radial table.
fn enumerate_radial(degree: u32, holding: f64, t: u32) -> Result<Vec<f64>, CmdError> {
    if t > 8 {
        return Err(CmdError::config("enumeration oracle supports t <= 8"));
    }
    let window = Window::new(GraphFamily::RegularTree { degree }, t + 1, BoundaryPolicy::Reject)?;
    let mut acc = vec![0.0f64; t as usize + 1];
    let move_p = (1.0 - holding) / f64::from(degree);
    fn recurse(
        w: &Window,
        v: VertexId,
        remaining: u32,
        prob: f64,
        h: f64,
        move_p: f64,
        acc: &mut [f64],
    ) {
        if remaining == 0 {
            acc[w.depth(v).expect("inside window") as usize] += prob;
            return;
        }
        recurse(w, v, remaining - 1, prob * h, h, move_p, acc);
        for (n, _) in w.neighbors(v).expect("inside window") {
            recurse(w, n, remaining - 1, prob * move_p, h, move_p, acc);
        }
    }
    recurse(&window, window.root(), t, 1.0, holding, move_p, &mut acc);
    Ok(acc)
}

fn cmd_kernels(args: KernelsArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("kernels", &args.output);
    ctx.record("d", args.d);
    ctx.record("h", args.h);
    ctx.record("t", args.t);
    ctx.record("bounds_t", args.bounds_t);
    ctx.record("oracle", args.oracle);

    let table = tree_kernel(args.d, args.h, args.t)?;
    let mut csv = Vec::new();
    table
        .write_csv(&mut csv)
        .map_err(|e| CmdError::invariant(e.to_string()))?;
    ctx.write_text("kernels.csv", &String::from_utf8(csv).expect("ascii"))?;

    let bounds_table = tree_kernel(args.d, args.h, args.bounds_t)?;
    let report = check_kernel_bounds(&bounds_table)?;

    let mut oracle_max_diff = None;
    if args.oracle {
        let mut max_diff = 0.0f64;
        for t in 0..=args.t {
            let oracle = enumerate_radial(args.d, args.h, t)?;
            for k in 0..=t {
                max_diff = max_diff.max((table.radial(t, k) - oracle[k as usize]).abs());
            }
        }
        oracle_max_diff = Some(max_diff);
        if max_diff <= 1e-12 {
            println!("oracle match: exact");
        } else {
            println!("oracle match: max diff {max_diff}");
            return Err(CmdError::invariant(format!(
                "kernel table deviates from enumeration by {max_diff}"
            )));
        }
    }

    #[derive(Serialize)]
    struct KernelsOut {
        d: u32,
        h: f64,
        horizon: u32,
        bounds_horizon: u32,
        min_decay_slack: f64,
        min_return_slack: f64,
        oracle_max_diff: Option<f64>,
    }
    ctx.write_json(
        "kernels.json",
        &KernelsOut {
            d: args.d,
            h: args.h,
            horizon: args.t,
            bounds_horizon: args.bounds_t,
            min_decay_slack: report.min_decay_slack,
            min_return_slack: report.min_return_slack,
            oracle_max_diff,
        },
    )?;
    println!(
        "kernel bounds hold to t={}: decay slack {}, return slack {}",
        args.bounds_t, report.min_decay_slack, report.min_return_slack
    );
    ctx.finish()
}

fn periodic_window(family: &str, n: u64, side: u64) -> Result<Window, CmdError> {
    match family {
        "cycle" => Ok(Window::full(GraphFamily::Cycle { length: n }, BoundaryPolicy::Reject)?),
        "torus" => Ok(Window::full(
            GraphFamily::Torus { dim: 2, side },
            BoundaryPolicy::Reject,
        )?),
        other => Err(CmdError::config(format!(
            "unknown family {other:?} (expected cycle or torus)"
        ))),
    }
}

fn cmd_stationarity(args: StationarityArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("stationarity", &args.output);
    ctx.record("family", &args.family);
    ctx.record("n", args.n);
    ctx.record("side", args.side);
    ctx.record("lambda", args.lambda);
    ctx.record("t_list", format_list(&args.t_list));
    ctx.record("samples", args.samples);

    let window = periodic_window(&args.family, args.n, args.side)?;
    let kernel = WalkKernel::half_holding(window.family.degree());
    let report = stationarity_test(
        &window,
        kernel,
        args.lambda,
        &args.t_list,
        args.samples,
        args.output.seed,
    )?;
    let mut csv = String::from("t,mean,mean_band,dispersion,neighbor_corr,corr_band,pass\n");
    for row in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.t, row.mean, row.mean_band, row.dispersion, row.neighbor_corr, row.corr_band,
            row.pass
        );
    }
    ctx.write_text("stationarity.csv", &csv)?;
    ctx.write_json("stationarity.json", &report)?;
    if let Some(w) = &report.warning {
        ctx.warn(w.clone());
    }
    let pass = report.pass;
    ctx.finish()?;
    if pass {
        println!("stationarity: PASS");
        Ok(())
    } else {
        Err(CmdError::statistical("stationarity bands violated"))
    }
}

fn cmd_regen(args: RegenArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("regen", &args.output);
    ctx.record("n", args.n);
    ctx.record("lambda", args.lambda);
    ctx.record("a", args.a);
    ctx.record("t_list", format_list(&args.t_list));
    ctx.record("replicas", args.replicas);

    let report = regeneration_test(
        args.n,
        args.lambda,
        &[VertexId(args.a)],
        &args.t_list,
        args.replicas,
        args.output.seed,
    )?;
    let mut csv = String::from("t,vertex,distance_to_set,mean,se,expected,identity_pass\n");
    for row in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.t, row.vertex, row.distance_to_set, row.mean, row.se, row.expected,
            row.identity_pass
        );
    }
    ctx.write_text("regen.csv", &csv)?;
    ctx.write_json("regen.json", &report)?;
    let pass = report.pass;
    ctx.finish()?;
    if pass {
        println!("regeneration: PASS");
        Ok(())
    } else {
        Err(CmdError::statistical("regeneration checks failed"))
    }
}

fn cmd_meetings(args: MeetingsArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("meetings", &args.output);
    ctx.record("n", args.n);
    ctx.record("lambda", args.lambda);
    ctx.record("t_max", args.t_max);
    ctx.record("replicas", args.replicas);

    let report = meeting_count_test(
        args.n,
        args.lambda,
        args.t_max,
        args.replicas,
        args.output.seed,
    )?;
    let mut csv = String::from("t,mean_n\n");
    for (t, mean) in &report.curve {
        let _ = writeln!(csv, "{t},{mean}");
    }
    ctx.write_text("meetings.csv", &csv)?;
    ctx.write_json("meetings.json", &report)?;
    let pass = (0.45..=0.55).contains(&report.slope)
        && (0.9..=1.1).contains(&report.dispersion_at_horizon)
        && report.monotone;
    ctx.finish()?;
    if pass {
        println!(
            "meeting counts: PASS (slope {}, dispersion {})",
            report.slope, report.dispersion_at_horizon
        );
        Ok(())
    } else {
        Err(CmdError::statistical(format!(
            "meeting-count bands violated: slope {}, dispersion {}, monotone {}",
            report.slope, report.dispersion_at_horizon, report.monotone
        )))
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("sweep", &args.output);
    ctx.record("family", &args.family);
    ctx.record("d", args.d);
    ctx.record("h", args.h);
    ctx.record("lambda_grid", format_list(&args.lambda_grid));
    ctx.record("t", args.t);
    ctx.record("r", args.r);
    ctx.record("pair_distance", args.pair_distance);
    ctx.record("replicas", args.replicas);

    let window = match args.family.as_str() {
        "tree" => Window::new(
            GraphFamily::RegularTree { degree: args.d },
            args.r,
            BoundaryPolicy::Reject,
        )?,
        "torus" => Window::full(
            GraphFamily::Torus { dim: 2, side: args.side },
            BoundaryPolicy::Reject,
        )?,
        other => {
            return Err(CmdError::config(format!(
                "unknown family {other:?} (expected tree or torus)"
            )))
        }
    };
    let kernel = WalkKernel::new(window.family.degree(), args.h)?;
    let (report, records) = lambda_sweep(
        &window,
        kernel,
        &args.lambda_grid,
        args.t,
        args.pair_distance,
        args.replicas,
        args.output.seed,
    )?;

    let mut csv = String::from(
        "lambda,defined,connected,censored,estimate,wilson_low,wilson_high,censored_fraction\n",
    );
    for p in &report.points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            p.lambda,
            p.defined,
            p.connected,
            p.censored,
            p.estimate.unwrap_or(f64::NAN),
            p.wilson_low,
            p.wilson_high,
            p.censored_fraction
        );
    }
    ctx.write_text("sweep.csv", &csv)?;

    let mut jsonl = String::new();
    for record in &records {
        let line = serde_json::to_string(record)
            .map_err(|e| CmdError::invariant(format!("serialization failed: {e}")))?;
        jsonl.push_str(&line);
        jsonl.push('\n');
    }
    ctx.write_text("sweep_records.jsonl", &jsonl)?;

    #[derive(Serialize)]
    struct SweepOut<'a> {
        report: &'a snlab::analysis::SweepReport,
        bracket_lower: Option<f64>,
        bracket_upper: Option<f64>,
    }
    let bracket = match window.family {
        GraphFamily::RegularTree { .. } => lambda_c_bracket(window.family, args.h).ok(),
        _ => None,
    };
    ctx.write_json(
        "sweep.json",
        &SweepOut {
            report: &report,
            bracket_lower: bracket.as_ref().map(|b| b.lower),
            bracket_upper: bracket.as_ref().and_then(|b| b.upper),
        },
    )?;
    if report.max_censored_fraction > 0.5 {
        ctx.warn(format!(
            "censored fraction {} exceeds 50%; window radius is small for this horizon",
            report.max_censored_fraction
        ));
    }
    println!(
        "sweep: crossover {}",
        report
            .crossover
            .map_or("none".to_string(), |c| c.to_string())
    );
    ctx.finish()
}

fn cmd_explore(args: ExploreArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("explore", &args.output);
    ctx.record("d", args.d);
    ctx.record("h", args.h);
    ctx.record("k", args.k);
    ctx.record("lambda", args.lambda);
    ctx.record("r", args.r);
    ctx.record("replicas", args.replicas);
    ctx.record("good_mc", args.good_mc);

    let family = GraphFamily::RegularTree { degree: args.d };
    let rho = spectral_radius_lazy(family, args.h);
    let params = match (args.s, args.m) {
        (Some(s), Some(m)) => ExploreParams::with_overrides(args.k, args.lambda, rho, s, m)?,
        (None, None) => ExploreParams::derive(args.k, args.lambda, rho)?,
        _ => {
            return Err(CmdError::config(
                "--s and --m must be given together (or neither)",
            ))
        }
    };
    ctx.record("s", params.s);
    ctx.record("m", params.m);
    let window = Window::new(family, args.r, BoundaryPolicy::Reject)?;
    let kernel = WalkKernel::new(args.d, args.h)?;
    let horizon = params.s * params.m;
    let seed = args.output.seed;

    struct ReplicaResult {
        growth: Vec<i64>,
        flagged: u32,
        stages: u32,
        certificate_ok: bool,
        first_trace: Option<snlab::explore::ExplorationTrace>,
    }
    let runs = run_replicas(args.replicas, |r| -> Result<ReplicaResult, SnError> {
        let stream = CouplingStream::new(replica_seed(seed, r));
        let field = realize_field(&stream, &window, kernel, args.lambda, horizon, &[window.root()])?;
        let opts = ExploreOptions {
            good_mc: args.good_mc,
            stage_cap: args.stage_cap,
            seed: replica_seed(seed ^ 0x6578, r),
        };
        let trace = run_exploration(&field, &params, window.root(), &opts)?;
        let (clusters, _) = simulate_meetings(&field)?;
        let certificate_ok =
            snlab::explore::recruited_share_one_cluster(&trace, &clusters, horizon);
        let growth: Vec<i64> = trace
            .stages
            .windows(2)
            .map(|w| i64::from(w[1].a_len) - i64::from(w[0].a_len))
            .collect();
        let flagged = trace.stages.iter().filter(|s| s.flagged).count() as u32;
        Ok(ReplicaResult {
            growth,
            flagged,
            stages: trace.stages.len() as u32,
            certificate_ok,
            first_trace: (r == 0).then_some(trace),
        })
    });

    let mut growth_acc = OnlineStats::new();
    let mut flagged_total = 0u32;
    let mut stage_acc = OnlineStats::new();
    let mut certificate_failures = 0u32;
    let mut first_trace = None;
    for run in runs {
        let result = run?;
        for &g in &result.growth {
            growth_acc.push(g as f64);
        }
        flagged_total += result.flagged;
        stage_acc.push(f64::from(result.stages));
        if !result.certificate_ok {
            certificate_failures += 1;
        }
        if let Some(t) = result.first_trace {
            first_trace = Some(t);
        }
    }
    if let Some(trace) = &first_trace {
        let mut csv = Vec::new();
        trace
            .write_csv(&mut csv)
            .map_err(|e| CmdError::invariant(e.to_string()))?;
        ctx.write_text("explore_trace.csv", &String::from_utf8(csv).expect("ascii"))?;
    }
    #[derive(Serialize)]
    struct ExploreOut {
        params: ExploreParams,
        replicas: u32,
        mean_stage_growth: f64,
        growth_se: f64,
        mean_stages: f64,
        flagged_stages: u32,
        certificate_failures: u32,
    }
    let out = ExploreOut {
        params,
        replicas: args.replicas,
        mean_stage_growth: growth_acc.mean(),
        growth_se: growth_acc.stderr(),
        mean_stages: stage_acc.mean(),
        flagged_stages: flagged_total,
        certificate_failures,
    };
    ctx.write_json("explore.json", &out)?;
    ctx.finish()?;
    if certificate_failures > 0 {
        return Err(CmdError::invariant(format!(
            "{certificate_failures} replicas broke the one-cluster certificate"
        )));
    }
    println!(
        "explore: mean stage growth {} over {} replicas",
        out.mean_stage_growth, args.replicas
    );
    Ok(())
}

fn cmd_brw(args: BrwArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("brw", &args.output);
    ctx.record("d", args.d);
    ctx.record("h", args.h);
    ctx.record("lambda", args.lambda);
    ctx.record("n_max", args.n_max);
    ctx.record("pops", args.pops);
    ctx.record("domination", args.domination);

    let kernel = WalkKernel::new(args.d, args.h)?;
    let family = GraphFamily::RegularTree { degree: args.d };
    let table = tree_kernel(args.d, args.h, args.n_max)?;
    let seed = args.output.seed;
    let n_max = args.n_max;
    let lambda = args.lambda;

    // Monte Carlo generation means against the closed form
    let runs = run_replicas(args.pops, |r| {
        let mut sim = BrwSim::new(kernel, lambda, replica_seed(seed, r)).expect("valid");
        let mut qs = Vec::with_capacity(n_max as usize);
        for _ in 1..=n_max {
            qs.push(f64::from(sim.step_generation().expect("alive").at_root_after_step));
        }
        qs
    });
    let mut accs = vec![OnlineStats::new(); n_max as usize];
    for qs in &runs {
        for (acc, &q) in accs.iter_mut().zip(qs) {
            acc.push(q);
        }
    }
    #[derive(Serialize)]
    struct MeanRow {
        n: u32,
        mc_mean: f64,
        mc_se: f64,
        formula: f64,
        bound: f64,
        within_3se: bool,
    }
    let mut rows = Vec::new();
    let mut means_pass = true;
    for n in 1..=n_max {
        let (formula, bound) = expected_generation_mean(n, lambda, 0, &table)?;
        let acc = &accs[n as usize - 1];
        let within = (acc.mean() - formula).abs() <= 3.0 * acc.stderr().max(1e-12);
        means_pass &= within;
        rows.push(MeanRow {
            n,
            mc_mean: acc.mean(),
            mc_se: acc.stderr(),
            formula,
            bound,
            within_3se: within,
        });
    }
    let sub = subcritical_check(lambda, family, args.h);

    let domination = if args.domination {
        let window = Window::new(family, args.r, BoundaryPolicy::Reject)?;
        Some(domination_experiment(
            &window,
            kernel,
            lambda,
            args.horizon,
            args.dom_replicas,
            seed ^ 0x646f6d,
        )?)
    } else {
        None
    };

    #[derive(Serialize)]
    struct BrwOut {
        lambda: f64,
        rows: Vec<MeanRow>,
        subcritical: snlab::brw::SubcriticalReport,
        domination: Option<snlab::brw::DominationReport>,
    }
    let dom_pass = domination.as_ref().map_or(true, |d| d.mean_dominates);
    ctx.write_json(
        "brw.json",
        &BrwOut {
            lambda,
            rows,
            subcritical: sub,
            domination,
        },
    )?;
    ctx.finish()?;
    if !means_pass {
        return Err(CmdError::statistical(
            "generation means deviate from the closed form by more than 3 stderr",
        ));
    }
    if !dom_pass {
        return Err(CmdError::statistical(
            "cluster visits exceeded branching-walk visits beyond the allowance",
        ));
    }
    println!("brw: generation means PASS (threshold {})", sub.threshold);
    Ok(())
}

fn cmd_treeperc(args: TreepercArgs) -> Result<(), CmdError> {
    let mut ctx = RunContext::new("treeperc", &args.output);
    ctx.record("d", args.d);
    ctx.record("t_list", format_list(&args.t_list));
    ctx.record("replicas", args.replicas);
    ctx.record("v_depth", args.v_depth);

    let calibration = calibrate_density_prefactor(args.d)?;
    let lambda = match args.lambda {
        Some(l) => l,
        None => match calibration.lambda_at_c {
            Some(l) => 1.05 * l,
            None => {
                return Err(CmdError::config(format!(
                    "degree {} saturates the edge bound; pass --lambda explicitly",
                    args.d
                )))
            }
        },
    };
    ctx.record("lambda", lambda);

    let report = simultaneous_goodness_rate(
        args.d,
        lambda,
        args.replicas,
        &args.t_list,
        args.v_depth,
        args.output.seed,
    )?;
    let mut csv = String::from("two_t,freq_u,freq_v,freq_both,product\n");
    for row in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.two_t, row.freq_u, row.freq_v, row.freq_both, row.product
        );
    }
    ctx.write_text("treeperc.csv", &csv)?;

    // independence of the two subtrees: P[both] vs P[u] P[v]
    let n = f64::from(args.replicas);
    let mut independence_pass = true;
    for row in &report.rows {
        let se = (row.freq_u * (1.0 - row.freq_u) / n).sqrt()
            + (row.freq_v * (1.0 - row.freq_v) / n).sqrt()
            + (row.freq_both * (1.0 - row.freq_both) / n).sqrt();
        if (row.freq_both - row.product).abs() > 3.0 * se.max(1e-9) {
            independence_pass = false;
        }
    }
    #[derive(Serialize)]
    struct TreepercOut {
        lambda: f64,
        calibration: snlab::treeperc::CalibrationReport,
        report: snlab::treeperc::GoodnessReport,
        independence_pass: bool,
    }
    ctx.write_json(
        "treeperc.json",
        &TreepercOut {
            lambda,
            calibration,
            report: report.clone(),
            independence_pass,
        },
    )?;
    ctx.finish()?;
    if independence_pass {
        println!("treeperc: independence product check PASS");
        Ok(())
    } else {
        Err(CmdError::statistical(
            "simultaneous goodness deviates from the independence product",
        ))
    }
}

fn format_list<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}
