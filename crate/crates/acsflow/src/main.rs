//! Batch front end: subcommand dispatch, configuration, deterministic runs.
//!
//! Exit status: 0 success, 1 usage/config error, 2 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use acsflow::config::Config;
use acsflow::diagnostics::{
    self, density_profile, dim4_cone_fixture, epsilon_regularity_scan,
    infinite_energy_probe, regularity_map, sphere_fixture,
};
use acsflow::error::{Error, Result};
use acsflow::field::AcsField;
use acsflow::flow::{run_flow_with, FlowConfig, FlowState};
use acsflow::geometry::{ConformalProfile, MetricField};
use acsflow::grid::Grid;
use acsflow::io::{
    csv_table, fmt_f64, read_field, read_scalar_from_field, write_atomic, write_field,
};
use acsflow::matalg::{cayley_chart_inv, random_acs, Mat};

#[derive(Parser)]
#[command(
    name = "acsflow",
    about = "Energy-minimizing compatible almost complex structures: \
             constrained heat flow and analytic diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Flat key=value run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for emitted files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized inputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker count, or `auto` for one per core.
    #[arg(long, global = true, default_value = "auto")]
    threads: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Project a field file onto the compatible constraint set.
    Project {
        input: PathBuf,
        metric: String,
        output: PathBuf,
    },
    /// Run the constrained heat flow described by the config file.
    Flow,
    /// Evaluate diagnostics (comma-separated names) on a field file.
    Diagnose {
        input: PathBuf,
        metric: String,
        diagnostics: String,
    },
    /// Write a named analytic fixture and its reference measurements.
    Fixtures { name: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own help/version output with status 0
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

/// 1 for usage/config problems, 2 for numerical failures.
fn exit_class(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::InvalidInput(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<()> {
    match cli.threads.as_str() {
        "auto" => {}
        n => {
            let n: usize = n.parse().map_err(|_| {
                Error::InvalidInput(format!("--threads takes a count or 'auto', got '{n}'"))
            })?;
            if n == 0 {
                return Err(Error::InvalidInput("--threads must be >= 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        }
    }
    let cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    match &cli.cmd {
        Cmd::Project { input, metric, output } => cmd_project(input, metric, output),
        Cmd::Flow => cmd_flow(&cfg, cli.seed, &cli.out),
        Cmd::Diagnose { input, metric, diagnostics } => {
            cmd_diagnose(input, metric, diagnostics, &cfg, &cli.out)
        }
        Cmd::Fixtures { name } => cmd_fixtures(name, &cfg, &cli.out),
    }
}

/// Parse `euclidean:<m>`, `sphere:<n>[:R=<trunc>]`, `conformal:<field-file>`.
/// Returns the metric and the sphere truncation radius (default 50).
fn parse_metric(spec: &str) -> Result<(MetricField, f64)> {
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or("");
    match kind {
        "euclidean" => {
            let m: usize = parts
                .next()
                .ok_or_else(|| Error::Parse("euclidean:<m> needs a dimension".into()))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad dimension in '{spec}'")))?;
            Ok((MetricField::euclidean(m)?, 50.0))
        }
        "sphere" => {
            let n: usize = parts
                .next()
                .ok_or_else(|| Error::Parse("sphere:<n> needs a half-dimension".into()))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad half-dimension in '{spec}'")))?;
            let mut trunc = 50.0;
            if let Some(extra) = parts.next() {
                let val = extra.strip_prefix("R=").ok_or_else(|| {
                    Error::Parse(format!("expected R=<trunc> in '{spec}'"))
                })?;
                trunc = val
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad truncation in '{spec}'")))?;
                if !(trunc > 0.0) {
                    return Err(Error::Parse("truncation radius must be positive".into()));
                }
            }
            Ok((MetricField::sphere_stereographic(n)?, trunc))
        }
        "conformal" => {
            let path = parts
                .next()
                .ok_or_else(|| Error::Parse("conformal:<field-file> needs a path".into()))?;
            let scalar = read_scalar_from_field(Path::new(path))?;
            let m = scalar.grid.dim();
            Ok((
                MetricField::conformal(ConformalProfile::Sampled(scalar), m)?,
                50.0,
            ))
        }
        other => Err(Error::Parse(format!(
            "unknown metric kind '{other}' (euclidean, sphere, conformal)"
        ))),
    }
}

fn cmd_project(input: &Path, metric: &str, output: &Path) -> Result<()> {
    let (g, _) = parse_metric(metric)?;
    let mut field = read_field(input)?;
    if field.m() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "field dimension {} does not match metric dimension {}",
            field.m(),
            g.dim()
        )));
    }
    let (pre, post) = field.project()?;
    write_field(output, &field)?;
    println!("pre_residual: {}", fmt_f64(pre));
    println!("post_residual: {}", fmt_f64(post));
    Ok(())
}

const FLOW_KEYS: &[&str] = &[
    "grid.kind",
    "grid.m",
    "grid.cells",
    "grid.half",
    "metric",
    "initial",
    "initial.amplitude",
    "initial.frequency",
    "initial.field",
    "dt_factor",
    "max_steps",
    "residual_tol",
    "energy_stall_tol",
    "reproject_every",
    "checkpoint_every",
];

fn build_grid(cfg: &Config) -> Result<Grid> {
    let m = cfg.get_usize("grid.m", 4)?;
    let cells = cfg.get_usize("grid.cells", 16)?;
    match cfg.get("grid.kind").unwrap_or("torus") {
        "torus" => Grid::unit_torus(m, cells),
        "box" => Grid::centered_box(m, cells, cfg.get_f64("grid.half", 1.0)?),
        other => Err(Error::Parse(format!(
            "grid.kind must be torus or box, got '{other}'"
        ))),
    }
}

fn initial_field(cfg: &Config, grid: Grid, seed: u64) -> Result<AcsField> {
    let m = grid.dim();
    if m % 2 != 0 {
        return Err(Error::InvalidInput(format!("odd dimension {m} has no ACS")));
    }
    let j0 = Mat::std_acs(m / 2);
    match cfg.get("initial").unwrap_or("perturbed") {
        "j0" => AcsField::constant(grid, &j0),
        "perturbed" => {
            let amp = cfg.get_f64("initial.amplitude", 0.1)?;
            let freq = cfg.get_usize("initial.frequency", 1)? as f64;
            if !(amp.abs() < 0.5) {
                return Err(Error::InvalidInput(
                    "initial.amplitude must stay inside the Cayley chart (|a| < 0.5)"
                        .into(),
                ));
            }
            // smooth Cayley perturbation along one anticommuting direction
            let mut x = Mat::zeros(m);
            x.set(0, 1, 1.0);
            x.set(1, 0, -1.0);
            let s1 = x.add(&j0.mul(&x).mul(&j0));
            AcsField::from_fn(grid, |p| {
                let phase = (2.0 * std::f64::consts::PI * freq * p[0]).sin()
                    * (2.0 * std::f64::consts::PI * freq * p[1 % m]).cos();
                cayley_chart_inv(&s1.scale(amp * phase), &j0).expect("chart range")
            })
        }
        "random" => {
            let mut field = AcsField::zeros(grid);
            for flat in 0..field.n_points() {
                let mat = random_acs(m / 2, seed.wrapping_add(flat as u64), 10.0)?;
                field.set_mat(flat, &mat);
            }
            Ok(field)
        }
        "file" => {
            let path = cfg.require("initial.field")?;
            read_field(Path::new(path))
        }
        other => Err(Error::Parse(format!(
            "initial must be j0, perturbed, random or file, got '{other}'"
        ))),
    }
}

fn write_flow_outputs(out: &Path, state: &FlowState) -> Result<()> {
    write_atomic(&out.join("history.csv"), state.history_csv().as_bytes())?;
    write_field(&out.join("final.acs"), &state.field)?;
    let last = state
        .history
        .last()
        .ok_or_else(|| Error::Internal("flow produced no history".into()))?;
    let summary = format!(
        "termination: {}\nsteps: {}\ntime: {}\nenergy: {}\nsup_residual: {}\n\
         max_constraint_residual: {}\n",
        state.termination.as_str(),
        state.step,
        fmt_f64(state.time),
        fmt_f64(last.energy),
        fmt_f64(last.sup_residual),
        fmt_f64(last.max_constraint_residual),
    );
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn cmd_flow(cfg: &Config, seed: u64, out: &Path) -> Result<()> {
    cfg.check_known(FLOW_KEYS)?;
    let grid = build_grid(cfg)?;
    let (g, _) = parse_metric(cfg.get("metric").map(str::to_owned).unwrap_or(format!(
        "euclidean:{}",
        grid.dim()
    )).as_str())?;
    if g.dim() != grid.dim() {
        return Err(Error::InvalidInput(format!(
            "metric dimension {} does not match grid dimension {}",
            g.dim(),
            grid.dim()
        )));
    }
    let initial = initial_field(cfg, grid, seed)?;
    let flow_cfg = FlowConfig::new(
        cfg.get_f64("dt_factor", 0.05)?,
        cfg.get_usize("max_steps", 10_000)?,
        cfg.get_f64("residual_tol", 1e-6)?,
        cfg.get_f64("energy_stall_tol", 1e-12)?,
        cfg.get_usize("reproject_every", 1)?,
    )?;
    let checkpoint_every = cfg.get_usize("checkpoint_every", 0)?;
    std::fs::create_dir_all(out)?;
    let checkpoint_path = out.join("checkpoint.acs");
    let mut observer = |state: &FlowState| -> Result<()> {
        if checkpoint_every > 0 && state.step % checkpoint_every == 0 {
            write_field(&checkpoint_path, &state.field)?;
        }
        Ok(())
    };
    match run_flow_with(initial, &g, &flow_cfg, Some(&mut observer)) {
        Ok(state) => write_flow_outputs(out, &state),
        // on divergence the last checkpoint is already on disk (atomic write)
        Err(e) => Err(e),
    }
}

const DIAGNOSE_KEYS: &[&str] = &[
    "profile.center",
    "profile.radii",
    "profile.delta",
    "profile.c_n",
    "scan.epsilon",
    "scan.radius",
    "map.stride",
    "map.radii",
];

const DIAGNOSTIC_NAMES: &[&str] =
    &["density-profile", "monotonicity", "scan", "regularity-map", "bochner"];

fn domain_center(grid: &Grid) -> Vec<f64> {
    (0..grid.dim())
        .map(|a| grid.origin()[a] + 0.5 * grid.axis_length(a))
        .collect()
}

fn default_radii(grid: &Grid, count: usize, r_max: f64) -> Vec<f64> {
    let lo = 3.0 * grid.h();
    // largest ball about the domain center that stays admissible
    let min_len = (0..grid.dim())
        .map(|a| grid.axis_length(a))
        .fold(f64::INFINITY, f64::min);
    let hi = r_max.min(0.49 * min_len).max(lo);
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

fn points_csv(m: usize, points: &[Vec<f64>]) -> String {
    let columns: Vec<String> = (1..=m).map(|a| format!("x{a}")).collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    csv_table(&cols, points)
}

fn cmd_diagnose(
    input: &Path,
    metric: &str,
    diagnostics_list: &str,
    cfg: &Config,
    out: &Path,
) -> Result<()> {
    cfg.check_known(DIAGNOSE_KEYS)?;
    let names: Vec<&str> = diagnostics_list.split(',').map(str::trim).collect();
    for name in &names {
        if !DIAGNOSTIC_NAMES.contains(name) {
            return Err(Error::Parse(format!(
                "unknown diagnostic '{name}' (valid: {})",
                DIAGNOSTIC_NAMES.join(", ")
            )));
        }
    }
    let (g, _) = parse_metric(metric)?;
    let field = read_field(input)?;
    if field.m() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "field dimension {} does not match metric dimension {}",
            field.m(),
            g.dim()
        )));
    }
    let grid = field.grid().clone();
    std::fs::create_dir_all(out)?;
    for name in names {
        match name {
            "density-profile" | "monotonicity" => {
                let center = cfg
                    .get_f64_list("profile.center")?
                    .unwrap_or_else(|| domain_center(&grid));
                let radii = cfg
                    .get_f64_list("profile.radii")?
                    .unwrap_or_else(|| default_radii(&grid, 6, 0.4));
                let delta = cfg.get_f64("profile.delta", 0.0)?;
                let c_n = cfg.get_f64("profile.c_n", 1.0)?;
                let profile = density_profile(&field, &g, &center, &radii, delta, c_n)?;
                let rows: Vec<Vec<f64>> = profile
                    .radii
                    .iter()
                    .zip(profile.theta.iter().zip(&profile.theta_tilde))
                    .map(|(&r, (&t, &tt))| vec![r, t, tt])
                    .collect();
                write_atomic(
                    &out.join("density_profile.csv"),
                    csv_table(&["r", "theta", "theta_tilde"], &rows).as_bytes(),
                )?;
                println!(
                    "monotone_violation: {}",
                    fmt_f64(profile.monotone_violation)
                );
            }
            "scan" => {
                let epsilon = cfg.get_f64("scan.epsilon", 0.1)?;
                let radius = cfg.get_f64("scan.radius", (3.0 * grid.h()).max(0.1))?;
                let points = epsilon_regularity_scan(&field, &g, epsilon, radius)?;
                write_atomic(
                    &out.join("scan.csv"),
                    points_csv(grid.dim(), &points).as_bytes(),
                )?;
                println!("scan_points: {}", points.len());
            }
            "regularity-map" => {
                let stride = cfg.get_usize("map.stride", (grid.extents()[0] / 4).max(1))?;
                let radii = cfg
                    .get_f64_list("map.radii")?
                    .unwrap_or_else(|| default_radii(&grid, 6, 0.5));
                let map = regularity_map(&field, &radii, stride)?;
                let rows: Vec<Vec<f64>> = map
                    .points
                    .iter()
                    .zip(&map.r_values)
                    .map(|(p, &r)| {
                        let mut row = p.clone();
                        row.push(r);
                        row
                    })
                    .collect();
                let mut columns: Vec<String> =
                    (1..=grid.dim()).map(|a| format!("x{a}")).collect();
                columns.push("r_scale".into());
                let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
                write_atomic(
                    &out.join("regularity_map.csv"),
                    csv_table(&cols, &rows).as_bytes(),
                )?;
            }
            "bochner" => {
                let (_, sup) = diagnostics::bochner_residual(&field, &g)?;
                write_atomic(
                    &out.join("bochner.csv"),
                    csv_table(&["sup_residual"], &[vec![sup]]).as_bytes(),
                )?;
                println!("bochner_sup: {}", fmt_f64(sup));
            }
            _ => unreachable!("validated above"),
        }
    }
    Ok(())
}

const FIXTURE_KEYS: &[&str] = &[
    "fixture.n",
    "fixture.cells",
    "fixture.half",
    "fixture.eps",
    "fixture.eps_list",
    "fixture.delta",
];

fn cmd_fixtures(name: &str, cfg: &Config, out: &Path) -> Result<()> {
    cfg.check_known(FIXTURE_KEYS)?;
    std::fs::create_dir_all(out)?;
    match name {
        "sphere" => {
            let n = cfg.get_usize("fixture.n", 2)?;
            let cells = cfg.get_usize("fixture.cells", 32)?;
            let half = cfg.get_f64("fixture.half", 1.0)?;
            let grid = Grid::centered_box(2 * n, cells, half)?;
            let g = MetricField::sphere_stereographic(n)?;
            let field = sphere_fixture(n, grid.clone())?;
            write_field(&out.join("sphere.acs"), &field)?;
            // fit: smallest dyadic c_n making the perturbed profile monotone
            // at the measured closeness of the chart metric
            let report = g.closeness_check(&grid, f64::INFINITY)?;
            let delta = report.delta_metric;
            let center = vec![0.0; 2 * n];
            let radii = default_radii(&grid, 6, 0.8 * half);
            let mut rows = Vec::new();
            let mut fitted = f64::NAN;
            for k in 0..14 {
                let c_n = 0.25 * (1 << k) as f64;
                let profile = density_profile(&field, &g, &center, &radii, delta, c_n)?;
                rows.push(vec![c_n, profile.monotone_violation]);
                if profile.monotone_violation == 0.0 && fitted.is_nan() {
                    fitted = c_n;
                }
            }
            write_atomic(
                &out.join("cn_fit.csv"),
                csv_table(&["c_n", "monotone_violation"], &rows).as_bytes(),
            )?;
            println!("delta: {}", fmt_f64(delta));
            println!("c_n: {}", fmt_f64(fitted));
        }
        "dim4-cone" => {
            let cells = cfg.get_usize("fixture.cells", 24)?;
            let half = cfg.get_f64("fixture.half", 1.0)?;
            let eps = cfg.get_f64("fixture.eps", 0.2)?;
            let grid = Grid::centered_box(4, cells, half)?;
            let field = dim4_cone_fixture(grid.clone(), eps)?;
            write_field(&out.join("cone.acs"), &field)?;
            let g = MetricField::euclidean(4)?;
            let radii = default_radii(&grid, 6, 0.8 * half);
            let profile =
                density_profile(&field, &g, &vec![0.0; 4], &radii, 0.0, 1.0)?;
            let rows: Vec<Vec<f64>> = profile
                .radii
                .iter()
                .zip(&profile.theta)
                .map(|(&r, &t)| vec![r, t])
                .collect();
            write_atomic(
                &out.join("cone_density.csv"),
                csv_table(&["r", "theta"], &rows).as_bytes(),
            )?;
        }
        "s1-probe" => {
            let cells = cfg.get_usize("fixture.cells", 2048)?;
            let eps_list = cfg.get_f64_list("fixture.eps_list")?.unwrap_or_else(|| {
                (3..=7).map(|k| 0.5f64.powi(k)).collect()
            });
            let (series, slope) = infinite_energy_probe(&eps_list, cells)?;
            let rows: Vec<Vec<f64>> = series
                .iter()
                .map(|&(e, v)| vec![e, v, 2.0 * std::f64::consts::PI * (1.0 / e).ln()])
                .collect();
            write_atomic(
                &out.join("s1_probe.csv"),
                csv_table(&["eps", "energy", "oracle"], &rows).as_bytes(),
            )?;
            println!("slope: {}", fmt_f64(slope));
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown fixture '{other}' (valid: sphere, dim4-cone, s1-probe)"
            )))
        }
    }
    Ok(())
}
