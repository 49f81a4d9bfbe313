use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use washboard::config::{parse_config, RunConfig};
use washboard::experiments::{
    run_branching_sweep, run_fringe, run_visibility_study, Ensemble, FringeScanSpec, PhaseCalibration, VisibilitySpec,
};
use washboard::measurement::{measure, CSV_HEADER};
use washboard::output::{fringe_csv, sweep_csv, visibility_csv, RunWriter};
use washboard::propagator::propagate_with;
use washboard::propagator::Propagator;
use washboard::stationary::solve_static_with;
use washboard::{Error, Result, SpectralGrid};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "WASHBOARD_OUT_DIR";

#[derive(Parser)]
#[command(name = "washboard", version, about = "Driven tilted-washboard lattice simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (key = value).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to output.dir, then $WASHBOARD_OUT_DIR, then `.`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct Scan {
    /// Delays per fringe period.
    #[arg(long)]
    tau_points: Option<usize>,
    /// Average over the configured depth distribution.
    #[arg(long, value_parser = parse_switch, default_value = "off")]
    depth_average: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Localized states of the static lattice.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// One driven run from the qubit ground state.
    Propagate {
        #[command(flatten)]
        common: Common,
    },
    /// Leakage fringe versus drive delay.
    Fringe {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scan: Scan,
    },
    /// Fringe visibility versus PM amplitude.
    Visibility {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scan: Scan,
    },
    /// Branching ratio over the configured amplitude grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_switch, default_value = "off")]
        depth_average: bool,
    },
}

fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter { .. } => "invalid_parameter",
        Error::NotPowerOfTwo { .. } => "grid_size",
        Error::InvalidWellCount(_) => "grid_size",
        Error::LengthMismatch { .. } | Error::GridMismatch => "grid_mismatch",
        Error::IndexOutOfRange { .. } => "index",
        Error::TooShallow { .. } => "too_shallow",
        Error::NonFinite { .. } => "non_finite",
        Error::TooFewSamples(_) | Error::RankDeficient | Error::UndefinedVisibility => "fit",
        Error::DepthFailed { .. } => "depth_failed",
        Error::Config { .. } | Error::MissingKey(_) => "config",
        Error::Io(_) => "io",
    }
}

struct Context {
    cfg: RunConfig,
    out_dir: PathBuf,
    grid: Arc<SpectralGrid>,
}

fn setup(common: &Common) -> Result<Context> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::InvalidParameter { name: "threads", reason: "must be >= 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter { name: "threads", reason: e.to_string() })?;
    }
    let cfg = parse_config(&common.config)?;
    let out_dir = common
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let grid = SpectralGrid::auto(cfg.n_wells, cfg.points_per_well)?;
    Ok(Context { cfg, out_dir, grid })
}

fn ensemble(ctx: &Context, depth_average: bool) -> Result<Ensemble> {
    let opts = ctx.cfg.sim_options();
    if depth_average {
        Ensemble::over_depths(&ctx.cfg.lattice, &ctx.cfg.depth_distribution()?, &ctx.grid, opts)
    } else {
        Ensemble::single(&ctx.cfg.lattice, &ctx.grid, opts)
    }
}

fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Spectrum { common } => {
            let ctx = setup(&common)?;
            let basis = solve_static_with(&ctx.cfg.lattice, &ctx.grid, &ctx.cfg.sim_options().basis)?;
            let mut w = RunWriter::new(&ctx.out_dir)?;
            w.write("spectrum.csv", &basis.to_csv())?;
            say(format_args!("qubit splitting {:.6} hbar omega_r", basis.qubit_splitting()));
            w.finish("spectrum", &ctx.cfg, json!({ "qubit_splitting": basis.qubit_splitting() }))
        }
        Command::Propagate { common } => {
            let ctx = setup(&common)?;
            let basis = solve_static_with(&ctx.cfg.lattice, &ctx.grid, &ctx.cfg.sim_options().basis)?;
            let prop = Propagator::new(&ctx.cfg.lattice, &ctx.grid, ctx.cfg.absorber_width);
            let result = propagate_with(&prop, &basis.ground().wavefunction, &ctx.cfg.drive, &ctx.cfg.propagation()?)?;
            let report = measure(&result, &basis)?;
            let mut w = RunWriter::new(&ctx.out_dir)?;
            w.write("populations.csv", &format!("{CSV_HEADER},B\n{},{:.16e}\n", report.csv_row(), report.branching_ratio()))?;
            say(format_args!("P_g {:.6} P_e {:.6} P_L {:.6} B {:.4}", report.p_g, report.p_e, report.p_l, report.branching_ratio()));
            w.finish("propagate", &ctx.cfg, json!({ "drive": ctx.cfg.drive, "steps": result.steps, "report": report }))
        }
        Command::Fringe { common, scan } => {
            let ctx = setup(&common)?;
            let points = scan.tau_points.unwrap_or(ctx.cfg.tau_points);
            let spec = FringeScanSpec::one_period(ctx.cfg.drive, points)?;
            let table = run_fringe(&ensemble(&ctx, scan.depth_average)?, &spec)?;
            let fit = table.fit()?;
            let cal = PhaseCalibration::from_fit(fit);
            let mut w = RunWriter::new(&ctx.out_dir)?;
            w.write("fringe.csv", &fringe_csv(&table, Some(&cal)))?;
            w.write_json("fit.json", &json!({ "fit": fit, "calibration": cal, "failures": table.failures() }))?;
            say(format_args!("fit offset {:.6} amplitude {:.6} rms {:.3e}", fit.offset, fit.amplitude, fit.residual_rms));
            w.finish("fringe", &ctx.cfg, json!({ "scan": spec, "depth_average": scan.depth_average }))
        }
        Command::Visibility { common, scan } => {
            let ctx = setup(&common)?;
            let spec = VisibilitySpec {
                sched_base: ctx.cfg.drive,
                a_pm_values: ctx.cfg.visibility_a_pm.clone(),
                tau_points: scan.tau_points.unwrap_or(ctx.cfg.tau_points),
            };
            let rows = run_visibility_study(&ensemble(&ctx, scan.depth_average)?, &spec)?;
            let mut w = RunWriter::new(&ctx.out_dir)?;
            w.write("visibility.csv", &visibility_csv(&rows))?;
            for (i, row) in rows.iter().enumerate() {
                w.write(&format!("fringe_{i:02}.csv"), &fringe_csv(&row.fringe, None))?;
            }
            w.finish("visibility", &ctx.cfg, json!({ "study": spec, "depth_average": scan.depth_average }))
        }
        Command::Sweep { common, depth_average } => {
            let ctx = setup(&common)?;
            let rows = run_branching_sweep(&ensemble(&ctx, depth_average)?, &ctx.cfg.sweep)?;
            let mut w = RunWriter::new(&ctx.out_dir)?;
            w.write("sweep.csv", &sweep_csv(&rows))?;
            let failures = rows.iter().filter(|r| r.report.is_err()).count();
            w.finish("sweep", &ctx.cfg, json!({ "sweep": ctx.cfg.sweep, "depth_average": depth_average, "failures": failures }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(manifest) => {
            say(format_args!("wrote {}", manifest.display()));
            ExitCode::SUCCESS
        }
        Err(e) => {
            // single line: `error kind=<kind> message=<json string>`
            eprintln!("error kind={} message={}", error_kind(&e), json!(e.to_string()));
            ExitCode::from(2)
        }
    }
}

/// Progress line on stdout; a closed pipe is not an error.
fn say(args: std::fmt::Arguments) {
    let _ = writeln!(std::io::stdout(), "{args}");
}
