//! Batch front end: runs JSON-configured scenarios, writes CSV trajectories,
//! and emits machine-readable invariant reports and orbit-law summaries.
//! Data goes to files (or stdout); diagnostics go to stderr.

mod checks;
mod config;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use geomech::integrators::{integrate, Trajectory};
use geomech::systems::{areal_velocity_series, kepler_diagnostics, system_names};

use checks::{evaluate_check, InvariantReport};
use config::{build_scenario, load_config, Scenario};

const EXIT_OK: u8 = 0;
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "geomech",
    about = "Hamiltonian systems with symmetry: trajectories, invariant monitoring and orbit laws",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario configuration (JSON); may be repeated for batch mode.
    #[arg(long, required = true)]
    config: Vec<String>,

    /// Number of scenarios to run concurrently in batch mode.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Reserved for future stochastic components; accepted and unused.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write the trajectory as CSV.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Overrides the CSV output path from the config (single scenario).
        #[arg(long)]
        out: Option<String>,
    },
    /// Integrate a scenario and evaluate its declared invariant checks.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        /// Where to write the JSON report (stdout when absent).
        #[arg(long)]
        report: Option<String>,
    },
    /// Integrate an elliptic central-force scenario and verify the orbit laws.
    KeplerLaws {
        #[command(flatten)]
        common: CommonArgs,
        /// Where to write the JSON report (stdout when absent).
        #[arg(long)]
        report: Option<String>,
    },
    /// List the built-in systems with their state layouts and observables.
    ListSystems,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { common, out } => batch(common, move |path| cmd_run(path, out.clone())),
        Command::Check { common, report } => {
            batch(common, move |path| cmd_check(path, report.clone()))
        }
        Command::KeplerLaws { common, report } => {
            batch(common, move |path| cmd_kepler_laws(path, report.clone()))
        }
        Command::ListSystems => cmd_list_systems(),
    };
    ExitCode::from(code)
}

/// Runs the action over every configured scenario, at most `jobs` at a time,
/// and reports the worst exit code.
fn batch<F>(common: CommonArgs, action: F) -> u8
where
    F: Fn(&str) -> u8 + Sync,
{
    if common.jobs <= 1 || common.config.len() <= 1 {
        return common
            .config
            .iter()
            .map(|path| action(path))
            .fold(EXIT_OK, u8::max);
    }
    let mut worst = EXIT_OK;
    for chunk in common.config.chunks(common.jobs) {
        let codes: Vec<u8> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|path| scope.spawn(|| action(path)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        worst = codes.into_iter().fold(worst, u8::max);
    }
    worst
}

fn load_and_build(path: &str) -> Result<Scenario, u8> {
    let config = load_config(path).map_err(|e| {
        eprintln!("{e}");
        EXIT_CONFIG
    })?;
    build_scenario(config).map_err(|e| {
        eprintln!("{e}");
        EXIT_CONFIG
    })
}

fn run_trajectory(scenario: &Scenario) -> Result<Trajectory, (Trajectory, u8)> {
    let observables = scenario
        .system
        .observables_named(&scenario.config.observables)
        .expect("validated at build time");
    match integrate(
        &scenario.system.dynamics,
        &scenario.config.initial_state,
        &scenario.integrator,
        &observables,
    ) {
        Ok(traj) => Ok(traj),
        Err(failure) => {
            eprintln!(
                "integration stopped early: {} (trajectory truncated after {} records)",
                failure.error,
                failure.partial.len()
            );
            Err((failure.partial, EXIT_CHECK_FAILED))
        }
    }
}

/// Writes `t,<state coords>,<observables>` rows with 17 significant digits,
/// which round-trip bit-faithfully through parsing.
fn write_csv(
    scenario: &Scenario,
    traj: &Trajectory,
    out: &mut dyn Write,
    stride: usize,
) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(scenario.system.state_names.iter().cloned());
    header.extend(traj.observable_names().iter().map(|s| s.to_string()));
    writeln!(out, "{}", header.join(","))?;
    let obs_names = traj.observable_names();
    let obs_series: Vec<&[f64]> = obs_names
        .iter()
        .map(|n| traj.observable(n).unwrap())
        .collect();
    for i in (0..traj.len()).step_by(stride.max(1)) {
        let mut row = Vec::with_capacity(1 + scenario.system.phase_dim + obs_series.len());
        row.push(format!("{:.16e}", traj.times()[i]));
        for v in traj.state(i) {
            row.push(format!("{v:.16e}"));
        }
        for series in &obs_series {
            row.push(format!("{:.16e}", series[i]));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_csv_to_target(scenario: &Scenario, traj: &Trajectory, out: Option<&str>) -> u8 {
    let stride = scenario.config.output.stride;
    let target = out
        .map(|s| s.to_string())
        .or_else(|| scenario.config.output.csv_path.clone());
    let result = match &target {
        Some(path) => std::fs::File::create(path)
            .and_then(|mut f| write_csv(scenario, traj, &mut f, stride)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(scenario, traj, &mut lock, stride)
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("cannot write CSV: {e}");
            EXIT_CHECK_FAILED
        }
    }
}

fn cmd_run(path: &str, out: Option<String>) -> u8 {
    let scenario = match load_and_build(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match run_trajectory(&scenario) {
        Ok(traj) => write_csv_to_target(&scenario, &traj, out.as_deref()),
        Err((partial, code)) => {
            // Keep the partial trajectory for post-mortem inspection.
            let write_code = write_csv_to_target(&scenario, &partial, out.as_deref());
            code.max(write_code)
        }
    }
}

fn emit_report<T: Serialize>(report: &T, target: Option<&str>) -> u8 {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    match target {
        Some(path) => match std::fs::write(path, text + "\n") {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("cannot write report: {e}");
                EXIT_CHECK_FAILED
            }
        },
        None => {
            println!("{text}");
            EXIT_OK
        }
    }
}

fn cmd_check(path: &str, report_path: Option<String>) -> u8 {
    let scenario = match load_and_build(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if scenario.config.checks.is_empty() {
        eprintln!("config error: field 'checks': at least one check is required");
        return EXIT_CONFIG;
    }
    let started = Instant::now();
    let traj = match run_trajectory(&scenario) {
        Ok(t) => t,
        Err((_, code)) => return code,
    };
    let mut records = Vec::new();
    for check in &scenario.config.checks {
        match evaluate_check(&scenario, &traj, &check.name, check.tolerance) {
            Ok(record) => records.push(record),
            Err(reason) => {
                eprintln!("config error: field 'checks.name': {reason}");
                return EXIT_CONFIG;
            }
        }
    }
    let pass = records.iter().all(|r| r.pass);
    let report = InvariantReport {
        system: scenario.system.name.clone(),
        records,
        pass,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    let write_code = emit_report(&report, report_path.as_deref());
    if write_code != EXIT_OK {
        return write_code;
    }
    if pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

#[derive(Serialize)]
struct HodographReport {
    radius: f64,
    center_distance: f64,
    fit_rel_residual: f64,
    radius_formula_residual: f64,
    power_residual: f64,
}

#[derive(Serialize)]
struct KeplerLawsReport {
    omega: f64,
    energy: f64,
    eccentricity: f64,
    semi_latus: f64,
    a_semi: f64,
    /// Null on a circular orbit, where no perihelion passage exists.
    period_measured: Option<f64>,
    third_law_residual: Option<f64>,
    areal_max_rel_deviation: f64,
    eccentricity_identity_residual: f64,
    out_of_plane: f64,
    hodograph: HodographReport,
    pass: bool,
    runtime_seconds: f64,
}

/// Tolerance for a named law residual: taken from the config's checks list
/// when declared there, with defaults matching the library's validated
/// regime (step 1e-4, several radial periods).
fn law_tolerance(scenario: &Scenario, name: &str, default: f64) -> f64 {
    scenario
        .config
        .checks
        .iter()
        .find(|c| c.name == name)
        .map(|c| c.tolerance)
        .unwrap_or(default)
}

fn cmd_kepler_laws(path: &str, report_path: Option<String>) -> u8 {
    let scenario = match load_and_build(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if scenario.system.name != "kepler" {
        eprintln!(
            "config error: field 'system': orbit laws need the central-force system, got '{}'",
            scenario.system.name
        );
        return EXIT_CONFIG;
    }
    let config::TypedParams::Kepler(params) = scenario.params else {
        unreachable!("system name checked above")
    };
    let started = Instant::now();
    let traj = match run_trajectory(&scenario) {
        Ok(t) => t,
        Err((_, code)) => return code,
    };
    let diag = match kepler_diagnostics(&traj, params.mass, params.k) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("config error: field 'initial_state': {e}");
            return EXIT_CONFIG;
        }
    };
    if diag.energy >= 0.0 {
        eprintln!(
            "config error: field 'initial_state': orbit-law summary needs an elliptic orbit (energy {:.6e} >= 0 has no period or half axis)",
            diag.energy
        );
        return EXIT_CONFIG;
    }
    let a_semi = diag.a_semi.expect("bound orbit has a half axis");
    // A circular orbit has no perihelion passages to measure; the period
    // block is then reported as null rather than failed.
    let circular = (diag.r_max - diag.r_min) <= 1e-6 * diag.r_max;
    let period = match diag.period {
        Some(t) => Some(t),
        None if circular => None,
        None => {
            eprintln!(
                "config error: field 'integrator.t_end': too short for period detection (need at least three perihelion passages, found {})",
                diag.perihelion_times.len()
            );
            return EXIT_CONFIG;
        }
    };
    let areal = match areal_velocity_series(&traj, params.mass) {
        Ok((_, dev)) => dev / diag.omega,
        Err(e) => {
            eprintln!("config error: field 'initial_state': {e}");
            return EXIT_CONFIG;
        }
    };
    let m = params.mass;
    let k = params.k;
    let third_law_residual = period.map(|t| {
        (t * t * k / (4.0 * std::f64::consts::PI.powi(2) * a_semi.powi(3)) - 1.0).abs()
    });
    let c = diag.hodograph_center.norm();
    let power_residual =
        (2.0 * m * diag.energy - c * c + diag.hodograph_radius * diag.hodograph_radius).abs();
    let radius_formula_residual = (diag.hodograph_radius - m * m * k / diag.omega).abs();
    let fit_rel_residual = diag.hodograph_fit_residual / diag.hodograph_radius;
    let identity = (diag.eps * diag.eps
        - 1.0
        - 2.0 * diag.omega * diag.omega * diag.energy / (m.powi(3) * k * k))
        .abs();

    let pass = third_law_residual
        .map(|r| r < law_tolerance(&scenario, "third_law", 1e-4))
        .unwrap_or(true)
        && areal < law_tolerance(&scenario, "areal", 1e-7)
        && fit_rel_residual < law_tolerance(&scenario, "hodograph_fit", 1e-7)
        && radius_formula_residual < law_tolerance(&scenario, "hodograph_radius", 1e-6)
        && power_residual < law_tolerance(&scenario, "power_identity", 1e-8)
        && identity < law_tolerance(&scenario, "eccentricity_identity", 1e-12);

    let report = KeplerLawsReport {
        omega: diag.omega,
        energy: diag.energy,
        eccentricity: diag.eps,
        semi_latus: diag.semi_latus,
        a_semi,
        period_measured: period,
        third_law_residual,
        areal_max_rel_deviation: areal,
        eccentricity_identity_residual: identity,
        out_of_plane: diag.out_of_plane,
        hodograph: HodographReport {
            radius: diag.hodograph_radius,
            center_distance: c,
            fit_rel_residual,
            radius_formula_residual,
            power_residual,
        },
        pass,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    let write_code = emit_report(&report, report_path.as_deref());
    if write_code != EXIT_OK {
        return write_code;
    }
    if pass {
        EXIT_OK
    } else {
        eprintln!("one or more orbit-law residuals exceeded their tolerance");
        EXIT_CHECK_FAILED
    }
}

fn cmd_list_systems() -> u8 {
    for name in system_names() {
        println!("{name}");
        let example = match name {
            "kepler" => geomech::systems::build_kepler(geomech::systems::KeplerParams {
                mass: 1.0,
                k: 1.0,
            })
            .unwrap(),
            "spherical_pendulum" => {
                geomech::systems::build_spherical_pendulum(geomech::systems::PendulumParams {
                    mass: 1.0,
                    radius: 1.0,
                    gravity: 1.0,
                    e_g: geomech::Vec3::new(0.0, 0.0, -1.0),
                })
                .unwrap()
            }
            "free_rigid_body" => {
                geomech::systems::build_free_rigid_body(geomech::Matrix3::diag(1.0, 2.0, 3.0))
                    .unwrap()
            }
            _ => geomech::systems::build_heavy_top(
                geomech::reduction::RigidBodyParams::diagonal(
                    1.0,
                    2.0,
                    3.0,
                    geomech::Vec3::new(0.0, 0.0, 0.1),
                    geomech::Vec3::new(0.0, 0.0, -1.0),
                )
                .unwrap(),
            )
            .unwrap(),
        };
        println!("  state: {}", example.state_names.join(", "));
        println!("  observables: {}", example.observable_names().join(", "));
        println!("  checks: {}", checks::check_names_for(name).join(", "));
    }
    EXIT_OK
}
