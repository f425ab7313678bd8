//! Invariant checks evaluated on recorded trajectories, and the JSON report.

use serde::Serialize;

use geomech::integrators::Trajectory;
use geomech::systems::spatial_momentum_drift;
use geomech::{cross, Vec3};

use crate::config::{Scenario, TypedParams};

/// How a check's drift is compared against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub metric: Metric,
    pub initial_value: Vec<f64>,
    pub max_abs_drift: f64,
    pub rel_drift: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub system: String,
    pub records: Vec<CheckRecord>,
    pub pass: bool,
    pub runtime_seconds: f64,
}

/// Checks available per system.
pub fn check_names_for(system: &str) -> Vec<&'static str> {
    match system {
        "kepler" => vec!["energy", "angular_momentum", "eccentricity_vector"],
        "spherical_pendulum" => vec![
            "energy",
            "vertical_angular_momentum",
            "constraint",
        ],
        "free_rigid_body" => vec![
            "energy",
            "momentum_norm2",
            "weight_norm2",
            "momentum_weight_pairing",
            "spatial_momentum",
        ],
        "heavy_top" => vec![
            "energy",
            "momentum_norm2",
            "weight_norm2",
            "momentum_weight_pairing",
        ],
        _ => vec![],
    }
}

fn series_drift(traj: &Trajectory, f: impl Fn(&[f64]) -> Vec<f64>) -> (Vec<f64>, f64) {
    let initial = f(traj.state(0));
    let mut worst: f64 = 0.0;
    for s in traj.states() {
        let v = f(s);
        for (a, b) in v.iter().zip(&initial) {
            worst = worst.max((a - b).abs());
        }
    }
    (initial, worst)
}

/// Evaluates one named check. Returns the record or an explanation of why
/// the check is not computable for this scenario.
pub fn evaluate_check(
    scenario: &Scenario,
    traj: &Trajectory,
    name: &str,
    tolerance: f64,
) -> Result<CheckRecord, String> {
    let sys = &scenario.system;
    let (metric, initial, max_abs_drift): (Metric, Vec<f64>, f64) = match name {
        "energy" => {
            let h = sys.hamiltonian.clone();
            let (initial, drift) = series_drift(traj, |s| vec![h.value(s)]);
            (Metric::Relative, initial, drift)
        }
        "angular_momentum" => {
            let (initial, drift) = series_drift(traj, |s| {
                cross(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..]))
                    .to_array()
                    .to_vec()
            });
            (Metric::Absolute, initial, drift)
        }
        "eccentricity_vector" => {
            let TypedParams::Kepler(p) = &scenario.params else {
                return Err("eccentricity check needs the central-force system".into());
            };
            let (mass, k) = (p.mass, p.k);
            let (initial, drift) = series_drift(traj, |s| {
                geomech::systems::eccentricity_vector(
                    Vec3::from_slice(&s[..3]),
                    Vec3::from_slice(&s[3..]),
                    mass,
                    k,
                )
                .map(|e| e.to_array().to_vec())
                .unwrap_or_else(|_| vec![f64::NAN; 3])
            });
            (Metric::Absolute, initial, drift)
        }
        "vertical_angular_momentum" => {
            let TypedParams::Pendulum(p) = &scenario.params else {
                return Err("vertical momentum check needs the pendulum system".into());
            };
            let e_g = p.e_g;
            let (initial, drift) = series_drift(traj, |s| {
                vec![e_g.dot(cross(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..])))]
            });
            (Metric::Absolute, initial, drift)
        }
        "constraint" => {
            let TypedParams::Pendulum(p) = &scenario.params else {
                return Err("constraint check needs the pendulum system".into());
            };
            let r2 = p.radius * p.radius;
            // Residual, not drift: both the holonomic and the hidden part.
            let mut worst: f64 = 0.0;
            for s in traj.states() {
                let x = Vec3::from_slice(&s[..3]);
                let pm = Vec3::from_slice(&s[3..]);
                worst = worst.max((x.norm_squared() - r2).abs()).max(x.dot(pm).abs());
            }
            (Metric::Absolute, vec![0.0], worst)
        }
        "momentum_norm2" => {
            let (initial, drift) =
                series_drift(traj, |s| vec![Vec3::from_slice(&s[..3]).norm_squared()]);
            (Metric::Absolute, initial, drift)
        }
        "weight_norm2" => {
            let (initial, drift) =
                series_drift(traj, |s| vec![Vec3::from_slice(&s[3..]).norm_squared()]);
            (Metric::Relative, initial, drift)
        }
        "momentum_weight_pairing" => {
            let (initial, drift) = series_drift(traj, |s| {
                vec![Vec3::from_slice(&s[..3]).dot(Vec3::from_slice(&s[3..]))]
            });
            (Metric::Relative, initial, drift)
        }
        "spatial_momentum" => {
            let TypedParams::RigidBody(p) = &scenario.params else {
                return Err("spatial momentum check needs a rigid-body system".into());
            };
            let drift = spatial_momentum_drift(p, traj).map_err(|e| e.to_string())?;
            let initial = traj.state(0)[..3].to_vec();
            (Metric::Absolute, initial, drift)
        }
        other => return Err(format!("unknown check '{other}'")),
    };

    let scale = initial
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let rel_drift = max_abs_drift / scale;
    let measured = match metric {
        Metric::Absolute => max_abs_drift,
        Metric::Relative => rel_drift,
    };
    Ok(CheckRecord {
        name: name.to_string(),
        metric,
        initial_value: initial,
        max_abs_drift,
        rel_drift,
        tolerance,
        pass: measured < tolerance,
    })
}
