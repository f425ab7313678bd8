//! Scenario configuration: JSON schema, validation and construction of the
//! library objects. Every validation failure names the offending field.

use serde::Deserialize;

use geomech::integrators::{IntegratorConfig, Method};
use geomech::reduction::RigidBodyParams;
use geomech::systems::{
    build_free_rigid_body, build_heavy_top, build_kepler, build_spherical_pendulum,
    HamiltonianSystem, KeplerParams, PendulumParams,
};
use geomech::{Matrix3, Vec3};

/// A configuration problem; the message names the offending field.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

fn field_err(field: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("field '{field}': {reason}"))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub method: String,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_solver_max_iter")]
    pub solver_max_iter: usize,
}

fn default_stride() -> usize {
    1
}
fn default_solver_tol() -> f64 {
    1e-12
}
fn default_solver_max_iter() -> usize {
    50
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub csv_path: Option<String>,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub name: String,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    pub initial_state: Vec<f64>,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub checks: Vec<CheckSection>,
    /// Reserved for future stochastic components; accepted and unused.
    #[serde(default)]
    #[allow(dead_code)]
    pub seed: Option<u64>,
}

/// Typed parameters recovered from the config's params map.
#[derive(Debug, Clone)]
pub enum TypedParams {
    Kepler(KeplerParams),
    Pendulum(PendulumParams),
    RigidBody(RigidBodyParams),
}

/// A fully validated scenario ready to run.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub system: HamiltonianSystem,
    pub params: TypedParams,
    pub integrator: IntegratorConfig,
}

pub fn load_config(path: &str) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read '{path}': {e}")))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid JSON in '{path}': {e}")))
}

fn take_f64_or(
    map: &serde_json::Map<String, serde_json::Value>,
    field: &str,
    default: f64,
) -> Result<f64, ConfigError> {
    match map.get(field) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| field_err(&format!("params.{field}"), "must be a number")),
    }
}

fn take_vec3_or(
    map: &serde_json::Map<String, serde_json::Value>,
    field: &str,
    default: Vec3,
) -> Result<Vec3, ConfigError> {
    match map.get(field) {
        None => Ok(default),
        Some(v) => {
            let arr = v
                .as_array()
                .ok_or_else(|| field_err(&format!("params.{field}"), "must be an array of 3"))?;
            if arr.len() != 3 {
                return Err(field_err(
                    &format!("params.{field}"),
                    format!("must have 3 entries, got {}", arr.len()),
                ));
            }
            let mut out = [0.0; 3];
            for (i, e) in arr.iter().enumerate() {
                out[i] = e
                    .as_f64()
                    .ok_or_else(|| field_err(&format!("params.{field}"), "must be numeric"))?;
            }
            Ok(Vec3::from_slice(&out))
        }
    }
}

fn take_inertia(
    map: &serde_json::Map<String, serde_json::Value>,
) -> Result<Matrix3, ConfigError> {
    let v = map
        .get("inertia")
        .ok_or_else(|| field_err("params.inertia", "missing"))?;
    let arr = v
        .as_array()
        .ok_or_else(|| field_err("params.inertia", "must be an array of 3 or 9 numbers"))?;
    let nums: Result<Vec<f64>, ConfigError> = arr
        .iter()
        .map(|e| {
            e.as_f64()
                .ok_or_else(|| field_err("params.inertia", "must be numeric"))
        })
        .collect();
    let nums = nums?;
    match nums.len() {
        3 => Ok(Matrix3::diag(nums[0], nums[1], nums[2])),
        9 => Ok(Matrix3::new([
            [nums[0], nums[1], nums[2]],
            [nums[3], nums[4], nums[5]],
            [nums[6], nums[7], nums[8]],
        ])),
        n => Err(field_err(
            "params.inertia",
            format!("must have 3 (diagonal) or 9 (row-major) entries, got {n}"),
        )),
    }
}

/// Builds and validates the library objects for a parsed configuration.
pub fn build_scenario(config: ScenarioConfig) -> Result<Scenario, ConfigError> {
    let map = &config.params;
    let (system, params) = match config.system.as_str() {
        "kepler" => {
            let p = KeplerParams {
                mass: take_f64_or(map, "mass", 1.0)?,
                k: take_f64_or(map, "k", 1.0)?,
            };
            let sys = build_kepler(p).map_err(|e| field_err("params", e))?;
            (sys, TypedParams::Kepler(p))
        }
        "spherical_pendulum" => {
            let p = PendulumParams {
                mass: take_f64_or(map, "mass", 1.0)?,
                radius: take_f64_or(map, "radius", 1.0)?,
                gravity: take_f64_or(map, "gravity", 1.0)?,
                e_g: take_vec3_or(map, "e_g", Vec3::new(0.0, 0.0, -1.0))?,
            };
            let sys = build_spherical_pendulum(p).map_err(|e| field_err("params", e))?;
            (sys, TypedParams::Pendulum(p))
        }
        "free_rigid_body" => {
            let inertia = take_inertia(map)?;
            let sys = build_free_rigid_body(inertia).map_err(|e| field_err("params.inertia", e))?;
            let p = RigidBodyParams::new(inertia, Vec3::ZERO, Vec3::ZERO)
                .map_err(|e| field_err("params.inertia", e))?;
            (sys, TypedParams::RigidBody(p))
        }
        "heavy_top" => {
            let inertia = take_inertia(map)?;
            let a_vec = take_vec3_or(map, "a_vec", Vec3::ZERO)?;
            let p_vec = take_vec3_or(map, "p_vec", Vec3::ZERO)?;
            let p = RigidBodyParams::new(inertia, a_vec, p_vec)
                .map_err(|e| field_err("params", e))?;
            let sys = build_heavy_top(p.clone()).map_err(|e| field_err("params", e))?;
            (sys, TypedParams::RigidBody(p))
        }
        other => {
            return Err(field_err(
                "system",
                format!(
                    "unknown system '{other}' (available: {})",
                    geomech::systems::system_names().join(", ")
                ),
            ))
        }
    };

    system
        .validate_state(&config.initial_state)
        .map_err(|e| field_err("initial_state", e))?;

    let method: Method = config
        .integrator
        .method
        .parse()
        .map_err(|e| field_err("integrator.method", e))?;
    let mut integrator = IntegratorConfig::new(method, config.integrator.dt, config.integrator.t_end);
    integrator.record_stride = config.integrator.record_stride;
    integrator.solver_tol = config.integrator.solver_tol;
    integrator.solver_max_iter = config.integrator.solver_max_iter;
    integrator
        .validate()
        .map_err(|e| field_err("integrator", e))?;

    // Observables must resolve now so the failure is a config error.
    system
        .observables_named(&config.observables)
        .map_err(|e| field_err("observables", e))?;

    for check in &config.checks {
        if !(check.tolerance > 0.0) {
            return Err(field_err(
                "checks.tolerance",
                format!("must be positive, got {}", check.tolerance),
            ));
        }
        if !crate::checks::check_names_for(&system.name).contains(&check.name.as_str()) {
            return Err(field_err(
                "checks.name",
                format!(
                    "unknown check '{}' for system '{}' (available: {})",
                    check.name,
                    system.name,
                    crate::checks::check_names_for(&system.name).join(", ")
                ),
            ));
        }
    }

    Ok(Scenario {
        config,
        system,
        params,
        integrator,
    })
}
