//! Fully wired example systems and their diagnostics: the spherical pendulum,
//! the free rigid body and heavy top, and the attractive central-force
//! (Kepler) problem with orbital analytics.
//!
//! Each built system carries its phase layout, an analytic Hamiltonian, the
//! dynamics descriptor consumed by the steppers, named observables, and the
//! symmetry data used for conservation monitoring. Units are dimensionless;
//! every law checked here is unit-covariant.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::actions::LieAlgebraAction;
use crate::error::GeomechError;
use crate::integrators::{ConstraintSpec, Observable, SystemDynamics, Trajectory};
use crate::poisson::{LieAlgebra, SmoothFunction};
use crate::reduction::{heavy_top_rhs, reconstruct, RigidBodyParams};
use crate::so3::{cross, Matrix3, Vec3};

/// Mass and coupling of the attractive central-force problem,
/// `H = ‖p‖²/2m − m k/‖x‖`.
#[derive(Debug, Clone, Copy)]
pub struct KeplerParams {
    pub mass: f64,
    pub k: f64,
}

impl KeplerParams {
    pub fn validate(&self) -> Result<(), GeomechError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(GeomechError::InvalidParameter {
                name: "mass",
                reason: format!("must be positive, got {}", self.mass),
            });
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(GeomechError::InvalidParameter {
                name: "k",
                reason: format!("must be positive, got {}", self.k),
            });
        }
        Ok(())
    }
}

/// Mass, sphere radius and uniform acceleration field (magnitude `gravity`
/// along the unit vector `e_g`) of the spherical pendulum. The potential is
/// `−m g⃗·x`, so the rest state at the lowest point `x = R e_g` has energy
/// `−m g R`.
#[derive(Debug, Clone, Copy)]
pub struct PendulumParams {
    pub mass: f64,
    pub radius: f64,
    pub gravity: f64,
    pub e_g: Vec3,
}

impl PendulumParams {
    pub fn validate(&self) -> Result<(), GeomechError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(GeomechError::InvalidParameter {
                name: "mass",
                reason: format!("must be positive, got {}", self.mass),
            });
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(GeomechError::InvalidParameter {
                name: "radius",
                reason: format!("must be positive, got {}", self.radius),
            });
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return Err(GeomechError::InvalidParameter {
                name: "gravity",
                reason: format!("must be positive, got {}", self.gravity),
            });
        }
        if (self.e_g.norm() - 1.0).abs() > 1e-9 {
            return Err(GeomechError::InvalidParameter {
                name: "e_g",
                reason: format!("must be a unit vector, norm {}", self.e_g.norm()),
            });
        }
        Ok(())
    }

    pub fn g_vec(&self) -> Vec3 {
        self.e_g.scale(self.gravity)
    }
}

/// A symmetry wired to a system: the acting algebra with its fundamental
/// fields, the momentum map on the phase space, and the components the
/// Hamiltonian is actually invariant under.
#[derive(Clone)]
pub struct Symmetry {
    pub action: LieAlgebraAction,
    pub momentum: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub invariant_components: Vec<usize>,
}

/// A built system: phase layout, Hamiltonian, dynamics, observables and
/// symmetry data.
#[derive(Clone)]
pub struct HamiltonianSystem {
    pub name: String,
    pub phase_dim: usize,
    pub state_names: Vec<String>,
    pub hamiltonian: SmoothFunction,
    pub dynamics: SystemDynamics,
    pub symmetries: Vec<Symmetry>,
    observables: Vec<Observable>,
}

impl HamiltonianSystem {
    pub fn observable_names(&self) -> Vec<&str> {
        self.observables.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Resolves a list of observable names into evaluator pairs for the
    /// integrator; unknown names are reported with the offending name.
    pub fn observables_named(&self, names: &[String]) -> Result<Vec<Observable>, GeomechError> {
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            match self.observables.iter().find(|(n, _)| n == name) {
                Some((n, f)) => out.push((n.clone(), f.clone())),
                None => {
                    return Err(GeomechError::InvalidParameter {
                        name: "observables",
                        reason: format!(
                            "unknown observable '{name}' (available: {})",
                            self.observable_names().join(", ")
                        ),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn observable_fn(&self, name: &str) -> Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
        self.observables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f.clone())
    }

    /// Checks an initial state against the phase layout and any constraints.
    pub fn validate_state(&self, state: &[f64]) -> Result<(), GeomechError> {
        if state.len() != self.phase_dim {
            return Err(GeomechError::DimensionMismatch {
                what: "initial state",
                expected: self.phase_dim,
                got: state.len(),
            });
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(GeomechError::InvalidParameter {
                name: "initial_state",
                reason: "non-finite component".into(),
            });
        }
        if let SystemDynamics::Constrained {
            mass, constraint, ..
        } = &self.dynamics
        {
            let n = self.phase_dim / 2;
            let (q, p) = state.split_at(n);
            let gres = (constraint.g)(q).abs();
            if gres > 1e-9 {
                return Err(GeomechError::InvalidParameter {
                    name: "initial_state",
                    reason: format!("constraint residual {gres:.3e} exceeds 1e-9"),
                });
            }
            let gq = (constraint.grad)(q);
            let hres = gq
                .iter()
                .zip(p)
                .map(|(a, b)| a * b / mass)
                .sum::<f64>()
                .abs();
            if hres > 1e-9 {
                return Err(GeomechError::InvalidParameter {
                    name: "initial_state",
                    reason: format!("hidden constraint residual {hres:.3e} exceeds 1e-9"),
                });
            }
        }
        if self.name == "kepler" {
            let r = Vec3::from_slice(&state[..3]).norm();
            if r < 1e-9 {
                return Err(GeomechError::InvalidParameter {
                    name: "initial_state",
                    reason: "position coincides with the force centre".into(),
                });
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for HamiltonianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianSystem")
            .field("name", &self.name)
            .field("phase_dim", &self.phase_dim)
            .finish()
    }
}

/// Registry of buildable system names.
pub fn system_names() -> [&'static str; 4] {
    ["spherical_pendulum", "free_rigid_body", "heavy_top", "kepler"]
}

/// Selector for one built-in system together with its parameters.
#[derive(Debug, Clone)]
pub enum SystemSpec {
    SphericalPendulum(PendulumParams),
    FreeRigidBody { inertia: Matrix3 },
    HeavyTop(RigidBodyParams),
    Kepler(KeplerParams),
}

/// Builds the named system after validating its parameters.
pub fn build_system(spec: &SystemSpec) -> Result<HamiltonianSystem, GeomechError> {
    match spec {
        SystemSpec::SphericalPendulum(p) => build_spherical_pendulum(*p),
        SystemSpec::FreeRigidBody { inertia } => build_free_rigid_body(*inertia),
        SystemSpec::HeavyTop(p) => build_heavy_top(p.clone()),
        SystemSpec::Kepler(p) => build_kepler(*p),
    }
}

/// Vertical angular momentum of the pendulum, `J₁(x, p) = e_g·(x × p)`;
/// its only singular value is 0 (position, momentum and gravity coplanar).
pub fn pendulum_j1(x: Vec3, p: Vec3, e_g: Vec3) -> f64 {
    e_g.dot(cross(x, p))
}

/// The conserved perihelion-pointing vector of the central-force problem,
/// `(‖p‖²/(m²k) − 1/‖x‖)·x − ((p·x)/(m²k))·p`; its length is the orbit
/// eccentricity, and it vanishes on circular orbits.
pub fn eccentricity_vector(x: Vec3, p: Vec3, mass: f64, k: f64) -> Result<Vec3, GeomechError> {
    let r = x.norm();
    if r == 0.0 {
        return Err(GeomechError::InvalidParameter {
            name: "x",
            reason: "position at the force centre".into(),
        });
    }
    let m2k = mass * mass * k;
    Ok((p.norm_squared() / m2k - 1.0 / r) * x - (p.dot(x) / m2k) * p)
}

/// The central-force problem on punctured 3-space, state `[x | p]`.
pub fn build_kepler(params: KeplerParams) -> Result<HamiltonianSystem, GeomechError> {
    params.validate()?;
    let KeplerParams { mass, k } = params;
    let grad_v = Arc::new(move |q: &[f64]| {
        let x = Vec3::from_slice(q);
        let r = x.norm();
        (x.scale(mass * k / (r * r * r))).to_array().to_vec()
    });
    let hamiltonian = SmoothFunction::new(
        6,
        move |s: &[f64]| {
            let x = Vec3::from_slice(&s[..3]);
            let p = Vec3::from_slice(&s[3..]);
            p.norm_squared() / (2.0 * mass) - mass * k / x.norm()
        },
        move |s: &[f64]| {
            let x = Vec3::from_slice(&s[..3]);
            let p = Vec3::from_slice(&s[3..]);
            let r = x.norm();
            let gx = x.scale(mass * k / (r * r * r));
            let gp = p.scale(1.0 / mass);
            vec![gx.x, gx.y, gx.z, gp.x, gp.y, gp.z]
        },
    );
    let mut observables: Vec<Observable> = Vec::new();
    let h2 = hamiltonian.clone();
    observables.push(("energy".into(), Arc::new(move |s: &[f64]| h2.value(s))));
    observables.push((
        "radius".into(),
        Arc::new(|s: &[f64]| Vec3::from_slice(&s[..3]).norm()),
    ));
    observables.push((
        "radial_momentum".into(),
        Arc::new(|s: &[f64]| Vec3::from_slice(&s[..3]).dot(Vec3::from_slice(&s[3..]))),
    ));
    for (axis, label) in ["x", "y", "z"].iter().enumerate() {
        observables.push((
            format!("angular_momentum_{label}"),
            Arc::new(move |s: &[f64]| {
                cross(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..])).to_array()[axis]
            }),
        ));
        observables.push((
            format!("eccentricity_{label}"),
            Arc::new(move |s: &[f64]| {
                eccentricity_vector(
                    Vec3::from_slice(&s[..3]),
                    Vec3::from_slice(&s[3..]),
                    mass,
                    k,
                )
                .map(|e| e.to_array()[axis])
                .unwrap_or(f64::NAN)
            }),
        ));
    }
    let symmetry = Symmetry {
        action: LieAlgebraAction::rotations_on_r3(),
        momentum: Arc::new(|s: &[f64]| {
            cross(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..]))
                .to_array()
                .to_vec()
        }),
        invariant_components: vec![0, 1, 2],
    };
    Ok(HamiltonianSystem {
        name: "kepler".into(),
        phase_dim: 6,
        state_names: ["x1", "x2", "x3", "p1", "p2", "p3"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        hamiltonian,
        dynamics: SystemDynamics::Separable { mass, grad_v },
        symmetries: vec![symmetry],
        observables,
    })
}

/// The spherical pendulum, state `[x | p]` on the sphere `‖x‖ = R`.
pub fn build_spherical_pendulum(params: PendulumParams) -> Result<HamiltonianSystem, GeomechError> {
    params.validate()?;
    let PendulumParams { mass, radius, .. } = params;
    let g_vec = params.g_vec();
    let e_g = params.e_g;
    let grad_v = Arc::new(move |_q: &[f64]| (g_vec.scale(-mass)).to_array().to_vec());
    let hamiltonian = SmoothFunction::new(
        6,
        move |s: &[f64]| {
            let x = Vec3::from_slice(&s[..3]);
            let p = Vec3::from_slice(&s[3..]);
            p.norm_squared() / (2.0 * mass) - mass * g_vec.dot(x)
        },
        move |s: &[f64]| {
            let p = Vec3::from_slice(&s[3..]);
            let gx = g_vec.scale(-mass);
            let gp = p.scale(1.0 / mass);
            vec![gx.x, gx.y, gx.z, gp.x, gp.y, gp.z]
        },
    );
    let mut observables: Vec<Observable> = Vec::new();
    let h2 = hamiltonian.clone();
    observables.push(("energy".into(), Arc::new(move |s: &[f64]| h2.value(s))));
    observables.push((
        "angular_momentum_vertical".into(),
        Arc::new(move |s: &[f64]| {
            pendulum_j1(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..]), e_g)
        }),
    ));
    let r2 = radius * radius;
    observables.push((
        "constraint_residual".into(),
        Arc::new(move |s: &[f64]| Vec3::from_slice(&s[..3]).norm_squared() - r2),
    ));
    observables.push((
        "hidden_constraint_residual".into(),
        Arc::new(|s: &[f64]| Vec3::from_slice(&s[..3]).dot(Vec3::from_slice(&s[3..]))),
    ));
    observables.push((
        "reduced_height".into(),
        Arc::new(move |s: &[f64]| e_g.dot(Vec3::from_slice(&s[..3]))),
    ));
    observables.push((
        "reduced_vertical_momentum".into(),
        Arc::new(move |s: &[f64]| e_g.dot(Vec3::from_slice(&s[3..]))),
    ));
    // Rotations about the gravity axis: the one-parameter symmetry that
    // survives a nonzero field.
    let vertical_action = LieAlgebraAction::new(LieAlgebra::abelian(1), 3, move |_k, x| {
        cross(e_g, Vec3::from_slice(x)).to_array().to_vec()
    });
    let symmetry = Symmetry {
        action: vertical_action,
        momentum: Arc::new(move |s: &[f64]| {
            vec![pendulum_j1(
                Vec3::from_slice(&s[..3]),
                Vec3::from_slice(&s[3..]),
                e_g,
            )]
        }),
        invariant_components: vec![0],
    };
    Ok(HamiltonianSystem {
        name: "spherical_pendulum".into(),
        phase_dim: 6,
        state_names: ["x1", "x2", "x3", "p1", "p2", "p3"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        hamiltonian,
        dynamics: SystemDynamics::Constrained {
            mass,
            grad_v,
            constraint: ConstraintSpec::sphere(radius),
        },
        symmetries: vec![symmetry],
        observables,
    })
}

fn build_rigid_like(name: &str, params: RigidBodyParams) -> HamiltonianSystem {
    let p2 = params.clone();
    let field = Arc::new(move |s: &[f64]| {
        let (d_pi, d_ps) =
            heavy_top_rhs(&p2, Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..]));
        vec![d_pi.x, d_pi.y, d_pi.z, d_ps.x, d_ps.y, d_ps.z]
    });
    let inv = params.inertia_inv;
    let a = params.a_vec;
    let hamiltonian = SmoothFunction::new(
        6,
        move |s: &[f64]| {
            let pi = Vec3::from_slice(&s[..3]);
            let ps = Vec3::from_slice(&s[3..]);
            0.5 * pi.dot(inv.mul_vec(pi)) - ps.dot(a)
        },
        move |s: &[f64]| {
            let pi = Vec3::from_slice(&s[..3]);
            let mut g = inv.mul_vec(pi).to_array().to_vec();
            g.extend((-a).to_array());
            g
        },
    );
    let mut observables: Vec<Observable> = Vec::new();
    let h2 = hamiltonian.clone();
    observables.push(("energy".into(), Arc::new(move |s: &[f64]| h2.value(s))));
    observables.push((
        "momentum_norm2".into(),
        Arc::new(|s: &[f64]| Vec3::from_slice(&s[..3]).norm_squared()),
    ));
    observables.push((
        "weight_norm2".into(),
        Arc::new(|s: &[f64]| Vec3::from_slice(&s[3..]).norm_squared()),
    ));
    observables.push((
        "momentum_weight_pairing".into(),
        Arc::new(|s: &[f64]| Vec3::from_slice(&s[..3]).dot(Vec3::from_slice(&s[3..]))),
    ));
    let inv2 = params.inertia_inv;
    observables.push((
        "kinetic_energy".into(),
        Arc::new(move |s: &[f64]| {
            let pi = Vec3::from_slice(&s[..3]);
            0.5 * pi.dot(inv2.mul_vec(pi))
        }),
    ));
    HamiltonianSystem {
        name: name.into(),
        phase_dim: 6,
        state_names: ["Pi1", "Pi2", "Pi3", "Ps1", "Ps2", "Ps3"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        hamiltonian,
        dynamics: SystemDynamics::FirstOrder { field },
        symmetries: Vec::new(),
        observables,
    }
}

/// Torque-free rigid body about a fixed point: the loading data is zeroed so
/// the momentum equation decouples.
pub fn build_free_rigid_body(inertia: Matrix3) -> Result<HamiltonianSystem, GeomechError> {
    let params = RigidBodyParams::new(inertia, Vec3::ZERO, Vec3::ZERO)?;
    Ok(build_rigid_like("free_rigid_body", params))
}

/// Rigid body with gravity about a fixed point, reduced state `(Π, P_S)`.
pub fn build_heavy_top(params: RigidBodyParams) -> Result<HamiltonianSystem, GeomechError> {
    Ok(build_rigid_like("heavy_top", params))
}

/// Applies a configuration rotation to a body-frame vector.
pub fn body_spatial(x: &Matrix3, body_vec: Vec3) -> Vec3 {
    x.mul_vec(body_vec)
}

/// Rotational kinetic energy `½⟨Ω, IΩ⟩` of a body angular velocity.
pub fn kinetic_energy(params: &RigidBodyParams, omega_s: Vec3) -> f64 {
    0.5 * omega_s.dot(params.inertia.mul_vec(omega_s))
}

/// Body angular momentum of a body angular velocity, `Π = I Ω`.
pub fn body_momentum(params: &RigidBodyParams, omega_s: Vec3) -> Vec3 {
    params.inertia.mul_vec(omega_s)
}

/// Max drift of the spatial angular momentum `x(t)(Π(t))` along a recorded
/// momentum trajectory of the torque-free body, with the configuration
/// reconstructed from the body angular velocity samples. Requires a uniform
/// recording grid.
pub fn spatial_momentum_drift(
    params: &RigidBodyParams,
    traj: &Trajectory,
) -> Result<f64, GeomechError> {
    if traj.len() < 2 {
        return Err(GeomechError::InsufficientSamples(
            "spatial momentum drift needs at least 2 samples".into(),
        ));
    }
    let times = traj.times();
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(GeomechError::GridMismatch(
                "spatial momentum drift needs a uniform grid".into(),
            ));
        }
    }
    let omegas: Vec<Vec3> = traj
        .states()
        .iter()
        .map(|s| params.omega_of(Vec3::from_slice(&s[..3])))
        .collect();
    let rotations = reconstruct(Matrix3::IDENTITY, &omegas, dt);
    let j0 = Vec3::from_slice(&traj.state(0)[..3]);
    let mut worst: f64 = 0.0;
    for (rot, s) in rotations.iter().zip(traj.states()) {
        let j = body_spatial(rot, Vec3::from_slice(&s[..3]));
        worst = worst.max((j - j0).norm());
    }
    Ok(worst)
}

/// Orbit analytics of a recorded central-force trajectory.
#[derive(Debug, Clone)]
pub struct KeplerDiagnostics {
    /// Angular momentum magnitude at the initial sample.
    pub omega: f64,
    /// Energy at the initial sample.
    pub energy: f64,
    /// Perihelion-pointing conserved vector at the initial sample.
    pub eps_vec: Vec3,
    /// Its magnitude, the orbit eccentricity.
    pub eps: f64,
    /// Conic parameter `Ω²/(m²k)`.
    pub semi_latus: f64,
    /// Half major axis from the measured radial extremes (bound orbits only).
    pub a_semi: Option<f64>,
    /// Radial period from successive perihelion passages (bound orbits only,
    /// needs at least three passages).
    pub period: Option<f64>,
    /// Fitted circle through the momentum samples.
    pub hodograph_center: Vec3,
    pub hodograph_radius: f64,
    /// Worst distance of a momentum sample from the fitted circle.
    pub hodograph_fit_residual: f64,
    /// Largest out-of-plane component seen in the samples.
    pub out_of_plane: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub perihelion_times: Vec<f64>,
}

/// Orthonormal in-plane basis and normal for a trajectory with initial
/// angular momentum along `x0 × p0`.
fn orbit_plane_basis(x0: Vec3, p0: Vec3) -> (Vec3, Vec3, Vec3) {
    let normal = cross(x0, p0).normalized();
    let u1 = x0.normalized();
    let u2 = cross(normal, u1);
    (u1, u2, normal)
}

/// Least-squares circle through planar points (algebraic form): returns
/// center and radius.
fn fit_circle(points: &[(f64, f64)]) -> Result<((f64, f64), f64), GeomechError> {
    if points.len() < 3 {
        return Err(GeomechError::InsufficientSamples(
            "circle fit needs at least 3 points".into(),
        ));
    }
    let mut ata = DMatrix::<f64>::zeros(3, 3);
    let mut atb = DVector::<f64>::zeros(3);
    for &(a, b) in points {
        let row = [2.0 * a, 2.0 * b, 1.0];
        let rhs = a * a + b * b;
        for i in 0..3 {
            for j in 0..3 {
                ata[(i, j)] += row[i] * row[j];
            }
            atb[i] += row[i] * rhs;
        }
    }
    let sol = ata.lu().solve(&atb).ok_or(GeomechError::InvalidParameter {
        name: "hodograph",
        reason: "degenerate circle fit".into(),
    })?;
    let (c1, c2, rho) = (sol[0], sol[1], sol[2]);
    let radius2 = rho + c1 * c1 + c2 * c2;
    if radius2 <= 0.0 {
        return Err(GeomechError::InvalidParameter {
            name: "hodograph",
            reason: "circle fit produced a non-positive radius".into(),
        });
    }
    Ok(((c1, c2), radius2.sqrt()))
}

/// Interior local minima of `r` with three-point parabolic refinement of the
/// passage time.
fn perihelion_passages(times: &[f64], r: &[f64]) -> Vec<f64> {
    let mut passages = Vec::new();
    for i in 1..r.len() - 1 {
        if r[i] < r[i - 1] && r[i] <= r[i + 1] {
            let denom = r[i - 1] - 2.0 * r[i] + r[i + 1];
            let t = if denom.abs() > 0.0 {
                let h = 0.5 * (times[i + 1] - times[i - 1]);
                times[i] + 0.5 * h * (r[i - 1] - r[i + 1]) / denom
            } else {
                times[i]
            };
            passages.push(t);
        }
    }
    passages
}

/// Computes orbit analytics: conserved quantities at the initial sample, the
/// hodograph circle fit over the momentum samples, radial extremes, and the
/// radial period from perihelion passages. The samples are projected onto
/// the plane orthogonal to the initial angular momentum; the discarded
/// out-of-plane magnitude is reported.
pub fn kepler_diagnostics(
    traj: &Trajectory,
    mass: f64,
    k: f64,
) -> Result<KeplerDiagnostics, GeomechError> {
    if traj.len() < 3 {
        return Err(GeomechError::InsufficientSamples(
            "orbit diagnostics need at least 3 samples".into(),
        ));
    }
    let s0 = traj.state(0);
    let x0 = Vec3::from_slice(&s0[..3]);
    let p0 = Vec3::from_slice(&s0[3..]);
    let omega_vec = cross(x0, p0);
    let omega = omega_vec.norm();
    if omega <= 1e-14 {
        return Err(GeomechError::SingularMomentum(
            "zero angular momentum orbit".into(),
        ));
    }
    let energy = p0.norm_squared() / (2.0 * mass) - mass * k / x0.norm();
    let eps_vec = eccentricity_vector(x0, p0, mass, k)?;
    let eps = eps_vec.norm();
    let semi_latus = omega * omega / (mass * mass * k);
    let (u1, u2, normal) = orbit_plane_basis(x0, p0);

    let mut out_of_plane: f64 = 0.0;
    let mut planar_p = Vec::with_capacity(traj.len());
    let mut radii = Vec::with_capacity(traj.len());
    for s in traj.states() {
        let x = Vec3::from_slice(&s[..3]);
        let p = Vec3::from_slice(&s[3..]);
        out_of_plane = out_of_plane
            .max(x.dot(normal).abs())
            .max(p.dot(normal).abs());
        planar_p.push((p.dot(u1), p.dot(u2)));
        radii.push(x.norm());
    }

    let ((c1, c2), hodograph_radius) = fit_circle(&planar_p)?;
    let hodograph_center = c1 * u1 + c2 * u2;
    let mut hodograph_fit_residual: f64 = 0.0;
    for &(a, b) in &planar_p {
        let d = ((a - c1) * (a - c1) + (b - c2) * (b - c2)).sqrt();
        hodograph_fit_residual = hodograph_fit_residual.max((d - hodograph_radius).abs());
    }

    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().copied().fold(0.0f64, f64::max);
    // Radial minima are meaningful only when the oscillation rises above
    // integrator noise; a circular orbit has no perihelion to detect.
    let oscillating = (r_max - r_min) > 1e-6 * r_max;
    let perihelion_times = if oscillating {
        perihelion_passages(traj.times(), &radii)
    } else {
        Vec::new()
    };

    let bound = energy < 0.0;
    let a_semi = bound.then_some(0.5 * (r_min + r_max));
    let period = if bound && perihelion_times.len() >= 3 {
        let gaps: Vec<f64> = perihelion_times.windows(2).map(|w| w[1] - w[0]).collect();
        Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
    } else {
        None
    };

    Ok(KeplerDiagnostics {
        omega,
        energy,
        eps_vec,
        eps,
        semi_latus,
        a_semi,
        period,
        hodograph_center,
        hodograph_radius,
        hodograph_fit_residual,
        out_of_plane,
        r_min,
        r_max,
        perihelion_times,
    })
}

/// Per-sample areal momentum `m r² dθ/dt` with the polar-angle rate taken by
/// central differences (interior samples), plus the worst absolute deviation
/// from the conserved angular momentum magnitude. Rejects trajectories whose
/// angular momentum leaves the initial plane by more than `1e-8·Ω`.
pub fn areal_velocity_series(
    traj: &Trajectory,
    mass: f64,
) -> Result<(Vec<f64>, f64), GeomechError> {
    if traj.len() < 3 {
        return Err(GeomechError::InsufficientSamples(
            "areal series needs at least 3 samples".into(),
        ));
    }
    let s0 = traj.state(0);
    let x0 = Vec3::from_slice(&s0[..3]);
    let p0 = Vec3::from_slice(&s0[3..]);
    let omega_vec = cross(x0, p0);
    let omega = omega_vec.norm();
    if omega <= 1e-14 {
        return Err(GeomechError::SingularMomentum(
            "areal series undefined at zero angular momentum".into(),
        ));
    }
    let (u1, u2, normal) = orbit_plane_basis(x0, p0);
    // Planarity gate on the angular momentum itself.
    for s in traj.states() {
        let l = cross(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..]));
        let off = (l - l.dot(normal) * normal).norm();
        if off > 1e-8 * omega {
            return Err(GeomechError::NotPlanar(off / omega));
        }
    }
    let times = traj.times();
    let mut theta = Vec::with_capacity(traj.len());
    let mut radii = Vec::with_capacity(traj.len());
    let mut prev = 0.0f64;
    for (idx, s) in traj.states().iter().enumerate() {
        let x = Vec3::from_slice(&s[..3]);
        let mut angle = x.dot(u2).atan2(x.dot(u1));
        if idx > 0 {
            // Unwrap against the previous sample.
            while angle - prev > std::f64::consts::PI {
                angle -= 2.0 * std::f64::consts::PI;
            }
            while angle - prev < -std::f64::consts::PI {
                angle += 2.0 * std::f64::consts::PI;
            }
        }
        prev = angle;
        theta.push(angle);
        radii.push(x.norm());
    }
    let mut series = Vec::with_capacity(traj.len() - 2);
    let mut worst: f64 = 0.0;
    for i in 1..traj.len() - 1 {
        let dtheta = (theta[i + 1] - theta[i - 1]) / (times[i + 1] - times[i - 1]);
        let value = mass * radii[i] * radii[i] * dtheta;
        worst = worst.max((value - omega).abs());
        series.push(value);
    }
    Ok((series, worst))
}

/// Least-squares conic `1/r = (1 + ε cos(θ − θ₀))/Λ` through planar samples.
#[derive(Debug, Clone, Copy)]
pub struct ConicFit {
    pub semi_latus: f64,
    pub eccentricity: f64,
    pub perihelion_angle: f64,
    pub max_rel_residual: f64,
}

/// Fits the polar conic through the position samples of a planar trajectory.
pub fn fit_conic(traj: &Trajectory) -> Result<ConicFit, GeomechError> {
    if traj.len() < 8 {
        return Err(GeomechError::InsufficientSamples(
            "conic fit needs at least 8 samples".into(),
        ));
    }
    let s0 = traj.state(0);
    let x0 = Vec3::from_slice(&s0[..3]);
    let p0 = Vec3::from_slice(&s0[3..]);
    let (u1, u2, _) = orbit_plane_basis(x0, p0);
    let mut ata = DMatrix::<f64>::zeros(3, 3);
    let mut atb = DVector::<f64>::zeros(3);
    let mut samples = Vec::with_capacity(traj.len());
    for s in traj.states() {
        let x = Vec3::from_slice(&s[..3]);
        let r = x.norm();
        let theta = x.dot(u2).atan2(x.dot(u1));
        samples.push((r, theta));
        let row = [1.0, theta.cos(), theta.sin()];
        for i in 0..3 {
            for j in 0..3 {
                ata[(i, j)] += row[i] * row[j];
            }
            atb[i] += row[i] / r;
        }
    }
    let sol = ata.lu().solve(&atb).ok_or(GeomechError::InvalidParameter {
        name: "conic",
        reason: "degenerate conic fit".into(),
    })?;
    let (a, c, s) = (sol[0], sol[1], sol[2]);
    if a <= 0.0 {
        return Err(GeomechError::InvalidParameter {
            name: "conic",
            reason: "fit produced a non-positive latus coefficient".into(),
        });
    }
    let semi_latus = 1.0 / a;
    let eccentricity = (c * c + s * s).sqrt() / a;
    let perihelion_angle = s.atan2(c);
    let mut max_rel_residual: f64 = 0.0;
    for (r, theta) in samples {
        let model = semi_latus / (1.0 + eccentricity * (theta - perihelion_angle).cos());
        max_rel_residual = max_rel_residual.max((r - model).abs() / r);
    }
    Ok(ConicFit {
        semi_latus,
        eccentricity,
        perihelion_angle,
        max_rel_residual,
    })
}
