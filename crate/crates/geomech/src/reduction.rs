//! Reduction machinery: velocity-level residuals for symmetric Lagrangian
//! systems, the rigid-body equations on the dual of the rotation algebra,
//! rotation-group reconstruction, and the reduced central-force and pendulum
//! descriptions.
//!
//! The residual operators take sampled curves `γ(t)` on the configuration
//! space and `V(t)` in the acting algebra and measure, by central differences
//! on the recorded grid, how well they satisfy
//!
//! * the compatibility condition `dγ/dt = φ(V(t))(γ(t))`, and
//! * the reduced momentum equation
//!   `d/dt d₂L̄(γ,V) − ad*_V d₂L̄(γ,V) = J(d₁L̄(γ,V))`,
//!
//! where `J` is the lifted momentum map of the action applied to the
//! coordinate covector `d₁L̄`. Endpoints are excluded, so the residual order
//! matches the order of the difference stencil.

use std::sync::Arc;

use crate::actions::{lift_momentum, LieAlgebraAction};
use crate::error::GeomechError;
use crate::so3::{cross, exp_so3, Matrix3, Vec3};

/// Inertia and loading data for a rigid body spinning about a fixed point.
///
/// `inertia` is the body-frame inertia form, `a_vec` points from the fixed
/// point to the centre of mass (body frame), and `p_vec` is the weight vector
/// (spatial frame).
#[derive(Debug, Clone)]
pub struct RigidBodyParams {
    pub inertia: Matrix3,
    pub inertia_inv: Matrix3,
    pub a_vec: Vec3,
    pub p_vec: Vec3,
}

impl RigidBodyParams {
    /// Validates symmetry and positive definiteness of the inertia form and
    /// checks the supplied data is finite.
    pub fn new(inertia: Matrix3, a_vec: Vec3, p_vec: Vec3) -> Result<Self, GeomechError> {
        let m = &inertia.m;
        let mut sym: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                sym = sym.max((m[i][j] - m[j][i]).abs());
            }
        }
        if sym > 1e-12 {
            return Err(GeomechError::InvalidParameter {
                name: "inertia",
                reason: format!("not symmetric (defect {sym:.3e})"),
            });
        }
        // Sylvester criterion for positive definiteness.
        let m1 = m[0][0];
        let m2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let m3 = inertia.det();
        if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
            return Err(GeomechError::InvalidParameter {
                name: "inertia",
                reason: format!("not positive definite (minors {m1:.3e}, {m2:.3e}, {m3:.3e})"),
            });
        }
        if !(a_vec.is_finite() && p_vec.is_finite()) {
            return Err(GeomechError::InvalidParameter {
                name: "a_vec/p_vec",
                reason: "non-finite components".into(),
            });
        }
        let inertia_inv = inertia.inverse();
        let product = inertia.mul_mat(&inertia_inv);
        let mut defect: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((product.m[i][j] - target).abs());
            }
        }
        if defect > 1e-12 {
            return Err(GeomechError::InvalidParameter {
                name: "inertia",
                reason: format!("inverse check failed (defect {defect:.3e})"),
            });
        }
        Ok(RigidBodyParams {
            inertia,
            inertia_inv,
            a_vec,
            p_vec,
        })
    }

    pub fn diagonal(
        i1: f64,
        i2: f64,
        i3: f64,
        a_vec: Vec3,
        p_vec: Vec3,
    ) -> Result<Self, GeomechError> {
        RigidBodyParams::new(Matrix3::diag(i1, i2, i3), a_vec, p_vec)
    }

    /// Body angular velocity from body angular momentum.
    pub fn omega_of(&self, pi: Vec3) -> Vec3 {
        self.inertia_inv.mul_vec(pi)
    }

    /// Energy `½⟨Π, I⁻¹Π⟩ − P_S·a` of the reduced state.
    pub fn energy(&self, pi: Vec3, p_s: Vec3) -> f64 {
        0.5 * pi.dot(self.omega_of(pi)) - p_s.dot(self.a_vec)
    }
}

/// Right-hand side of the reduced rigid-body system on body momentum and
/// body-frame weight:
/// `dΠ/dt = Π × Ω + a × P_S`, `dP_S/dt = −Ω × P_S`, with `Ω = I⁻¹Π`.
/// With the gravity torque removed this is the classical free-body momentum
/// equation.
pub fn heavy_top_rhs(params: &RigidBodyParams, pi: Vec3, p_s: Vec3) -> (Vec3, Vec3) {
    let omega = params.omega_of(pi);
    let d_pi = cross(pi, omega) + cross(params.a_vec, p_s);
    let d_ps = cross(p_s, omega);
    (d_pi, d_ps)
}

/// Worst interior-sample residual of the compatibility condition
/// `dγ/dt = φ(V(t))(γ(t))`, with the time derivative by central differences.
pub fn compatibility_residual(
    action: &LieAlgebraAction,
    gamma: &[Vec<f64>],
    velocity: &[Vec<f64>],
    dt: f64,
) -> Result<f64, GeomechError> {
    if gamma.len() != velocity.len() {
        return Err(GeomechError::GridMismatch(format!(
            "{} configuration samples vs {} algebra samples",
            gamma.len(),
            velocity.len()
        )));
    }
    if gamma.len() < 3 {
        return Err(GeomechError::InsufficientSamples(
            "compatibility residual needs at least 3 samples".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for k in 1..gamma.len() - 1 {
        let expected = action.apply(&velocity[k], &gamma[k]);
        let mut residual2 = 0.0;
        for i in 0..gamma[k].len() {
            let d = (gamma[k + 1][i] - gamma[k - 1][i]) / (2.0 * dt) - expected[i];
            residual2 += d * d;
        }
        worst = worst.max(residual2.sqrt());
    }
    Ok(worst)
}

/// A symmetric Lagrangian system reduced along a locally transitive action:
/// the action plus the two partial differentials of the reduced Lagrangian
/// `L̄(x, V) = L(φ(V)(x))`, both in coordinates.
#[derive(Clone)]
pub struct EpProblem {
    pub action: LieAlgebraAction,
    /// Partial differential in the configuration slot, as a coordinate
    /// covector on the configuration space.
    pub d1_lbar: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    /// Partial differential in the algebra slot, a dual-algebra vector.
    pub d2_lbar: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
}

impl EpProblem {
    /// Worst interior-sample residual of the reduced momentum equation
    /// `d/dt d₂L̄ − ad*_V d₂L̄ − J(d₁L̄) = 0` in the dual algebra.
    pub fn residual(
        &self,
        gamma: &[Vec<f64>],
        velocity: &[Vec<f64>],
        dt: f64,
    ) -> Result<f64, GeomechError> {
        if gamma.len() != velocity.len() {
            return Err(GeomechError::GridMismatch(format!(
                "{} configuration samples vs {} algebra samples",
                gamma.len(),
                velocity.len()
            )));
        }
        if gamma.len() < 3 {
            return Err(GeomechError::InsufficientSamples(
                "residual needs at least 3 samples".into(),
            ));
        }
        let alg = self.action.algebra();
        let momenta: Vec<Vec<f64>> = gamma
            .iter()
            .zip(velocity)
            .map(|(x, v)| (self.d2_lbar)(x, v))
            .collect();
        let mut worst: f64 = 0.0;
        for k in 1..gamma.len() - 1 {
            let coad = alg.coadjoint(&velocity[k], &momenta[k]);
            let d1 = (self.d1_lbar)(&gamma[k], &velocity[k]);
            let source = lift_momentum(&self.action, &gamma[k], &d1)?;
            let mut residual2 = 0.0;
            for i in 0..alg.dim() {
                let ddt = (momenta[k + 1][i] - momenta[k - 1][i]) / (2.0 * dt);
                let r = ddt - coad[i] - source[i];
                residual2 += r * r;
            }
            worst = worst.max(residual2.sqrt());
        }
        Ok(worst)
    }
}

/// Worst interior-sample residual of the reduced momentum equation (free
/// function form of [`EpProblem::residual`]).
pub fn ep_residual(
    problem: &EpProblem,
    gamma: &[Vec<f64>],
    velocity: &[Vec<f64>],
    dt: f64,
) -> Result<f64, GeomechError> {
    problem.residual(gamma, velocity, dt)
}

/// Reduced description of the spherical pendulum: rotations act on the
/// sphere `‖x‖ = R`, and the reduced Lagrangian of a mass `m` in the uniform
/// acceleration field `g_vec` has the differentials wired here.
pub fn ep_spherical_pendulum(mass: f64, radius: f64, g_vec: Vec3) -> EpProblem {
    let r2 = radius * radius;
    EpProblem {
        action: LieAlgebraAction::rotations_on_r3(),
        d1_lbar: Arc::new(move |x: &[f64], v: &[f64]| {
            let x = Vec3::from_slice(x);
            let v = Vec3::from_slice(v);
            let vx = v.dot(x);
            let radial = (vx * vx - g_vec.dot(x)) / r2;
            (mass * (g_vec - vx * v + radial * x)).to_array().to_vec()
        }),
        d2_lbar: Arc::new(move |x: &[f64], v: &[f64]| {
            let x = Vec3::from_slice(x);
            let v = Vec3::from_slice(v);
            (mass * (r2 * v - v.dot(x) * x)).to_array().to_vec()
        }),
    }
}

/// Reduced description of the rigid body about a fixed point: rotations act
/// on the configuration group on the right; configuration samples are
/// flattened 3×3 rotation matrices.
pub fn ep_rigid_body(params: &RigidBodyParams) -> EpProblem {
    let inertia = params.inertia;
    let (a, p) = (params.a_vec, params.p_vec);
    EpProblem {
        action: LieAlgebraAction::rotations_on_rotation_group(),
        // d/dx of ⟨P, x(a)⟩ is the outer product P aᵀ in matrix coordinates.
        d1_lbar: Arc::new(move |_x: &[f64], _v: &[f64]| {
            let pa = [p.x, p.y, p.z];
            let aa = [a.x, a.y, a.z];
            let mut out = Vec::with_capacity(9);
            for pi in pa {
                for aj in aa {
                    out.push(pi * aj);
                }
            }
            out
        }),
        d2_lbar: Arc::new(move |_x: &[f64], v: &[f64]| {
            inertia.mul_vec(Vec3::from_slice(v)).to_array().to_vec()
        }),
    }
}

/// Reduced description of the central-force problem under rotations and
/// dilations (algebra basis `e1, e2, e3, s`).
pub fn ep_central_force(mass: f64, k: f64) -> EpProblem {
    EpProblem {
        action: LieAlgebraAction::rotations_scalings_on_r3(),
        d1_lbar: Arc::new(move |x: &[f64], v: &[f64]| {
            let x = Vec3::from_slice(x);
            let w = Vec3::from_slice(&v[..3]);
            let lam = v[3];
            let r = x.norm();
            let coeff = mass * (w.norm_squared() + lam * lam) - mass * k / (r * r * r);
            (coeff * x - mass * w.dot(x) * w).to_array().to_vec()
        }),
        d2_lbar: Arc::new(move |x: &[f64], v: &[f64]| {
            let x = Vec3::from_slice(x);
            let w = Vec3::from_slice(&v[..3]);
            let lam = v[3];
            let r2 = x.norm_squared();
            let rot = mass * r2 * w - mass * w.dot(x) * x;
            vec![rot.x, rot.y, rot.z, mass * r2 * lam]
        }),
    }
}

/// Body angular velocity of a pendulum trajectory sample, in the gauge
/// orthogonal to the position: `V = x × p / (m R²)`.
pub fn pendulum_gauge_velocity(x: Vec3, p: Vec3, mass: f64, radius: f64) -> Vec3 {
    cross(x, p).scale(1.0 / (mass * radius * radius))
}

/// Algebra sample for a central-force trajectory in the minimal-norm gauge
/// `X·x = 0`: rotation part `x × p/(m r²)`, dilation part `x·p/(m r²)`.
pub fn central_force_gauge_velocity(x: Vec3, p: Vec3, mass: f64) -> Vec<f64> {
    let r2 = x.norm_squared();
    let rot = cross(x, p).scale(1.0 / (mass * r2));
    vec![rot.x, rot.y, rot.z, x.dot(p) / (mass * r2)]
}

/// Advances a rotation trajectory through the algebra samples:
/// `x_{k+1} = x_k · exp(dt · X_{k+1/2})` with the midpoint read as the
/// average of consecutive samples; drifts off orthonormality beyond `1e-9`
/// are repaired by one polar Newton step. Solves `dx/dt = x·hat(X(t))` to
/// second order.
pub fn reconstruct(x0: Matrix3, omega: &[Vec3], dt: f64) -> Vec<Matrix3> {
    let mut out = Vec::with_capacity(omega.len());
    out.push(x0);
    let mut x = x0;
    for k in 0..omega.len().saturating_sub(1) {
        let midpoint = (omega[k] + omega[k + 1]).scale(0.5);
        x = x.mul_mat(&exp_so3(midpoint.scale(dt)));
        if x.orthogonality_defect() > 1e-9 {
            x = x.reorthonormalized();
        }
        out.push(x);
    }
    out
}

/// Reduced coordinates of a central-force state: radius `r = ‖x‖`, radial
/// momentum pairing `λ = x·p`, and angular momentum magnitude `Ω = ‖x×p‖`.
/// Collinear data sits at the singular momentum value and is rejected.
pub fn kepler_reduce(x: Vec3, p: Vec3) -> Result<(f64, f64, f64), GeomechError> {
    let r = x.norm();
    if r == 0.0 {
        return Err(GeomechError::SingularMomentum(
            "position at the force centre".into(),
        ));
    }
    let omega = cross(x, p).norm();
    if omega <= 1e-12 * (x.norm() * p.norm()).max(1e-30) {
        return Err(GeomechError::SingularMomentum(
            "collinear position and momentum (zero angular momentum)".into(),
        ));
    }
    Ok((r, x.dot(p), omega))
}

/// Right-hand side of the reduced central-force system on the half-plane
/// `r > 0` at fixed angular momentum `Ω`, for the reduced energy
/// `H_Ω(r, λ) = (Ω² + λ²)/(2 m r²) − m k / r`:
/// `dr/dt = λ/(m r)`, `dλ/dt = (Ω² + λ²)/(m r²) − m k / r`.
pub fn reduced_kepler_rhs(
    mass: f64,
    k: f64,
    omega: f64,
    r: f64,
    lambda: f64,
) -> Result<(f64, f64), GeomechError> {
    if !(r > 0.0) {
        return Err(GeomechError::InvalidParameter {
            name: "r",
            reason: format!("radius must be positive, got {r}"),
        });
    }
    let dr = lambda / (mass * r);
    let dlambda = (omega * omega + lambda * lambda) / (mass * r * r) - mass * k / r;
    Ok((dr, dlambda))
}

/// Reduced energy of the central-force problem at fixed angular momentum.
pub fn reduced_kepler_energy(mass: f64, k: f64, omega: f64, r: f64, lambda: f64) -> f64 {
    (omega * omega + lambda * lambda) / (2.0 * mass * r * r) - mass * k / r
}

/// Rotation-invariant observables of the spherical pendulum about the
/// gravity axis: the pair `(e_g·x, e_g·p)`. On a level set of nonzero
/// vertical angular momentum they trace the reduced orbit, which is closed.
pub fn pendulum_reduced_observables(x: Vec3, p: Vec3, e_g: Vec3) -> (f64, f64) {
    assert!(
        (e_g.norm() - 1.0).abs() < 1e-12,
        "gravity direction must be a unit vector"
    );
    (e_g.dot(x), e_g.dot(p))
}
