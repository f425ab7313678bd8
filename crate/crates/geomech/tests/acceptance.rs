//! Acceptance suite: every numbered criterion runs at its stated tolerance
//! and prints one pass line. The companion command-line contract criterion
//! lives in the CLI crate's test suite.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use geomech::actions::{
    group_cocycle, lift_momentum, lifted_momentum_functions, momentum_cocycle, noether_drift,
    LieAlgebraAction,
};
use geomech::integrators::{
    integrate, midpoint_lie_poisson_step, IntegratorConfig, Method, SystemDynamics, Trajectory,
};
use geomech::poisson::{
    jacobiator, poisson_bracket, CocycleForm, LieAlgebra, PoissonStructure, SmoothFunction,
};
use geomech::reduction::{
    central_force_gauge_velocity, compatibility_residual, ep_central_force, ep_rigid_body,
    ep_spherical_pendulum, heavy_top_rhs, kepler_reduce, pendulum_gauge_velocity, reconstruct,
    reduced_kepler_rhs, RigidBodyParams,
};
use geomech::systems::{
    areal_velocity_series, build_kepler, build_spherical_pendulum, fit_conic, kepler_diagnostics,
    spatial_momentum_drift, KeplerParams, PendulumParams,
};
use geomech::{cross, exp_so3, Matrix3, Vec3};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn random_cubic(dim: usize, rng: &mut StdRng) -> SmoothFunction {
    let lin = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let quad = (0..dim * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cubic = (0..dim * dim * dim)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    SmoothFunction::polynomial_cubic(dim, lin, quad, cubic)
}

fn random_point(dim: usize, rng: &mut StdRng) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn grad_norm(f: &SmoothFunction, x: &[f64]) -> f64 {
    f.gradient(x).iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Radial period of the bound orbit started at x=(1,0,0), p=(0,1.2,0) with
/// unit mass and coupling: 2π a^{3/2} with a = 1/0.56.
fn eccentric_period() -> f64 {
    TWO_PI * (1.0f64 / 0.56).powf(1.5)
}

fn eccentric_orbit_trajectory(dt: f64, periods: f64, stride: usize) -> Trajectory {
    let sys = build_kepler(KeplerParams { mass: 1.0, k: 1.0 }).unwrap();
    let config =
        IntegratorConfig::new(Method::Verlet, dt, periods * eccentric_period()).with_stride(stride);
    integrate(
        &sys.dynamics,
        &[1.0, 0.0, 0.0, 0.0, 1.2, 0.0],
        &config,
        &[],
    )
    .unwrap()
}

#[test]
fn criterion_1_poisson_axioms() {
    let mut rng = StdRng::seed_from_u64(101);
    let so3_coboundary = {
        // Cocycle from a fixed vector through the mixed product.
        let c = [0.6, -0.8, 0.35];
        let mut th = vec![0.0; 9];
        let eps = |i: usize, j: usize, k: usize| -> f64 {
            match (i, j, k) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                _ => 0.0,
            }
        };
        for i in 0..3 {
            for j in 0..3 {
                th[i * 3 + j] = (0..3).map(|k| eps(i, j, k) * c[k]).sum();
            }
        }
        CocycleForm::new(&LieAlgebra::so3(), th).unwrap()
    };
    let structures: Vec<(String, PoissonStructure)> = vec![
        ("canonical n=1".into(), PoissonStructure::canonical(1)),
        ("canonical n=2".into(), PoissonStructure::canonical(2)),
        ("canonical n=3".into(), PoissonStructure::canonical(3)),
        (
            "so3 dual".into(),
            PoissonStructure::lie_poisson(LieAlgebra::so3(), None),
        ),
        (
            "se3 dual".into(),
            PoissonStructure::lie_poisson(LieAlgebra::se3(), None),
        ),
        (
            "cocycle-shifted so3 dual".into(),
            PoissonStructure::lie_poisson(LieAlgebra::so3(), Some(so3_coboundary)),
        ),
    ];

    for (label, p) in &structures {
        let dim = p.dim();
        let mut worst_anti: f64 = 0.0;
        let mut worst_leibniz: f64 = 0.0;
        let mut worst_jacobi: f64 = 0.0;
        for _ in 0..100 {
            let f = random_cubic(dim, &mut rng);
            let g = random_cubic(dim, &mut rng);
            let h = random_cubic(dim, &mut rng);
            let x = random_point(dim, &mut rng);

            let fg = poisson_bracket(p, &f, &g, &x).unwrap();
            let gf = poisson_bracket(p, &g, &f, &x).unwrap();
            worst_anti = worst_anti.max((fg + gf).abs() / fg.abs().max(1.0));

            let gh_prod = SmoothFunction::product(&g, &h);
            let lhs = poisson_bracket(p, &f, &gh_prod, &x).unwrap();
            let rhs = fg * h.value(&x) + g.value(&x) * poisson_bracket(p, &f, &h, &x).unwrap();
            worst_leibniz = worst_leibniz.max((lhs - rhs).abs() / lhs.abs().max(1.0));

            let scale = grad_norm(&f, &x) * grad_norm(&g, &x) * grad_norm(&h, &x);
            let j = jacobiator(p, &f, &g, &h, &x).abs() / scale.max(1e-12);
            worst_jacobi = worst_jacobi.max(j);
        }
        assert!(
            worst_anti < 1e-13,
            "{label}: antisymmetry residual {worst_anti:.3e}"
        );
        assert!(
            worst_leibniz < 1e-10,
            "{label}: Leibniz residual {worst_leibniz:.3e}"
        );
        assert!(
            worst_jacobi < 1e-9,
            "{label}: Jacobi residual {worst_jacobi:.3e}"
        );
    }

    // Negative control: a matrix field that fails the Jacobi identity must
    // be flagged. (In the vector picture w = (L23, L31, L12) this field has
    // w·curl w = −x1, nonzero away from the plane x1 = 0.)
    let non_poisson = PoissonStructure::custom(3, |x| {
        let mut l = nalgebra::DMatrix::zeros(3, 3);
        l[(0, 1)] = x[0];
        l[(1, 0)] = -x[0];
        l[(0, 2)] = x[0];
        l[(2, 0)] = -x[0];
        l[(1, 2)] = x[2];
        l[(2, 1)] = -x[2];
        l
    });
    let mut best: f64 = 0.0;
    for _ in 0..100 {
        let f = random_cubic(3, &mut rng);
        let g = random_cubic(3, &mut rng);
        let h = random_cubic(3, &mut rng);
        let x = random_point(3, &mut rng);
        best = best.max(jacobiator(&non_poisson, &f, &g, &h, &x).abs());
    }
    assert!(best > 1e-3, "negative control too quiet: {best:.3e}");

    println!(
        "PASS criterion 1: Poisson axioms on {} structures (antisymmetry < 1e-13, Leibniz < 1e-10, Jacobi < 1e-9) with a working negative control",
        structures.len()
    );
}

#[test]
fn criterion_2_cotangent_lift_momentum_algebra() {
    let mut rng = StdRng::seed_from_u64(202);
    let action = LieAlgebraAction::rotations_on_r3();
    let momenta = lifted_momentum_functions(&action);
    let structure = PoissonStructure::canonical(3);

    let mut points = Vec::with_capacity(100);
    while points.len() < 100 {
        let s = random_point(6, &mut rng);
        let x = Vec3::from_slice(&s[..3]);
        if x.norm() > 0.3 {
            points.push(s);
        }
    }

    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let (value, spread) =
                momentum_cocycle(&structure, action.algebra(), &momenta, i, j, &points).unwrap();
            worst = worst.max(value.abs() + spread);
            assert!(
                value.abs() < 1e-10,
                "bracket defect {value:.3e} at pair ({i},{j})"
            );
            assert!(spread < 1e-10, "spread {spread:.3e} at pair ({i},{j})");
        }
    }

    let momentum = |s: &[f64]| lift_momentum(&action, &s[..3], &s[3..]).unwrap();
    let mut worst_theta: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    for _ in 0..20 {
        let g = exp_so3(Vec3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        ));
        let phase_map = |s: &[f64]| {
            let x = g.mul_vec(Vec3::from_slice(&s[..3]));
            let p = g.mul_vec(Vec3::from_slice(&s[3..]));
            let mut out = x.to_array().to_vec();
            out.extend(p.to_array());
            out
        };
        let (theta, spread) = group_cocycle(phase_map, momentum, &g, &points).unwrap();
        worst_theta = worst_theta.max(theta.norm());
        worst_spread = worst_spread.max(spread);
    }
    assert!(worst_theta < 1e-10, "group defect {worst_theta:.3e}");
    assert!(worst_spread < 1e-10, "point spread {worst_spread:.3e}");

    println!(
        "PASS criterion 2: lifted momentum algebra closes (|{{J_X,J_Y}} - J_[X,Y]| max {worst:.2e} < 1e-10); group defect max {worst_theta:.2e}, spread max {worst_spread:.2e} < 1e-10 over 20 rotations"
    );
}

#[test]
fn criterion_3_noether_conservation() {
    // Central-force problem: 5 radial periods of the eccentric orbit.
    let traj = eccentric_orbit_trajectory(1e-4, 5.0, 1);
    let angular = |s: &[f64]| {
        cross(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..]))
            .to_array()
            .to_vec()
    };
    let drift_l = noether_drift(&traj, angular, None).unwrap();
    for (k, d) in drift_l.iter().enumerate() {
        assert!(*d < 1e-6, "angular momentum component {k} drift {d:.3e}");
    }
    let eps = |s: &[f64]| {
        geomech::systems::eccentricity_vector(
            Vec3::from_slice(&s[..3]),
            Vec3::from_slice(&s[3..]),
            1.0,
            1.0,
        )
        .unwrap()
        .to_array()
        .to_vec()
    };
    let drift_e = noether_drift(&traj, eps, None).unwrap();
    for (k, d) in drift_e.iter().enumerate() {
        assert!(*d < 1e-6, "eccentricity component {k} drift {d:.3e}");
    }

    // Spherical pendulum: vertical momentum over t in [0, 100].
    let e_g = Vec3::new(0.0, 0.0, -1.0);
    let sys = build_spherical_pendulum(PendulumParams {
        mass: 1.0,
        radius: 1.0,
        gravity: 1.0,
        e_g,
    })
    .unwrap();
    let x0 = Vec3::new(1.0f64.sin(), 0.0, -(1.0f64.cos()));
    let up = Vec3::new(0.0, 0.0, 1.0);
    let azimuthal = cross(up, x0).normalized();
    let meridional = cross(x0, azimuthal).normalized();
    let p0 = 0.8 * azimuthal + 0.3 * meridional;
    let state0 = [x0.x, x0.y, x0.z, p0.x, p0.y, p0.z];
    sys.validate_state(&state0).unwrap();
    let config = IntegratorConfig::new(Method::Rattle, 1e-3, 100.0);
    let pend = integrate(&sys.dynamics, &state0, &config, &[]).unwrap();
    let j1 =
        |s: &[f64]| vec![e_g.dot(cross(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..])))];
    let drift_j1 = noether_drift(&pend, j1, Some(&[0])).unwrap()[0];
    assert!(drift_j1 < 1e-8, "vertical momentum drift {drift_j1:.3e}");
    // The full momentum vector is not conserved in a nonzero field: the
    // horizontal components must visibly drift.
    let full = noether_drift(&pend, |s: &[f64]| {
        cross(Vec3::from_slice(&s[..3]), Vec3::from_slice(&s[3..]))
            .to_array()
            .to_vec()
    }, None)
    .unwrap();
    assert!(
        full[0] > 1e-3 || full[1] > 1e-3,
        "horizontal components should drift under gravity"
    );
    // Constraint residuals along the run.
    let mut worst_g: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    for s in pend.states() {
        let x = Vec3::from_slice(&s[..3]);
        let p = Vec3::from_slice(&s[3..]);
        worst_g = worst_g.max((x.norm_squared() - 1.0).abs());
        worst_h = worst_h.max(x.dot(p).abs());
    }
    assert!(worst_g < 1e-11 && worst_h < 1e-11, "constraints {worst_g:.3e}/{worst_h:.3e}");

    // Torque-free body: spatial momentum via reconstruction over t in [0, 50].
    let params = RigidBodyParams::diagonal(1.0, 2.0, 3.0, Vec3::ZERO, Vec3::ZERO).unwrap();
    let alg = LieAlgebra::so3();
    let inv = params.inertia_inv;
    let h_rotor = SmoothFunction::new(
        3,
        move |m: &[f64]| 0.5 * Vec3::from_slice(m).dot(inv.mul_vec(Vec3::from_slice(m))),
        move |m: &[f64]| inv.mul_vec(Vec3::from_slice(m)).to_array().to_vec(),
    );
    let dt = 1e-3;
    let steps = 50_000usize;
    let mut mu = vec![0.4, 0.3, 0.85];
    let mut body_traj = Trajectory::with_observables(&[]);
    body_traj.record(0.0, vec![mu[0], mu[1], mu[2], 0.0, 0.0, 0.0], &[]);
    for k in 1..=steps {
        mu = midpoint_lie_poisson_step(&alg, &h_rotor, &mu, dt, 1e-13, 50).unwrap();
        body_traj.record(k as f64 * dt, vec![mu[0], mu[1], mu[2], 0.0, 0.0, 0.0], &[]);
    }
    let drift_spatial = spatial_momentum_drift(&params, &body_traj).unwrap();
    assert!(
        drift_spatial < 1e-6,
        "spatial momentum drift {drift_spatial:.3e}"
    );

    println!(
        "PASS criterion 3: conservation along flows - angular momentum max {:.2e}, perihelion vector max {:.2e}, vertical pendulum momentum {:.2e}, spatial body momentum {:.2e}",
        drift_l.iter().fold(0.0f64, |a, &b| a.max(b)),
        drift_e.iter().fold(0.0f64, |a, &b| a.max(b)),
        drift_j1,
        drift_spatial
    );
}

#[test]
fn criterion_4_kepler_laws() {
    let traj = eccentric_orbit_trajectory(1e-4, 5.0, 1);
    let (mass, k) = (1.0, 1.0);

    // Second law: areal rate constant to 1e-7 relative.
    let (_series, areal_dev) = areal_velocity_series(&traj, mass).unwrap();
    let d = kepler_diagnostics(&traj, mass, k).unwrap();
    let areal_rel = areal_dev / d.omega;
    assert!(areal_rel < 1e-7, "areal deviation {areal_rel:.3e}");

    // First law: conic shape to 1e-6, fitted eccentricity against the
    // conserved vector.
    let fit = fit_conic(&traj).unwrap();
    assert!(
        fit.max_rel_residual < 1e-6,
        "conic residual {:.3e}",
        fit.max_rel_residual
    );
    assert!(
        (fit.eccentricity - d.eps).abs() < 1e-6,
        "fitted eccentricity {} vs conserved {}",
        fit.eccentricity,
        d.eps
    );

    // Third law: measured period against the measured half axis.
    let period = d.period.expect("bound orbit has a period");
    let a = d.a_semi.expect("bound orbit has a half axis");
    let third = (period * period * k / (4.0 * std::f64::consts::PI.powi(2) * a.powi(3)) - 1.0).abs();
    assert!(third < 1e-4, "third-law residual {third:.3e}");

    // Hodograph: circular momentum curve with the predicted radius, plus the
    // power identity linking energy, center distance and radius.
    let fit_res = d.hodograph_fit_residual / d.hodograph_radius;
    assert!(fit_res < 1e-7, "hodograph fit residual {fit_res:.3e}");
    let radius_formula = (d.hodograph_radius - mass * mass * k / d.omega).abs();
    assert!(radius_formula < 1e-6, "radius formula residual {radius_formula:.3e}");
    let c = d.hodograph_center.norm();
    let power = (2.0 * mass * d.energy - c * c + d.hodograph_radius * d.hodograph_radius).abs();
    assert!(power < 1e-8, "power identity residual {power:.3e}");

    // Eccentricity identity at the initial state.
    let identity = (d.eps * d.eps
        - 1.0
        - 2.0 * d.omega * d.omega * d.energy / (mass.powi(3) * k * k))
        .abs();
    assert!(identity < 1e-12, "eccentricity identity residual {identity:.3e}");

    println!(
        "PASS criterion 4: orbit laws - areal {areal_rel:.2e}, conic {:.2e}, period {third:.2e}, hodograph fit {fit_res:.2e}, radius {radius_formula:.2e}, power {power:.2e}, identity {identity:.2e}",
        fit.max_rel_residual
    );
}

#[test]
fn criterion_5_rigid_body_integrals() {
    let params = RigidBodyParams::diagonal(
        1.0,
        2.0,
        3.0,
        Vec3::new(0.0, 0.0, 0.1),
        Vec3::new(0.0, 0.0, -1.0),
    )
    .unwrap();
    let sys = geomech::systems::build_heavy_top(params.clone()).unwrap();
    let state0 = [0.3, 0.4, 0.5, 0.0, 0.0, -1.0];

    for method in [Method::Midpoint, Method::Rk4] {
        let config = IntegratorConfig::new(method, 1e-3, 50.0).with_stride(10);
        let traj = integrate(&sys.dynamics, &state0, &config, &[]).unwrap();
        let h0 = sys.hamiltonian.value(&state0);
        let ps0 = Vec3::from_slice(&state0[3..]).norm_squared();
        let pair0 = Vec3::from_slice(&state0[..3]).dot(Vec3::from_slice(&state0[3..]));
        let mut dh: f64 = 0.0;
        let mut dps: f64 = 0.0;
        let mut dpair: f64 = 0.0;
        for s in traj.states() {
            dh = dh.max((sys.hamiltonian.value(s) - h0).abs() / h0.abs());
            dps = dps.max((Vec3::from_slice(&s[3..]).norm_squared() - ps0).abs() / ps0.abs());
            dpair = dpair.max(
                (Vec3::from_slice(&s[..3]).dot(Vec3::from_slice(&s[3..])) - pair0).abs()
                    / pair0.abs(),
            );
        }
        assert!(dh < 1e-6, "{}: energy drift {dh:.3e}", method.name());
        assert!(dps < 1e-6, "{}: weight norm drift {dps:.3e}", method.name());
        assert!(dpair < 1e-6, "{}: pairing drift {dpair:.3e}", method.name());
    }

    // Free body: the squared momentum norm is a Casimir and the midpoint
    // scheme keeps it to solver accuracy over 10^5 steps.
    let alg = LieAlgebra::so3();
    let free = RigidBodyParams::diagonal(1.0, 2.0, 3.0, Vec3::ZERO, Vec3::ZERO).unwrap();
    let inv = free.inertia_inv;
    let h_rotor = SmoothFunction::new(
        3,
        move |m: &[f64]| 0.5 * Vec3::from_slice(m).dot(inv.mul_vec(Vec3::from_slice(m))),
        move |m: &[f64]| inv.mul_vec(Vec3::from_slice(m)).to_array().to_vec(),
    );
    let mut mu = vec![0.4, 0.3, 0.85];
    let c0: f64 = mu.iter().map(|v| v * v).sum();
    let e0 = h_rotor.value(&mu);
    let mut casimir_drift: f64 = 0.0;
    let mut energy_drift: f64 = 0.0;
    for _ in 0..100_000 {
        mu = midpoint_lie_poisson_step(&alg, &h_rotor, &mu, 1e-3, 1e-13, 50).unwrap();
        let c: f64 = mu.iter().map(|v| v * v).sum();
        casimir_drift = casimir_drift.max((c - c0).abs());
        energy_drift = energy_drift.max((h_rotor.value(&mu) - e0).abs());
    }
    assert!(casimir_drift < 1e-10, "Casimir drift {casimir_drift:.3e}");
    assert!(energy_drift < 1e-10, "rotor energy drift {energy_drift:.3e}");

    // The linear-structure Hamiltonian field is the momentum equation,
    // componentwise to near machine precision.
    let structure = PoissonStructure::lie_poisson(LieAlgebra::so3(), None);
    let mut rng = StdRng::seed_from_u64(505);
    let mut worst_field: f64 = 0.0;
    for _ in 0..50 {
        let m = random_point(3, &mut rng);
        let field = geomech::poisson::ham_vector_field(&structure, &h_rotor, &m);
        let (d_pi, _) = heavy_top_rhs(&free, Vec3::from_slice(&m), Vec3::ZERO);
        let expected = d_pi.to_array();
        for i in 0..3 {
            worst_field = worst_field.max((field[i] - expected[i]).abs());
        }
    }
    assert!(worst_field < 1e-14, "field mismatch {worst_field:.3e}");

    println!(
        "PASS criterion 5: heavy-top integrals < 1e-6 relative (midpoint and rk4), Casimir drift {casimir_drift:.2e} < 1e-10 over 1e5 steps, momentum equation matches the dual-space field to {worst_field:.2e}"
    );
}

#[test]
fn criterion_6_reduced_equation_residuals() {
    // Free rigid body.
    let params = RigidBodyParams::diagonal(1.0, 2.0, 3.0, Vec3::ZERO, Vec3::ZERO).unwrap();
    let body_problem = ep_rigid_body(&params);
    let alg = LieAlgebra::so3();
    let inv = params.inertia_inv;
    let h_rotor = SmoothFunction::new(
        3,
        move |m: &[f64]| 0.5 * Vec3::from_slice(m).dot(inv.mul_vec(Vec3::from_slice(m))),
        move |m: &[f64]| inv.mul_vec(Vec3::from_slice(m)).to_array().to_vec(),
    );
    let body_residuals = |dt: f64| -> (f64, f64) {
        let n = (5.0 / dt) as usize;
        let mut mu = vec![0.4, 0.3, 0.85];
        let mut omegas = Vec::with_capacity(n);
        let mut velocities = Vec::with_capacity(n);
        for _ in 0..n {
            let om = params.omega_of(Vec3::from_slice(&mu));
            omegas.push(om);
            velocities.push(om.to_array().to_vec());
            mu = midpoint_lie_poisson_step(&alg, &h_rotor, &mu, dt, 1e-13, 50).unwrap();
        }
        let gamma: Vec<Vec<f64>> = reconstruct(Matrix3::IDENTITY, &omegas, dt)
            .iter()
            .map(|r| r.m.iter().flatten().copied().collect())
            .collect();
        (
            compatibility_residual(&body_problem.action, &gamma, &velocities, dt).unwrap(),
            body_problem.residual(&gamma, &velocities, dt).unwrap(),
        )
    };

    // Spherical pendulum.
    let e_g = Vec3::new(0.0, 0.0, -1.0);
    let pend_sys = build_spherical_pendulum(PendulumParams {
        mass: 1.0,
        radius: 1.0,
        gravity: 1.0,
        e_g,
    })
    .unwrap();
    let pend_problem = ep_spherical_pendulum(1.0, 1.0, e_g.scale(1.0));
    let x0 = Vec3::new(1.0f64.sin(), 0.0, -(1.0f64.cos()));
    let up = Vec3::new(0.0, 0.0, 1.0);
    let azimuthal = cross(up, x0).normalized();
    let meridional = cross(x0, azimuthal).normalized();
    let p0 = 0.8 * azimuthal + 0.3 * meridional;
    let pend_state = [x0.x, x0.y, x0.z, p0.x, p0.y, p0.z];
    let pend_residuals = |dt: f64| -> (f64, f64) {
        let config = IntegratorConfig::new(Method::Rattle, dt, 5.0);
        let traj = integrate(&pend_sys.dynamics, &pend_state, &config, &[]).unwrap();
        let gamma: Vec<Vec<f64>> = traj.states().iter().map(|s| s[..3].to_vec()).collect();
        let velocities: Vec<Vec<f64>> = traj
            .states()
            .iter()
            .map(|s| {
                pendulum_gauge_velocity(
                    Vec3::from_slice(&s[..3]),
                    Vec3::from_slice(&s[3..]),
                    1.0,
                    1.0,
                )
                .to_array()
                .to_vec()
            })
            .collect();
        (
            compatibility_residual(&pend_problem.action, &gamma, &velocities, dt).unwrap(),
            pend_problem.residual(&gamma, &velocities, dt).unwrap(),
        )
    };

    // Central-force problem with the rotation-dilation action in the
    // minimal-norm gauge.
    let kepler_sys = build_kepler(KeplerParams { mass: 1.0, k: 1.0 }).unwrap();
    let kepler_problem = ep_central_force(1.0, 1.0);
    // RK4 here: the leapfrog positions satisfy the discrete compatibility
    // identity exactly, which leaves nothing but roundoff to measure.
    let kepler_residuals = |dt: f64| -> (f64, f64) {
        let config = IntegratorConfig::new(Method::Rk4, dt, 5.0);
        let traj = integrate(
            &kepler_sys.dynamics,
            &[1.0, 0.0, 0.0, 0.0, 1.2, 0.0],
            &config,
            &[],
        )
        .unwrap();
        let gamma: Vec<Vec<f64>> = traj.states().iter().map(|s| s[..3].to_vec()).collect();
        let velocities: Vec<Vec<f64>> = traj
            .states()
            .iter()
            .map(|s| {
                central_force_gauge_velocity(
                    Vec3::from_slice(&s[..3]),
                    Vec3::from_slice(&s[3..]),
                    1.0,
                )
            })
            .collect();
        (
            compatibility_residual(&kepler_problem.action, &gamma, &velocities, dt).unwrap(),
            kepler_problem.residual(&gamma, &velocities, dt).unwrap(),
        )
    };

    type ResidualFn<'a> = Box<dyn Fn(f64) -> (f64, f64) + 'a>;
    let systems: Vec<(&str, ResidualFn)> = vec![
        ("free rigid body", Box::new(body_residuals)),
        ("spherical pendulum", Box::new(pend_residuals)),
        ("central force", Box::new(kepler_residuals)),
    ];

    for (label, residuals) in &systems {
        let (c1, r1) = residuals(1e-3);
        assert!(c1 < 1e-5, "{label}: compatibility residual {c1:.3e}");
        assert!(r1 < 1e-5, "{label}: momentum-equation residual {r1:.3e}");
        let (c2, r2) = residuals(5e-4);
        let (c3, r3) = residuals(2.5e-4);
        let order_c = ((c1 / c2).log2() + (c2 / c3).log2()) / 2.0;
        let order_r = ((r1 / r2).log2() + (r2 / r3).log2()) / 2.0;
        assert!(
            (order_c - 2.0).abs() < 0.3,
            "{label}: compatibility order {order_c:.2}"
        );
        assert!(
            (order_r - 2.0).abs() < 0.3,
            "{label}: momentum-equation order {order_r:.2}"
        );
        println!(
            "  {label}: compatibility {c1:.2e} (order {order_c:.2}), momentum equation {r1:.2e} (order {order_r:.2})"
        );
    }

    println!(
        "PASS criterion 6: reduced-equation residuals < 1e-5 at dt = 1e-3 with second-order decay on all three systems"
    );
}

#[test]
fn criterion_7_reduction_consistency() {
    // Reduced central-force flow against the projection of the full flow
    // over one radial period.
    let sys = build_kepler(KeplerParams { mass: 1.0, k: 1.0 }).unwrap();
    let dt = 1e-4;
    let t_end = eccentric_period();
    let config = IntegratorConfig::new(Method::Rk4, dt, t_end).with_stride(10);
    let full = integrate(
        &sys.dynamics,
        &[1.0, 0.0, 0.0, 0.0, 1.2, 0.0],
        &config,
        &[],
    )
    .unwrap();
    let (r0, l0, omega) = kepler_reduce(
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.2, 0.0),
    )
    .unwrap();
    let reduced_field = Arc::new(move |s: &[f64]| {
        let (dr, dl) = reduced_kepler_rhs(1.0, 1.0, omega, s[0], s[1]).unwrap();
        vec![dr, dl]
    });
    let reduced_dyn = SystemDynamics::FirstOrder {
        field: reduced_field,
    };
    let reduced = integrate(&reduced_dyn, &[r0, l0], &config, &[]).unwrap();
    assert_eq!(full.len(), reduced.len());
    let mut worst: f64 = 0.0;
    for (fs, rs) in full.states().iter().zip(reduced.states()) {
        let (r, l, _) = kepler_reduce(Vec3::from_slice(&fs[..3]), Vec3::from_slice(&fs[3..]))
            .unwrap();
        worst = worst.max((r - rs[0]).abs()).max((l - rs[1]).abs());
    }
    assert!(worst < 1e-6, "reduced-flow mismatch {worst:.3e}");

    // The reduced pendulum orbit is closed: the invariant observables return
    // to their start on a nonzero vertical-momentum level set.
    let e_g = Vec3::new(0.0, 0.0, -1.0);
    let pend_sys = build_spherical_pendulum(PendulumParams {
        mass: 1.0,
        radius: 1.0,
        gravity: 1.0,
        e_g,
    })
    .unwrap();
    let x0 = Vec3::new(1.0f64.sin(), 0.0, -(1.0f64.cos()));
    let up = Vec3::new(0.0, 0.0, 1.0);
    let azimuthal = cross(up, x0).normalized();
    let meridional = cross(x0, azimuthal).normalized();
    let p0 = 0.8 * azimuthal + 0.3 * meridional;
    let state0 = [x0.x, x0.y, x0.z, p0.x, p0.y, p0.z];
    let j1_0 = e_g.dot(cross(x0, p0));
    assert!(j1_0.abs() > 1e-3, "need a nonzero vertical momentum level");
    let config = IntegratorConfig::new(Method::Rattle, 1e-3, 30.0);
    let traj = integrate(&pend_sys.dynamics, &state0, &config, &[]).unwrap();
    let u0 = e_g.dot(x0);
    let w0 = e_g.dot(p0);
    let dist2: Vec<f64> = traj
        .states()
        .iter()
        .map(|s| {
            let u = e_g.dot(Vec3::from_slice(&s[..3]));
            let w = e_g.dot(Vec3::from_slice(&s[3..]));
            (u - u0) * (u - u0) + (w - w0) * (w - w0)
        })
        .collect();
    // Global minimum after a startup window, with parabolic refinement.
    let start = (1.0 / 1e-3) as usize;
    let mut best_idx = start;
    for i in start..dist2.len() {
        if dist2[i] < dist2[best_idx] {
            best_idx = i;
        }
    }
    let mut best = dist2[best_idx];
    if best_idx > 0 && best_idx + 1 < dist2.len() {
        let (dm, d0, dp) = (dist2[best_idx - 1], dist2[best_idx], dist2[best_idx + 1]);
        let denom = dm - 2.0 * d0 + dp;
        if denom > 0.0 {
            let s = 0.5 * (dm - dp) / denom;
            best = d0 - 0.25 * (dm - dp) * s;
        }
    }
    let return_dist = best.max(0.0).sqrt();
    assert!(return_dist < 1e-4, "reduced orbit return distance {return_dist:.3e}");

    println!(
        "PASS criterion 7: reduced central-force flow matches the projected full flow to {worst:.2e}; reduced pendulum orbit closes to {return_dist:.2e}"
    );
}

#[test]
fn criterion_8_integrator_orders() {
    // Circular orbit of the central-force problem at unit parameters.
    let exact = |t: f64| -> Vec<f64> { vec![t.cos(), t.sin(), 0.0, -t.sin(), t.cos(), 0.0] };
    let t_end = 1.0f64;
    let dts = [0.04, 0.02, 0.01, 0.005];

    let sys = build_kepler(KeplerParams { mass: 1.0, k: 1.0 }).unwrap();
    let grad_v = Arc::new(|q: &[f64]| {
        let x = Vec3::from_slice(q);
        let r = x.norm();
        x.scale(1.0 / (r * r * r)).to_array().to_vec()
    });
    let constrained = SystemDynamics::Constrained {
        mass: 1.0,
        grad_v,
        constraint: geomech::integrators::ConstraintSpec::sphere(1.0),
    };

    let final_error = |method: Method, dt: f64| -> f64 {
        let dynamics = match method {
            Method::Rattle => &constrained,
            _ => &sys.dynamics,
        };
        let config = IntegratorConfig::new(method, dt, t_end)
            .with_stride(1_000_000);
        let traj = integrate(dynamics, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], &config, &[]).unwrap();
        let s = traj.states().last().unwrap();
        let t = *traj.times().last().unwrap();
        let reference = exact(t);
        s.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    for (method, nominal) in [
        (Method::Rk4, 4.0),
        (Method::Verlet, 2.0),
        (Method::Rattle, 2.0),
        (Method::Midpoint, 2.0),
    ] {
        let errors: Vec<f64> = dts.iter().map(|&dt| final_error(method, dt)).collect();
        let mut slopes = Vec::new();
        for w in errors.windows(2) {
            slopes.push((w[0] / w[1]).log2());
        }
        let slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
        assert!(
            (slope - nominal).abs() < 0.3,
            "{}: measured order {slope:.2}, expected {nominal} (errors {errors:?})",
            method.name()
        );
        println!("  {}: global order {slope:.2} (nominal {nominal})", method.name());
    }

    println!("PASS criterion 8: global-error orders match 4 / 2 / 2 / 2 within 0.3");
}
