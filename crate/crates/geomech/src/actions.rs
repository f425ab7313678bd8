//! Lie algebra actions on configuration spaces and their lifted momentum maps.
//!
//! An action is stored as its fundamental vector fields in coordinates. The
//! momentum map of the cotangent lift pairs a covector with those fields,
//! `J_k(x, p) = ⟨p, φ(e_k)(x)⟩`; its components are Hamiltonians of the lifted
//! fields. Two defect measures quantify how far a momentum map is from being
//! a homomorphism: the algebra-level defect `{J_X, J_Y} − J_[X,Y]` (constant
//! on a connected symplectic phase space) and the group-level defect
//! `J∘Φ_g − Ad*_{g⁻¹}∘J`. Both vanish for cotangent lifts, which the wired
//! rotation, rotation-and-scaling, and translation actions exercise.
//!
//! Sign convention: a rotation action on the left has fundamental fields
//! `x ↦ X × x`, which close under the opposite bracket `[X, Y] = −X × Y`;
//! the wired actions therefore carry [`LieAlgebra::so3_opposite`]. With this
//! choice the defect `{J_X, J_Y} − J_[X,Y]` is the one that vanishes, and the
//! alternative sign convention is deliberately not implemented.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::GeomechError;
use crate::integrators::Trajectory;
use crate::poisson::{poisson_bracket, LieAlgebra, PoissonStructure, SmoothFunction};
use crate::so3::{cross, hat, Matrix3, Vec3};

/// Coordinates of a momentum value in the dual basis of the acting algebra.
pub type MomentumValue = Vec<f64>;

/// A Lie algebra action given by its fundamental vector fields in
/// coordinates on the configuration space.
#[derive(Clone)]
pub struct LieAlgebraAction {
    algebra: LieAlgebra,
    config_dim: usize,
    /// `φ(e_k)(x)` for the k-th basis element.
    field: Arc<dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync>,
    /// `∂φ(e_k)/∂x` as a `config_dim × config_dim` matrix; analytic for all
    /// wired actions, differences otherwise.
    field_jacobian: Option<Arc<dyn Fn(usize, &[f64]) -> DMatrix<f64> + Send + Sync>>,
}

impl LieAlgebraAction {
    pub fn new(
        algebra: LieAlgebra,
        config_dim: usize,
        field: impl Fn(usize, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        LieAlgebraAction {
            algebra,
            config_dim,
            field: Arc::new(field),
            field_jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(usize, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.field_jacobian = Some(Arc::new(jac));
        self
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn config_dim(&self) -> usize {
        self.config_dim
    }

    /// Fundamental field of the k-th basis element at `x`.
    pub fn basis_field(&self, k: usize, x: &[f64]) -> Vec<f64> {
        assert!(k < self.algebra.dim(), "basis index out of range");
        assert_eq!(x.len(), self.config_dim, "configuration dimension");
        (self.field)(k, x)
    }

    /// Fundamental field of an arbitrary algebra element (by linearity).
    pub fn apply(&self, coeffs: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.algebra.dim(), "algebra dimension");
        let mut out = vec![0.0; self.config_dim];
        for (k, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.basis_field(k, x)) {
                *o += c * v;
            }
        }
        out
    }

    /// Jacobian of the k-th fundamental field, analytic when wired, central
    /// differences (step 1e-6) otherwise.
    pub fn basis_field_jacobian(&self, k: usize, x: &[f64]) -> DMatrix<f64> {
        if let Some(ref j) = self.field_jacobian {
            return j(k, x);
        }
        let n = self.config_dim;
        let h = 1e-6;
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for col in 0..n {
            xp[col] = x[col] + h;
            let fp = (self.field)(k, &xp);
            xp[col] = x[col] - h;
            let fm = (self.field)(k, &xp);
            xp[col] = x[col];
            for row in 0..n {
                jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        jac
    }

    /// Rotations acting on 3-space, `φ(X)(x) = X × x`.
    pub fn rotations_on_r3() -> Self {
        LieAlgebraAction::new(LieAlgebra::so3_opposite(), 3, |k, x| {
            cross(Vec3::basis(k), Vec3::from_slice(x)).to_array().to_vec()
        })
        .with_jacobian(|k, _x| {
            let h = hat(Vec3::basis(k));
            DMatrix::from_fn(3, 3, |i, j| h.m[i][j])
        })
    }

    /// Rotations and dilations acting on punctured 3-space,
    /// `φ(X, s)(x) = X × x + s·x` (basis `e1, e2, e3, s`).
    pub fn rotations_scalings_on_r3() -> Self {
        LieAlgebraAction::new(LieAlgebra::so3_opposite_plus_r(), 3, |k, x| {
            if k < 3 {
                cross(Vec3::basis(k), Vec3::from_slice(x)).to_array().to_vec()
            } else {
                x.to_vec()
            }
        })
        .with_jacobian(|k, _x| {
            if k < 3 {
                let h = hat(Vec3::basis(k));
                DMatrix::from_fn(3, 3, |i, j| h.m[i][j])
            } else {
                DMatrix::identity(3, 3)
            }
        })
    }

    /// Translations acting on n-space, `φ(v)(x) = v`.
    pub fn translations(n: usize) -> Self {
        LieAlgebraAction::new(LieAlgebra::abelian(n), n, move |k, _x| {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            v
        })
        .with_jacobian(move |_k, _x| DMatrix::zeros(n, n))
    }

    /// Rotations acting on themselves on the right; configuration points are
    /// row-major 3×3 rotation matrices flattened to 9 coordinates, and
    /// `φ(X)(x) = x·hat(X)`.
    pub fn rotations_on_rotation_group() -> Self {
        LieAlgebraAction::new(LieAlgebra::so3(), 9, |k, x| {
            let m = Matrix3::new([
                [x[0], x[1], x[2]],
                [x[3], x[4], x[5]],
                [x[6], x[7], x[8]],
            ]);
            let out = m.mul_mat(&hat(Vec3::basis(k)));
            out.m.iter().flatten().copied().collect()
        })
    }

    /// Max deviation from linearity in the algebra slot over sample data.
    pub fn linearity_defect(&self, samples: &[(Vec<f64>, Vec<f64>, Vec<f64>)]) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b, x) in samples {
            let sum: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + v).collect();
            let lhs = self.apply(&sum, x);
            let ra = self.apply(a, x);
            let rb = self.apply(b, x);
            for i in 0..self.config_dim {
                worst = worst.max((lhs[i] - ra[i] - rb[i]).abs());
            }
        }
        worst
    }

    /// Max defect of the homomorphism property `φ([X,Y]) = [φ(X), φ(Y)]`
    /// over basis pairs at the given points, using field Jacobians for the
    /// vector-field bracket.
    pub fn homomorphism_defect(&self, points: &[Vec<f64>]) -> f64 {
        let dim = self.algebra.dim();
        let mut worst: f64 = 0.0;
        for x in points {
            for i in 0..dim {
                for j in 0..dim {
                    let mut basis_i = vec![0.0; dim];
                    basis_i[i] = 1.0;
                    let mut basis_j = vec![0.0; dim];
                    basis_j[j] = 1.0;
                    let bracket = self.algebra.bracket(&basis_i, &basis_j).unwrap();
                    let lhs = self.apply(&bracket, x);

                    let fi = DVector::from_vec(self.basis_field(i, x));
                    let fj = DVector::from_vec(self.basis_field(j, x));
                    let ji = self.basis_field_jacobian(i, x);
                    let jj = self.basis_field_jacobian(j, x);
                    // [u, v] = Dv·u − Du·v for vector fields in coordinates.
                    let rhs = &jj * &fi - &ji * &fj;
                    for r in 0..self.config_dim {
                        worst = worst.max((lhs[r] - rhs[r]).abs());
                    }
                }
            }
        }
        worst
    }
}

impl std::fmt::Debug for LieAlgebraAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LieAlgebraAction")
            .field("algebra_dim", &self.algebra.dim())
            .field("config_dim", &self.config_dim)
            .finish()
    }
}

/// Momentum of the cotangent-lifted action: component k is `⟨p, φ(e_k)(x)⟩`.
pub fn lift_momentum(
    action: &LieAlgebraAction,
    x: &[f64],
    p: &[f64],
) -> Result<MomentumValue, GeomechError> {
    if x.len() != action.config_dim() {
        return Err(GeomechError::DimensionMismatch {
            what: "configuration point",
            expected: action.config_dim(),
            got: x.len(),
        });
    }
    if p.len() != action.config_dim() {
        return Err(GeomechError::DimensionMismatch {
            what: "momentum covector",
            expected: action.config_dim(),
            got: p.len(),
        });
    }
    Ok((0..action.algebra().dim())
        .map(|k| {
            action
                .basis_field(k, x)
                .iter()
                .zip(p)
                .map(|(v, pi)| v * pi)
                .sum()
        })
        .collect())
}

/// The lifted momentum components as smooth functions on the phase space
/// `[x | p]`, with analytic gradients
/// `(∂J_k/∂x, ∂J_k/∂p) = ((Dφ_k)ᵀ p, φ_k(x))`.
pub fn lifted_momentum_functions(action: &LieAlgebraAction) -> Vec<SmoothFunction> {
    let n = action.config_dim();
    (0..action.algebra().dim())
        .map(|k| {
            let a_val = action.clone();
            let a_grad = action.clone();
            SmoothFunction::new(
                2 * n,
                move |state: &[f64]| {
                    let (x, p) = state.split_at(n);
                    a_val
                        .basis_field(k, x)
                        .iter()
                        .zip(p)
                        .map(|(v, pi)| v * pi)
                        .sum()
                },
                move |state: &[f64]| {
                    let (x, p) = state.split_at(n);
                    let jac = a_grad.basis_field_jacobian(k, x);
                    let pv = DVector::from_column_slice(p);
                    let gx = jac.transpose() * pv;
                    let mut g = Vec::with_capacity(2 * n);
                    g.extend(gx.iter().copied());
                    g.extend(a_grad.basis_field(k, x));
                    g
                },
            )
        })
        .collect()
}

/// Algebra-level defect of a momentum map on a phase-space structure:
/// mean over the points of `{J_i, J_j} − J_[e_i, e_j]` together with the max
/// deviation from that mean. On a connected symplectic phase space the
/// deviation must vanish (the defect is a Casimir there).
pub fn momentum_cocycle(
    structure: &PoissonStructure,
    alg: &LieAlgebra,
    momenta: &[SmoothFunction],
    i: usize,
    j: usize,
    points: &[Vec<f64>],
) -> Result<(f64, f64), GeomechError> {
    if points.is_empty() {
        return Err(GeomechError::InsufficientSamples(
            "momentum cocycle needs at least one point".into(),
        ));
    }
    if momenta.len() != alg.dim() {
        return Err(GeomechError::DimensionMismatch {
            what: "momentum components",
            expected: alg.dim(),
            got: momenta.len(),
        });
    }
    let mut basis_i = vec![0.0; alg.dim()];
    basis_i[i] = 1.0;
    let mut basis_j = vec![0.0; alg.dim()];
    basis_j[j] = 1.0;
    let bracket = alg.bracket(&basis_i, &basis_j)?;

    let mut values = Vec::with_capacity(points.len());
    for pt in points {
        let pb = poisson_bracket(structure, &momenta[i], &momenta[j], pt)?;
        let jb: f64 = bracket
            .iter()
            .zip(momenta)
            .map(|(c, jf)| c * jf.value(pt))
            .sum();
        values.push(pb - jb);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values
        .iter()
        .map(|v| (v - mean).abs())
        .fold(0.0f64, f64::max);
    Ok((mean, spread))
}

/// Per-component max drift `|J_k(t) − J_k(0)|` of a momentum map along a
/// recorded trajectory. `invariance_subset` restricts to the listed
/// components (those whose symmetry actually leaves the Hamiltonian
/// invariant); all components are monitored when absent.
pub fn noether_drift(
    traj: &Trajectory,
    momentum: impl Fn(&[f64]) -> MomentumValue,
    invariance_subset: Option<&[usize]>,
) -> Result<Vec<f64>, GeomechError> {
    if traj.is_empty() {
        return Err(GeomechError::EmptyTrajectory);
    }
    let j0 = momentum(traj.state(0));
    let indices: Vec<usize> = match invariance_subset {
        Some(s) => s.to_vec(),
        None => (0..j0.len()).collect(),
    };
    let mut drift = vec![0.0f64; indices.len()];
    for state in traj.states() {
        let jt = momentum(state);
        for (slot, &k) in indices.iter().enumerate() {
            drift[slot] = drift[slot].max((jt[k] - j0[k]).abs());
        }
    }
    Ok(drift)
}

/// Group-level defect of a rotation-equivariant momentum map:
/// mean over the points of `J(Φ_g(z)) − g·J(z)` and the max point spread.
/// For the rotation group the coadjoint action of `g⁻¹` on the dual is the
/// rotation `g` itself under the vector identification.
pub fn group_cocycle(
    phase_map: impl Fn(&[f64]) -> Vec<f64>,
    momentum: impl Fn(&[f64]) -> MomentumValue,
    g: &Matrix3,
    points: &[Vec<f64>],
) -> Result<(Vec3, f64), GeomechError> {
    if points.is_empty() {
        return Err(GeomechError::InsufficientSamples(
            "group cocycle needs at least one point".into(),
        ));
    }
    let mut values: Vec<Vec3> = Vec::with_capacity(points.len());
    for pt in points {
        let moved = phase_map(pt);
        let j_moved = momentum(&moved);
        let j_here = momentum(pt);
        if j_moved.len() != 3 || j_here.len() != 3 {
            return Err(GeomechError::DimensionMismatch {
                what: "rotation momentum",
                expected: 3,
                got: j_moved.len(),
            });
        }
        let rotated = g.mul_vec(Vec3::from_slice(&j_here));
        values.push(Vec3::from_slice(&j_moved) - rotated);
    }
    let n = values.len() as f64;
    let mean = values
        .iter()
        .fold(Vec3::ZERO, |acc, v| acc + *v)
        .scale(1.0 / n);
    let spread = values
        .iter()
        .map(|v| (*v - mean).norm())
        .fold(0.0f64, f64::max);
    Ok((mean, spread))
}

/// Orthonormal basis of the kernel of the momentum Jacobian at a phase point,
/// with the Jacobian taken by central differences (step 1e-6) and the kernel
/// cut at singular values below `1e-8 · σ_max`.
pub fn momentum_kernel_basis(
    momentum: impl Fn(&[f64]) -> MomentumValue,
    point: &[f64],
) -> Vec<Vec<f64>> {
    let n = point.len();
    let m = momentum(point).len();
    let h = 1e-6;
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = point.to_vec();
    for col in 0..n {
        xp[col] = point[col] + h;
        let fp = momentum(&xp);
        xp[col] = point[col] - h;
        let fm = momentum(&xp);
        xp[col] = point[col];
        for row in 0..m {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    // Row space from the SVD of the Jacobian; the kernel is the orthogonal
    // complement, read off as the near-unit eigenspace of the complementary
    // projector (its eigenvalues are cleanly 0 or 1, so no precision is lost
    // to squaring).
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = 1e-8 * sigma_max.max(1e-300);
    let mut projector = DMatrix::<f64>::identity(n, n);
    for (idx, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma > cut {
            let row = v_t.row(idx);
            for a in 0..n {
                for b in 0..n {
                    projector[(a, b)] -= row[a] * row[b];
                }
            }
        }
    }
    let eig = projector.symmetric_eigen();
    let mut kernel = Vec::new();
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.5 {
            kernel.push(eig.eigenvectors.column(idx).iter().copied().collect());
        }
    }
    kernel
}

/// Canonical symplectic pairing of two phase-space tangent vectors in
/// `[dq | dp]` layout: `ω(u, w) = Σ_i (u_p_i w_q_i − u_q_i w_p_i)`.
pub fn canonical_symplectic_pairing(u: &[f64], w: &[f64]) -> f64 {
    assert_eq!(u.len(), w.len());
    assert_eq!(u.len() % 2, 0, "phase dimension must be even");
    let n = u.len() / 2;
    (0..n).map(|i| u[n + i] * w[i] - u[i] * w[n + i]).sum()
}
