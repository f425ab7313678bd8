//! Poisson structures as point-dependent antisymmetric matrices.
//!
//! A structure on an n-dimensional space is the matrix field
//! `L_ij(x) = {x^i, x^j}(x)`; the bracket of two functions is
//! `{f, g}(x) = Σ_ij ∂_i f · L_ij(x) · ∂_j g` and the Hamiltonian vector
//! field of `H` is `(X_H)^j = Σ_i ∂_i H · L_ij`. Constant Darboux blocks,
//! linear structures on duals of Lie algebras (optionally shifted by a
//! symplectic cocycle), and arbitrary user matrices are supported. The
//! Jacobi identity is testable numerically through the cyclic bracket sum,
//! which vanishes exactly when the matrix field is Poisson.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::GeomechError;

/// A finite-dimensional Lie algebra given by structure constants.
///
/// `c[i][j][k]` is the coefficient of the k-th basis vector in the bracket
/// of the i-th and j-th basis vectors.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    dim: usize,
    constants: Vec<f64>,
    basis_names: Vec<String>,
}

impl LieAlgebra {
    /// Builds an algebra and checks antisymmetry and the Jacobi identity of
    /// the structure constants to `1e-12`.
    pub fn new(
        dim: usize,
        constants: Vec<f64>,
        basis_names: Vec<String>,
    ) -> Result<Self, GeomechError> {
        if constants.len() != dim * dim * dim {
            return Err(GeomechError::DimensionMismatch {
                what: "structure constants",
                expected: dim * dim * dim,
                got: constants.len(),
            });
        }
        if basis_names.len() != dim {
            return Err(GeomechError::DimensionMismatch {
                what: "basis names",
                expected: dim,
                got: basis_names.len(),
            });
        }
        let alg = LieAlgebra {
            dim,
            constants,
            basis_names,
        };
        let anti = alg.antisymmetry_defect();
        if anti > 1e-12 {
            return Err(GeomechError::InvalidParameter {
                name: "structure_constants",
                reason: format!("antisymmetry defect {anti:.3e} exceeds 1e-12"),
            });
        }
        let jac = alg.jacobi_defect();
        if jac > 1e-12 {
            return Err(GeomechError::InvalidParameter {
                name: "structure_constants",
                reason: format!("Jacobi defect {jac:.3e} exceeds 1e-12"),
            });
        }
        Ok(alg)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis_names(&self) -> &[String] {
        &self.basis_names
    }

    /// Structure constant `c^k_{ij}`.
    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.constants[(i * self.dim + j) * self.dim + k]
    }

    fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    worst = worst.max((self.c(i, j, k) + self.c(j, i, k)).abs());
                }
            }
        }
        worst
    }

    fn jacobi_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut sum = 0.0;
                        for m in 0..n {
                            sum += self.c(i, j, m) * self.c(m, k, l)
                                + self.c(j, k, m) * self.c(m, i, l)
                                + self.c(k, i, m) * self.c(m, j, l);
                        }
                        worst = worst.max(sum.abs());
                    }
                }
            }
        }
        worst
    }

    /// The rotation algebra: `[e_i, e_j] = Σ_k ε_ijk e_k` (cross product).
    pub fn so3() -> Self {
        let mut c = vec![0.0; 27];
        let eps = |i: usize, j: usize, k: usize| -> f64 {
            match (i, j, k) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                _ => 0.0,
            }
        };
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    c[(i * 3 + j) * 3 + k] = eps(i, j, k);
                }
            }
        }
        LieAlgebra::new(3, c, vec!["e1".into(), "e2".into(), "e3".into()]).unwrap()
    }

    /// The rotation algebra with the opposite bracket, `[X, Y] = −X × Y`.
    ///
    /// This is the convention under which the fundamental vector fields of a
    /// left rotation action form a Lie algebra homomorphism; actions built on
    /// the left use it so the lifted momentum components close under the
    /// Poisson bracket without a sign defect.
    pub fn so3_opposite() -> Self {
        let base = Self::so3();
        let c = base.constants.iter().map(|v| -v).collect();
        LieAlgebra::new(3, c, base.basis_names).unwrap()
    }

    /// The Euclidean algebra in three dimensions, rotations acting on
    /// translations: basis `(J1, J2, J3, P1, P2, P3)` with
    /// `[J_i, J_j] = ε_ijk J_k`, `[J_i, P_j] = ε_ijk P_k`, `[P_i, P_j] = 0`.
    pub fn se3() -> Self {
        let so3 = Self::so3();
        let n = 6;
        let mut c = vec![0.0; n * n * n];
        let mut set = |i: usize, j: usize, k: usize, v: f64| {
            c[(i * n + j) * n + k] = v;
        };
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let e = so3.c(i, j, k);
                    if e != 0.0 {
                        set(i, j, k, e); // [J, J] = J
                        set(i, 3 + j, 3 + k, e); // [J, P] = P
                        set(3 + j, i, 3 + k, -e);
                    }
                }
            }
        }
        LieAlgebra::new(
            n,
            c,
            vec![
                "J1".into(),
                "J2".into(),
                "J3".into(),
                "P1".into(),
                "P2".into(),
                "P3".into(),
            ],
        )
        .unwrap()
    }

    /// Abelian algebra of the given dimension (all brackets vanish).
    pub fn abelian(dim: usize) -> Self {
        let names = (0..dim).map(|i| format!("e{}", i + 1)).collect();
        LieAlgebra::new(dim, vec![0.0; dim * dim * dim], names).unwrap()
    }

    /// Direct sum of the opposite rotation algebra with a one-dimensional
    /// centre: the algebra of rotations and dilations acting on punctured
    /// 3-space (basis `e1, e2, e3, s`).
    pub fn so3_opposite_plus_r() -> Self {
        let so3op = Self::so3_opposite();
        let n = 4;
        let mut c = vec![0.0; n * n * n];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    c[(i * n + j) * n + k] = so3op.c(i, j, k);
                }
            }
        }
        LieAlgebra::new(
            n,
            c,
            vec!["e1".into(), "e2".into(), "e3".into(), "s".into()],
        )
        .unwrap()
    }

    /// Bracket of coordinate vectors: `([X, Y])_k = Σ_ij c^k_ij X_i Y_j`.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, GeomechError> {
        if x.len() != self.dim {
            return Err(GeomechError::DimensionMismatch {
                what: "bracket left argument",
                expected: self.dim,
                got: x.len(),
            });
        }
        if y.len() != self.dim {
            return Err(GeomechError::DimensionMismatch {
                what: "bracket right argument",
                expected: self.dim,
                got: y.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..self.dim {
                if y[j] == 0.0 {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += self.c(i, j, k) * x[i] * y[j];
                }
            }
        }
        Ok(out)
    }

    /// Coadjoint action on the dual: `⟨ad*_X ξ, Y⟩ = ⟨ξ, [X, Y]⟩`, i.e.
    /// `(ad*_X ξ)_j = Σ_ik c^k_ij X_i ξ_k`.
    pub fn coadjoint(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "coadjoint: algebra element dimension");
        assert_eq!(xi.len(), self.dim, "coadjoint: dual element dimension");
        let mut out = vec![0.0; self.dim];
        for (j, o) in out.iter_mut().enumerate() {
            for i in 0..self.dim {
                if x[i] == 0.0 {
                    continue;
                }
                for k in 0..self.dim {
                    *o += self.c(i, j, k) * x[i] * xi[k];
                }
            }
        }
        out
    }
}

/// Structure constants bracket as a free function (see [`LieAlgebra::bracket`]).
pub fn structure_bracket(
    alg: &LieAlgebra,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>, GeomechError> {
    alg.bracket(x, y)
}

/// An antisymmetric bilinear form on a Lie algebra satisfying the cocycle
/// identity; used to shift the linear structure on the dual.
#[derive(Debug, Clone)]
pub struct CocycleForm {
    dim: usize,
    theta: DMatrix<f64>,
}

impl CocycleForm {
    /// Builds the form from a row-major `dim × dim` matrix, checking
    /// antisymmetry and the cocycle identity against the algebra.
    pub fn new(alg: &LieAlgebra, entries: Vec<f64>) -> Result<Self, GeomechError> {
        let dim = alg.dim();
        if entries.len() != dim * dim {
            return Err(GeomechError::DimensionMismatch {
                what: "cocycle matrix",
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let theta = DMatrix::from_row_slice(dim, dim, &entries);
        let mut anti: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                anti = anti.max((theta[(i, j)] + theta[(j, i)]).abs());
            }
        }
        if anti > 1e-12 {
            return Err(GeomechError::InvalidParameter {
                name: "cocycle",
                reason: format!("antisymmetry defect {anti:.3e} exceeds 1e-12"),
            });
        }
        let form = CocycleForm { dim, theta };
        let defect = cocycle_identity_residual(alg, &form);
        if defect > 1e-12 {
            return Err(GeomechError::InvalidParameter {
                name: "cocycle",
                reason: format!("cocycle identity defect {defect:.3e} exceeds 1e-12"),
            });
        }
        Ok(form)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.theta[(i, j)]
    }

    /// Evaluation on algebra vectors.
    pub fn apply(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.theta[(i, j)] * x[i] * y[j];
            }
        }
        s
    }
}

/// Maximum absolute residual of the cocycle identity
/// `Θ([X,Y],Z) + Θ([Y,Z],X) + Θ([Z,X],Y) = 0` over all basis triples.
pub fn cocycle_identity_residual(alg: &LieAlgebra, theta: &CocycleForm) -> f64 {
    let n = alg.dim();
    assert_eq!(theta.dim(), n, "cocycle dimension must match algebra");
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut sum = 0.0;
                for m in 0..n {
                    sum += alg.c(i, j, m) * theta.entry(m, k)
                        + alg.c(j, k, m) * theta.entry(m, i)
                        + alg.c(k, i, m) * theta.entry(m, j);
                }
                worst = worst.max(sum.abs());
            }
        }
    }
    worst
}

/// A scalar function with an analytic gradient, the common currency of all
/// bracket operations. Cloning is cheap (shared closures).
#[derive(Clone)]
pub struct SmoothFunction {
    dim: usize,
    value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    gradient: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl SmoothFunction {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        SmoothFunction {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let g = (self.gradient)(x);
        debug_assert_eq!(g.len(), self.dim);
        g
    }

    /// The i-th coordinate function.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        SmoothFunction::new(
            dim,
            move |x| x[i],
            move |_| {
                let mut g = vec![0.0; dim];
                g[i] = 1.0;
                g
            },
        )
    }

    /// Linear function `x ↦ Σ a_i x_i`.
    pub fn linear(coeffs: Vec<f64>) -> Self {
        let dim = coeffs.len();
        let c2 = coeffs.clone();
        SmoothFunction::new(
            dim,
            move |x| coeffs.iter().zip(x).map(|(a, v)| a * v).sum(),
            move |_| c2.clone(),
        )
    }

    /// Cubic polynomial with dense coefficient tensors: linear `a_i`,
    /// quadratic `b_ij` (row-major `n²`), cubic `c_ijk` (row-major `n³`).
    /// No symmetry is required of the tensors.
    pub fn polynomial_cubic(dim: usize, lin: Vec<f64>, quad: Vec<f64>, cubic: Vec<f64>) -> Self {
        assert_eq!(lin.len(), dim);
        assert_eq!(quad.len(), dim * dim);
        assert_eq!(cubic.len(), dim * dim * dim);
        let (l1, q1, c1) = (lin.clone(), quad.clone(), cubic.clone());
        let value = move |x: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..dim {
                s += l1[i] * x[i];
                for j in 0..dim {
                    s += q1[i * dim + j] * x[i] * x[j];
                    for k in 0..dim {
                        s += c1[(i * dim + j) * dim + k] * x[i] * x[j] * x[k];
                    }
                }
            }
            s
        };
        let gradient = move |x: &[f64]| -> Vec<f64> {
            let mut g = vec![0.0; dim];
            for (m, gm) in g.iter_mut().enumerate() {
                *gm += lin[m];
                for j in 0..dim {
                    *gm += (quad[m * dim + j] + quad[j * dim + m]) * x[j];
                    for k in 0..dim {
                        *gm += cubic[(m * dim + j) * dim + k] * x[j] * x[k]
                            + cubic[(j * dim + m) * dim + k] * x[j] * x[k]
                            + cubic[(j * dim + k) * dim + m] * x[j] * x[k];
                    }
                }
            }
            g
        };
        SmoothFunction::new(dim, value, gradient)
    }

    /// Pointwise product, with the product-rule gradient.
    pub fn product(f: &SmoothFunction, g: &SmoothFunction) -> Self {
        assert_eq!(f.dim, g.dim, "product factors must share a dimension");
        let (fv, fg) = (f.value.clone(), f.gradient.clone());
        let (gv, gg) = (g.value.clone(), g.gradient.clone());
        let (fv2, gv2) = (f.value.clone(), g.value.clone());
        SmoothFunction::new(
            f.dim,
            move |x| fv(x) * gv(x),
            move |x| {
                let (a, b) = (fv2(x), gv2(x));
                fg(x)
                    .iter()
                    .zip(gg(x).iter())
                    .map(|(df, dg)| df * b + a * dg)
                    .collect()
            },
        )
    }

    /// Largest relative deviation of the analytic gradient from central
    /// finite differences over the given points (gradient self-check mode;
    /// used in tests, skipped in production runs).
    pub fn gradient_defect(&self, points: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for x in points {
            let g = self.gradient(x);
            let mut xp = x.clone();
            for i in 0..self.dim {
                let h = 1e-6 * x[i].abs().max(1.0);
                xp[i] = x[i] + h;
                let fp = self.value(&xp);
                xp[i] = x[i] - h;
                let fm = self.value(&xp);
                xp[i] = x[i];
                let fd = (fp - fm) / (2.0 * h);
                worst = worst.max((g[i] - fd).abs() / g[i].abs().max(1.0));
            }
        }
        worst
    }
}

impl std::fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothFunction").field("dim", &self.dim).finish()
    }
}

/// Tags the provenance of a structure, which decides how derivatives of the
/// structure matrix are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    /// Constant Darboux block: coordinates `(x^1..x^n, x^{n+1}..x^{2n})` with
    /// `L[n+i][i] = +1`.
    CanonicalDarboux,
    /// Linear structure on the dual of a Lie algebra.
    LiePoisson,
    /// Linear structure shifted by a constant cocycle matrix.
    ModifiedLiePoisson,
    /// Arbitrary user matrix field; derivatives by central differences.
    Custom,
}

/// The structure matrix field `x ↦ L(x)` together with exact derivative data
/// where the structure is built in.
pub struct PoissonStructure {
    dim: usize,
    kind: StructureKind,
    lambda: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
    /// Exact `∂L/∂x_k` when available; `None` falls back to differences.
    dlambda: Option<Arc<dyn Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync>>,
}

impl std::fmt::Debug for PoissonStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonStructure")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .finish()
    }
}

impl PoissonStructure {
    /// Constant Darboux structure on 2n coordinates.
    pub fn canonical(n: usize) -> Self {
        let dim = 2 * n;
        let mut l = DMatrix::zeros(dim, dim);
        for i in 0..n {
            l[(n + i, i)] = 1.0;
            l[(i, n + i)] = -1.0;
        }
        let l2 = l.clone();
        PoissonStructure {
            dim,
            kind: StructureKind::CanonicalDarboux,
            lambda: Arc::new(move |_x| l.clone()),
            dlambda: Some(Arc::new(move |_x, _k| DMatrix::zeros(l2.nrows(), l2.ncols()))),
        }
    }

    /// Linear structure on the dual of `alg`, optionally shifted by a
    /// symplectic cocycle: `L_ij(μ) = Σ_k c^k_ij μ_k − Θ_ij`.
    pub fn lie_poisson(alg: LieAlgebra, cocycle: Option<CocycleForm>) -> Self {
        let dim = alg.dim();
        if let Some(ref th) = cocycle {
            assert_eq!(th.dim(), dim, "cocycle dimension must match algebra");
        }
        let alg2 = alg.clone();
        let cocycle2 = cocycle.clone();
        let kind = if cocycle.is_some() {
            StructureKind::ModifiedLiePoisson
        } else {
            StructureKind::LiePoisson
        };
        PoissonStructure {
            dim,
            kind,
            lambda: Arc::new(move |mu: &[f64]| {
                let mut l = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        let mut s = 0.0;
                        for (k, m) in mu.iter().enumerate() {
                            s += alg.c(i, j, k) * m;
                        }
                        if let Some(ref th) = cocycle {
                            s -= th.entry(i, j);
                        }
                        l[(i, j)] = s;
                    }
                }
                l
            }),
            dlambda: Some(Arc::new(move |_mu: &[f64], k: usize| {
                let mut d = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        d[(i, j)] = alg2.c(i, j, k);
                    }
                }
                let _ = &cocycle2; // constant shift has zero derivative
                d
            })),
        }
    }

    /// Arbitrary structure from a user matrix field. The matrix must be
    /// antisymmetric at every point; derivatives are taken by central
    /// differences with step `1e-5 · max(1, ‖x‖)`.
    pub fn custom(dim: usize, lambda: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        PoissonStructure {
            dim,
            kind: StructureKind::Custom,
            lambda: Arc::new(lambda),
            dlambda: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    /// The structure matrix at a point.
    pub fn lambda_at(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        (self.lambda)(x)
    }

    /// Max-norm antisymmetry defect of the matrix at a point.
    pub fn antisymmetry_defect_at(&self, x: &[f64]) -> f64 {
        let l = self.lambda_at(x);
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((l[(i, j)] + l[(j, i)]).abs());
            }
        }
        worst
    }

    /// `∂L/∂x_k` at a point, exact when built in.
    pub fn dlambda_at(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        if let Some(ref d) = self.dlambda {
            return d(x, k);
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-5 * norm.max(1.0);
        let mut xp = x.to_vec();
        xp[k] = x[k] + h;
        let lp = (self.lambda)(&xp);
        xp[k] = x[k] - h;
        let lm = (self.lambda)(&xp);
        (lp - lm) / (2.0 * h)
    }
}

/// Matrix of the (possibly cocycle-shifted) linear structure at a dual point.
pub fn lie_poisson_matrix(
    alg: &LieAlgebra,
    mu: &[f64],
    cocycle: Option<&CocycleForm>,
) -> Result<DMatrix<f64>, GeomechError> {
    let dim = alg.dim();
    if mu.len() != dim {
        return Err(GeomechError::DimensionMismatch {
            what: "dual point",
            expected: dim,
            got: mu.len(),
        });
    }
    let mut l = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut s = 0.0;
            for (k, m) in mu.iter().enumerate() {
                s += alg.c(i, j, k) * m;
            }
            if let Some(th) = cocycle {
                s -= th.entry(i, j);
            }
            l[(i, j)] = s;
        }
    }
    Ok(l)
}

/// The bracket `{f, g}(x) = Σ_ij ∂_i f · L_ij(x) · ∂_j g`.
pub fn poisson_bracket(
    structure: &PoissonStructure,
    f: &SmoothFunction,
    g: &SmoothFunction,
    x: &[f64],
) -> Result<f64, GeomechError> {
    let dim = structure.dim();
    for (what, d) in [("f", f.dim()), ("g", g.dim()), ("point", x.len())] {
        if d != dim {
            return Err(GeomechError::DimensionMismatch {
                what: match what {
                    "f" => "bracket first function",
                    "g" => "bracket second function",
                    _ => "bracket point",
                },
                expected: dim,
                got: d,
            });
        }
    }
    let l = structure.lambda_at(x);
    let gf = f.gradient(x);
    let gg = g.gradient(x);
    let mut s = 0.0;
    for i in 0..dim {
        if gf[i] == 0.0 {
            continue;
        }
        for j in 0..dim {
            s += gf[i] * l[(i, j)] * gg[j];
        }
    }
    Ok(s)
}

/// Hamiltonian vector field `(X_H)^j(x) = Σ_i ∂_i H(x) · L_ij(x)`.
///
/// On a constant Darboux block this reproduces
/// `dx^i/dt = ∂H/∂x^{n+i}`, `dx^{n+i}/dt = −∂H/∂x^i`.
pub fn ham_vector_field(structure: &PoissonStructure, h: &SmoothFunction, x: &[f64]) -> Vec<f64> {
    let dim = structure.dim();
    assert_eq!(h.dim(), dim, "Hamiltonian dimension mismatch");
    assert_eq!(x.len(), dim, "point dimension mismatch");
    let l = structure.lambda_at(x);
    let g = h.gradient(x);
    let mut out = vec![0.0; dim];
    for (j, o) in out.iter_mut().enumerate() {
        for i in 0..dim {
            *o += g[i] * l[(i, j)];
        }
    }
    out
}

/// Cyclic bracket sum `{{f,g},h} + {{g,h},f} + {{h,f},g}` at a point.
///
/// All second-derivative contributions cancel in the cyclic sum, so the value
/// depends only on the gradients of the three functions and the first
/// derivatives of the structure matrix. It vanishes at every point exactly
/// when the matrix field satisfies the Jacobi identity there.
pub fn jacobiator(
    structure: &PoissonStructure,
    f: &SmoothFunction,
    g: &SmoothFunction,
    h: &SmoothFunction,
    x: &[f64],
) -> f64 {
    let dim = structure.dim();
    assert_eq!(x.len(), dim, "point dimension mismatch");
    let l = structure.lambda_at(x);
    let dl: Vec<DMatrix<f64>> = (0..dim).map(|k| structure.dlambda_at(x, k)).collect();
    let gf = f.gradient(x);
    let gg = g.gradient(x);
    let gh = h.gradient(x);

    // One cyclic term: Σ_kl [Σ_ij a_i ∂_k L_ij b_j] L_kl c_l.
    let term = |a: &[f64], b: &[f64], c: &[f64]| -> f64 {
        let mut total = 0.0;
        for k in 0..dim {
            let dk = &dl[k];
            let mut s = 0.0;
            for i in 0..dim {
                if a[i] == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    s += a[i] * dk[(i, j)] * b[j];
                }
            }
            if s == 0.0 {
                continue;
            }
            for (lidx, cl) in c.iter().enumerate() {
                total += s * l[(k, lidx)] * cl;
            }
        }
        total
    };

    term(&gf, &gg, &gh) + term(&gg, &gh, &gf) + term(&gh, &gf, &gg)
}

/// Max over the sample points of the norm of the Hamiltonian vector field of
/// `f`; a value below tolerance certifies `f` as a Casimir on the sample.
pub fn casimir_residual(
    structure: &PoissonStructure,
    f: &SmoothFunction,
    points: &[Vec<f64>],
) -> Result<f64, GeomechError> {
    if points.is_empty() {
        return Err(GeomechError::InsufficientSamples(
            "casimir check needs at least one point".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for x in points {
        let v = ham_vector_field(structure, f, x);
        worst = worst.max(v.iter().map(|a| a * a).sum::<f64>().sqrt());
    }
    Ok(worst)
}
