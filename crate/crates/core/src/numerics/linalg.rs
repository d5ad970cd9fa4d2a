//! Symmetric-definite factorizations, generalized symmetric eigenproblems,
//! Lyapunov solves and the spectral helpers built on them.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use super::{check_finite, check_square, Mat};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// Outcome of [`chol_spd`].
#[derive(Debug, Clone, PartialEq)]
pub enum Cholesky {
    /// Lower-triangular `L` with `M = L Lᵀ`.
    Factor(Mat),
    /// Breakdown at this 1-based pivot.
    NotSpd { pivot: usize },
}

impl Cholesky {
    pub fn factor(self, what: &str) -> Result<Mat> {
        match self {
            Cholesky::Factor(l) => Ok(l),
            Cholesky::NotSpd { pivot } => Err(Error::NotSpd {
                what: what.to_string(),
                pivot,
            }),
        }
    }
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn check_symmetric(m: &Mat, what: &str) -> Result<()> {
    check_square(m, what)?;
    check_finite(m, what)?;
    let scale = max_abs(m);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::domain(format!(
                    "{what}: matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Cholesky factorization of a symmetric matrix.
pub fn chol_spd(m: &Mat) -> Result<Cholesky> {
    check_symmetric(m, "chol_spd")?;
    let n = m.nrows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= 0.0 {
            return Ok(Cholesky::NotSpd { pivot: j + 1 });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(Cholesky::Factor(l))
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &Mat, b: &Mat) -> Mat {
    l.solve_lower_triangular(b)
        .expect("Cholesky factor has a positive diagonal")
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(s: &Mat) -> (DVector<f64>, Mat) {
    let eig = SymmetricEigen::new(symmetrize(s));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Generalized symmetric-definite eigenproblem `S x = λ M x`, solved by
/// Cholesky whitening. Eigenvalues ascending; eigenvectors are
/// `M`-orthonormal.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub values: DVector<f64>,
    pub vectors: Mat,
}

/// Orthonormal basis of the controllable subspace `span[B, AB, A²B, …]`.
pub fn controllable_basis(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let tol = 1e-10 * (norm2(a) + norm2(b)).max(1.0);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut block = b.clone();
    for _ in 0..n {
        let mut added = Vec::new();
        for c in 0..block.ncols() {
            let mut v = block.column(c).into_owned();
            for _ in 0..2 {
                for q in &basis {
                    let proj = q.dot(&v);
                    v.axpy(-proj, q, 1.0);
                }
            }
            let norm = v.norm();
            if norm > tol * block.column(c).norm().max(1.0) && basis.len() < n {
                let q = v / norm;
                basis.push(q.clone());
                added.push(q);
            }
        }
        if added.is_empty() {
            break;
        }
        block = a * Mat::from_columns(&added);
    }
    if basis.is_empty() {
        return Mat::zeros(n, 0);
    }
    Mat::from_columns(&basis)
}

/// Orthogonal `V = [V_c V_u]` whose leading `r` columns span the
/// controllable subspace; `None` when `r` is `0` or `n`.
pub fn kalman_frame(a: &Mat, b: &Mat) -> Option<(Mat, usize)> {
    let n = a.nrows();
    let vc = controllable_basis(a, b);
    let r = vc.ncols();
    if r == 0 || r == n {
        return None;
    }
    let mut cols: Vec<DVector<f64>> = vc.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < n {
        let mut best: Option<DVector<f64>> = None;
        for i in 0..n {
            let mut v = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
            for _ in 0..2 {
                for q in &cols {
                    let proj = q.dot(&v);
                    v.axpy(-proj, q, 1.0);
                }
            }
            if best.as_ref().is_none_or(|b| v.norm() > b.norm()) {
                best = Some(v);
            }
        }
        let v = best.expect("n > 0");
        let norm = v.norm();
        cols.push(v / norm);
    }
    Some((Mat::from_columns(&cols), r))
}

pub fn sym_pencil(s: &Mat, m: &Mat) -> Result<Pencil> {
    if s.shape() != m.shape() {
        return Err(Error::Shape(format!(
            "pencil shapes differ: {:?} vs {:?}",
            s.shape(),
            m.shape()
        )));
    }
    check_symmetric(s, "pencil matrix")?;
    let l = chol_spd(m)?.factor("pencil metric")?;
    let y = solve_lower(&l, &symmetrize(s));
    let whitened = solve_lower(&l, &y.transpose());
    let (values, z) = sym_eigen(&whitened);
    let vectors = l
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    Ok(Pencil { values, vectors })
}

/// Extreme generalized eigenvalues `(λ_min, λ_max)` of `S x = λ M x`.
pub fn sym_pencil_extremes(s: &Mat, m: &Mat) -> Result<(f64, f64)> {
    let p = sym_pencil(s, m)?;
    let n = p.values.len();
    if n == 0 {
        return Err(Error::Dimension("empty pencil".into()));
    }
    Ok((p.values[0], p.values[n - 1]))
}

/// Solves `Fᵀ W + W F = −Rhs` through the Kronecker-vectorized system.
/// Intended for `n ≤ 60`.
pub fn solve_lyapunov(f: &Mat, rhs: &Mat) -> Result<Mat> {
    check_square(f, "solve_lyapunov")?;
    check_finite(f, "solve_lyapunov")?;
    check_symmetric(rhs, "solve_lyapunov rhs")?;
    if f.shape() != rhs.shape() {
        return Err(Error::Shape(
            "solve_lyapunov: F and Rhs differ in shape".into(),
        ));
    }
    let n = f.nrows();
    let ft = f.transpose();
    let eye = Mat::identity(n, n);
    // column-major vec: vec(FᵀW) = (I ⊗ Fᵀ) vec W,  vec(WF) = (Fᵀ ⊗ I) vec W
    let op = eye.kronecker(&ft) + ft.kronecker(&eye);
    let b = DVector::from_iterator(n * n, rhs.iter().map(|x| -x));
    let lu = op.lu();
    let sol = lu.solve(&b).ok_or_else(|| {
        Error::Singular("Lyapunov operator is singular (F not Hurwitz or near-defective)".into())
    })?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("Lyapunov solution is not finite".into()));
    }
    let w = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(symmetrize(&w))
}

/// Spectral norm.
pub fn norm2(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0, |a, &b| a.max(b))
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &Mat) -> Vec<Complex<f64>> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &Mat) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Numerical rank of a complex matrix at an absolute singular-value cutoff.
pub fn complex_rank(m: &DMatrix<Complex<f64>>, tol: f64) -> usize {
    m.clone()
        .singular_values()
        .iter()
        .filter(|&&s| s > tol)
        .count()
}

/// An SPD inner product `⟨x, y⟩ = xᵀ M y` with its Cholesky factor and
/// inverse cached.
#[derive(Debug, Clone)]
pub struct Metric {
    gram: Mat,
    chol: Mat,
    inverse: Mat,
}

impl Metric {
    pub fn new(gram: Mat, what: &str) -> Result<Self> {
        let chol = chol_spd(&gram)?.factor(what)?;
        let n = gram.nrows();
        let linv = solve_lower(&chol, &Mat::identity(n, n));
        let inverse = symmetrize(&(linv.transpose() * &linv));
        Ok(Metric {
            gram,
            chol,
            inverse,
        })
    }

    pub fn identity(n: usize) -> Self {
        Metric {
            gram: Mat::identity(n, n),
            chol: Mat::identity(n, n),
            inverse: Mat::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn inverse(&self) -> &Mat {
        &self.inverse
    }

    pub fn chol(&self) -> &Mat {
        &self.chol
    }

    /// Operator norm of `X` on the space carrying this metric.
    pub fn op_norm(&self, x: &Mat) -> f64 {
        // ‖X‖ = ‖Lᵀ X L⁻ᵀ‖₂ with M = L Lᵀ
        let lt = self.chol.transpose();
        let y = &lt * x;
        let z = self
            .chol
            .solve_lower_triangular(&y.transpose())
            .expect("positive diagonal")
            .transpose();
        norm2(&z)
    }

    /// Operator norm of `X` on the dual space, whose metric is `M⁻¹`.
    pub fn dual_op_norm(&self, x: &Mat) -> f64 {
        // ‖X‖ = ‖L⁻¹ X L‖₂
        let y = x * &self.chol;
        norm2(&solve_lower(&self.chol, &y))
    }

    pub fn norm_sq(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.gram * x)[(0, 0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn chol_examples() {
        assert_eq!(
            chol_spd(&Mat::identity(3, 3)).unwrap(),
            Cholesky::Factor(Mat::identity(3, 3))
        );
        let l = chol_spd(&dmatrix![4.0, 2.0; 2.0, 2.0])
            .unwrap()
            .factor("m")
            .unwrap();
        assert!((l - dmatrix![2.0, 0.0; 1.0, 1.0]).abs().max() < 1e-15);
        assert_eq!(
            chol_spd(&dmatrix![1.0, 2.0; 2.0, 1.0]).unwrap(),
            Cholesky::NotSpd { pivot: 2 }
        );
    }

    #[test]
    fn chol_rejects_asymmetric() {
        assert!(matches!(
            chol_spd(&dmatrix![1.0, 0.5; 0.0, 1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pencil_examples() {
        let (lo, hi) =
            sym_pencil_extremes(&(Mat::identity(2, 2) * 2.0), &Mat::identity(2, 2)).unwrap();
        assert!((lo - 2.0).abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);
        let (lo, hi) =
            sym_pencil_extremes(&dmatrix![1.0, 0.0; 0.0, 5.0], &Mat::identity(2, 2)).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 5.0).abs() < 1e-14);
        let (lo, hi) =
            sym_pencil_extremes(&dmatrix![2.0, 0.0; 0.0, 6.0], &dmatrix![2.0, 0.0; 0.0, 2.0])
                .unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
    }

    #[test]
    fn pencil_rejects_indefinite_metric() {
        let r = sym_pencil_extremes(&Mat::identity(2, 2), &dmatrix![1.0, 2.0; 2.0, 1.0]);
        assert!(matches!(r, Err(Error::NotSpd { pivot: 2, .. })));
    }

    #[test]
    fn pencil_residuals_are_small() {
        let s = dmatrix![3.0, 1.0, 0.5; 1.0, -2.0, 0.3; 0.5, 0.3, 1.0];
        let m = dmatrix![2.0, 0.3, 0.1; 0.3, 1.5, 0.2; 0.1, 0.2, 1.0];
        let p = sym_pencil(&s, &m).unwrap();
        let scale = norm2(&s) + p.values.amax() * norm2(&m);
        for k in 0..3 {
            let v = p.vectors.column(k);
            let r = &s * v - (&m * v) * p.values[k];
            assert!(r.norm() <= 1e-8 * scale);
        }
    }

    #[test]
    fn lyapunov_examples() {
        let w = solve_lyapunov(&dmatrix![-1.0], &dmatrix![2.0]).unwrap();
        assert!((w[(0, 0)] - 1.0).abs() < 1e-14);
        let w = solve_lyapunov(&(-Mat::identity(2, 2)), &Mat::identity(2, 2)).unwrap();
        assert!((w - Mat::identity(2, 2) * 0.5).abs().max() < 1e-14);
        let w = solve_lyapunov(&dmatrix![-1.0, 1.0; 0.0, -2.0], &Mat::identity(2, 2)).unwrap();
        // hand solve of the three scalar equations: -2a = -1, a - 3b = 0, 2(b - 2c) = -1
        let expect = dmatrix![0.5, 1.0 / 6.0; 1.0 / 6.0, 1.0 / 3.0];
        assert!((w - expect).abs().max() < 1e-14);
    }

    #[test]
    fn lyapunov_singular_operator() {
        // eigenvalues ±1 sum to zero
        let f = dmatrix![1.0, 0.0; 0.0, -1.0];
        assert!(matches!(
            solve_lyapunov(&f, &Mat::identity(2, 2)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn metric_norms() {
        let m = Metric::new(dmatrix![4.0, 0.0; 0.0, 1.0], "m").unwrap();
        // x ↦ diag(1, 2) x in the weighted norm: ‖diag(1,2)‖ = 2
        let x = dmatrix![1.0, 0.0; 0.0, 2.0];
        assert!((m.op_norm(&x) - 2.0).abs() < 1e-14);
        // swap coordinates: ‖P‖_M = sqrt(4/1) = 2 on H, 2 on H' as well
        let p = dmatrix![0.0, 1.0; 1.0, 0.0];
        assert!((m.op_norm(&p) - 2.0).abs() < 1e-14);
        assert!((m.dual_op_norm(&p) - 2.0).abs() < 1e-14);
        assert!((m.inverse() - dmatrix![0.25, 0.0; 0.0, 1.0]).abs().max() < 1e-15);
    }

    #[test]
    fn kalman_frame_splits_invariant_subspace() {
        // x₂ evolves on its own; the control reaches x₃ and through it x₁.
        let a = dmatrix![1.0, 2.0, 1.0; 0.0, -1.0, 0.0; 0.5, 0.0, 3.0];
        let b = dmatrix![0.0; 0.0; 1.0];
        let (v, r) = kalman_frame(&a, &b).unwrap();
        assert_eq!(r, 2);
        assert!((v.transpose() * &v - Mat::identity(3, 3)).abs().max() < 1e-14);
        let at = v.transpose() * &a * &v;
        assert!(at[(2, 0)].abs() < 1e-14 && at[(2, 1)].abs() < 1e-14, "{at}");
        assert!((at[(2, 2)] + 1.0).abs() < 1e-14);
        let bt = v.transpose() * &b;
        assert!(bt[(2, 0)].abs() < 1e-14);
        assert!(kalman_frame(&a, &dmatrix![1.0; 1.0; 1.0]).is_none());
    }
}
