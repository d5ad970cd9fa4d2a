//! Dense real linear-algebra kernel. Matrix exponentials and matrix-valued
//! quadrature live here next to the symmetric-definite pencil and Lyapunov
//! routines.

mod expm;
mod linalg;
mod quad;

pub use expm::{expm, expm_uniform_grid};
pub use linalg::{
    check_symmetric, chol_spd, complex_rank, controllable_basis, eigenvalues, kalman_frame,
    max_abs, norm2, solve_lower, solve_lyapunov, spectral_abscissa, sym_eigen, sym_pencil,
    sym_pencil_extremes, symmetrize, Cholesky, Metric, Pencil,
};
pub use quad::{gauss_legendre, integrate_mat, QuadRule, QuadSpec, Quadrature};

use crate::error::{Error, Result};

/// Dense real matrix. Every matrix-valued quantity in the crate uses it.
pub type Mat = nalgebra::DMatrix<f64>;

pub(crate) fn check_square(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain(format!(
            "{what}: matrix has non-finite entries"
        )));
    }
    Ok(())
}

/// Builds a matrix from row-major nested vectors.
pub fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Shape("ragged rows".into()));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

/// Row-major nested vectors, the wire layout of every matrix.
pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|row| row.iter().copied().collect())
        .collect()
}

/// Serde adapter writing matrices as row-major arrays of arrays.
pub mod rows_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{mat_from_rows, mat_to_rows, Mat};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        mat_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        mat_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
