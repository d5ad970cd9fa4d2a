//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (Higham 2005, "The scaling and squaring method for the matrix exponential
//! revisited").

use nalgebra::DMatrix;

use super::{check_finite, check_square, Mat};
use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120., 60., 12., 1.];
const B5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const B7: [f64; 8] = [
    17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.,
];
const B9: [f64; 10] = [
    17643225600.,
    8821612800.,
    2075673600.,
    302702400.,
    30270240.,
    2162160.,
    110880.,
    3960.,
    90.,
    1.,
];
const B13: [f64; 14] = [
    64764752532480000.,
    32382376266240000.,
    7771770303897600.,
    1187353796428800.,
    129060195264000.,
    10559470521600.,
    670442572800.,
    33522128640.,
    1323241920.,
    40840800.,
    960960.,
    16380.,
    182.,
    1.,
];

fn norm1(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(t·A)`.
pub fn expm(a: &Mat, t: f64) -> Result<Mat> {
    check_square(a, "expm")?;
    check_finite(a, "expm")?;
    if !t.is_finite() {
        return Err(Error::domain("expm: time must be finite"));
    }
    let ta = a * t;
    let n = ta.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let norm = norm1(&ta);
    if norm == 0.0 {
        return Ok(Mat::identity(n, n));
    }

    let ident = Mat::identity(n, n);
    let a2 = &ta * &ta;
    let low_order = |coeffs: &[f64], pows: &[&Mat]| -> (Mat, Mat) {
        // U = A Σ b_{2k+1} A^{2k},  V = Σ b_{2k} A^{2k}
        let mut u = &ident * coeffs[1];
        let mut v = &ident * coeffs[0];
        for (k, p) in pows.iter().enumerate() {
            u += *p * coeffs[2 * k + 3];
            v += *p * coeffs[2 * k + 2];
        }
        (&ta * u, v)
    };

    if norm <= THETA_9 {
        let (u, v) = if norm <= THETA_3 {
            low_order(&B3, &[&a2])
        } else if norm <= THETA_5 {
            let a4 = &a2 * &a2;
            low_order(&B5, &[&a2, &a4])
        } else if norm <= THETA_7 {
            let a4 = &a2 * &a2;
            let a6 = &a4 * &a2;
            low_order(&B7, &[&a2, &a4, &a6])
        } else {
            let a4 = &a2 * &a2;
            let a6 = &a4 * &a2;
            let a8 = &a6 * &a2;
            low_order(&B9, &[&a2, &a4, &a6, &a8])
        };
        return pade_solve(u, v);
    }

    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
    let scale = 2f64.powi(-s);
    let a1 = &ta * scale;
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a1 * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];
    let mut r = pade_solve(u, v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_solve(u: Mat, v: Mat) -> Result<Mat> {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Singular("expm: Padé denominator is singular".into()))
}

/// Samples `exp(A·t_k)` on the uniform grid `t_k = k·step`, `k = 0..count`,
/// by repeated multiplication with one exponential.
pub fn expm_uniform_grid(a: &Mat, step: f64, count: usize) -> Result<Vec<Mat>> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    let e = expm(a, step)?;
    out.push(DMatrix::identity(n, n));
    for k in 1..count {
        let next = &out[k - 1] * &e;
        out.push(next);
    }
    Ok(out)
}
