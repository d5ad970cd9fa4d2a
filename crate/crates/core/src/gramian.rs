//! The mutated Gramian: the slice `Λ(t)`, its integral `Π` over `[0, T]`,
//! and the derived operators `Q` and `P`, plus the admissibility test for
//! the pair `(ε, T)`.
//!
//! With `β = α − ε`,
//!
//! * `Φ(s) = exp(−As) B M_U⁻¹ Bᵀ exp(−Aᵀs)`,
//! * `Ψ(t) = exp(−At) M_H⁻¹ exp(−Aᵀt)`,
//! * `Λ(t) = D e^{αT} ∫₀ᵗ e^{−βs} Φ(s) ds + C e^{−βt} Ψ(t)`,
//! * `Π = D e^{αT} ∫₀ᵀ (T − s) e^{−βs} Φ(s) ds + C ∫₀ᵀ e^{−βt} Ψ(t) dt`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    chol_spd, eigenvalues, expm, integrate_mat, kalman_frame, solve_lower, symmetrize, Cholesky,
    Mat, QuadSpec,
};
use crate::observability::ObservabilityCertificate;
use crate::systems::SystemDef;

#[derive(Debug, Clone, Serialize)]
pub struct GramianBundle {
    pub alpha: f64,
    pub eps: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "Lambda_T", with = "crate::numerics::rows_serde")]
    pub lambda_t: Mat,
    #[serde(rename = "Pi", with = "crate::numerics::rows_serde")]
    pub pi: Mat,
    #[serde(skip)]
    pub pi_inv: Mat,
    #[serde(rename = "Q", with = "crate::numerics::rows_serde")]
    pub q: Mat,
    #[serde(rename = "P", with = "crate::numerics::rows_serde")]
    pub p: Mat,
    pub quad_error: f64,
    pub quad: QuadSpec,
    pub cert: ObservabilityCertificate,
}

impl GramianBundle {
    /// `T D(α) e^{αT}`, the scalar in front of the gain.
    pub fn gain_scale(&self) -> f64 {
        gain_scale(&self.cert, self.horizon)
    }
}

pub(crate) fn gain_scale(cert: &ObservabilityCertificate, horizon: f64) -> f64 {
    if cert.d_alpha == 0.0 {
        0.0
    } else {
        horizon * cert.d_alpha * (cert.alpha * horizon).exp()
    }
}

fn check_params(cert: &ObservabilityCertificate, eps: f64, horizon: f64) -> Result<()> {
    cert.check()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain(format!("T must be positive, got {horizon}")));
    }
    if !(eps.is_finite() && eps >= 0.0 && eps < cert.alpha) {
        return Err(Error::domain(format!(
            "eps must lie in [0, alpha) = [0, {}), got {eps}",
            cert.alpha
        )));
    }
    Ok(())
}

/// `exp(−As) X exp(−Aᵀs)`.
fn backward_congruence(a: &Mat, x: &Mat, s: f64) -> Mat {
    let e = expm(a, -s).expect("finite generator");
    &e * x * e.transpose()
}

/// `Λ(t)` for `0 ≤ t ≤ T`.
pub fn lambda_slice(
    sys: &SystemDef,
    cert: &ObservabilityCertificate,
    eps: f64,
    horizon: f64,
    t: f64,
    quad: QuadSpec,
) -> Result<Mat> {
    check_params(cert, eps, horizon)?;
    if !(t >= 0.0 && t <= horizon) {
        return Err(Error::domain(format!(
            "t must lie in [0, T] = [0, {horizon}], got {t}"
        )));
    }
    let beta = cert.alpha - eps;
    let a = sys.a();
    let j = sys.j_state();
    let remainder = backward_congruence(a, j, t) * (cert.c_alpha * (-beta * t).exp());
    if cert.d_alpha == 0.0 || t == 0.0 {
        return Ok(symmetrize(&remainder));
    }
    let bjb = sys.control_weight();
    let q = integrate_mat(
        |s| backward_congruence(a, &bjb, s) * (-beta * s).exp(),
        0.0,
        t,
        quad,
    )?;
    let coef = cert.d_alpha * (cert.alpha * horizon).exp();
    Ok(symmetrize(&(q.value * coef + remainder)))
}

/// Frame point `τ ∈ [0, T]`. The integrands equal `e^{−βτ}` times a
/// congruence by `exp((A + β/2)(τ − s))`; `τ` splits `[0, T]` so that the
/// growth from the right end of that spectrum over `[0, τ]` matches the
/// growth from its left end over `[τ, T]`.
fn frame_point(a: &Mat, beta: f64, horizon: f64) -> f64 {
    let re: Vec<f64> = eigenvalues(a).iter().map(|z| z.re + 0.5 * beta).collect();
    let up = re.iter().copied().fold(0.0f64, f64::max);
    let down = re.iter().map(|r| -r).fold(0.0f64, f64::max);
    if up + down == 0.0 {
        0.5 * horizon
    } else {
        horizon * down / (up + down)
    }
}

/// Builds `Π`, `Λ(T)`, `Q = Λ(T) − C J` and `P = βI + Π⁻¹Q` from a single
/// stacked quadrature pass.
pub fn pi_integral(
    sys: &SystemDef,
    cert: &ObservabilityCertificate,
    eps: f64,
    horizon: f64,
    quad: QuadSpec,
) -> Result<GramianBundle> {
    check_params(cert, eps, horizon)?;
    let n = sys.n();
    let beta = cert.alpha - eps;
    // In a Kalman frame the control term vanishes exactly on the
    // uncontrollable block.
    let frame = kalman_frame(sys.a(), sys.b());
    let (a, j, bjb) = match &frame {
        Some((v, r)) => {
            let vt = v.transpose();
            let mut a = &vt * sys.a() * v;
            a.view_mut((*r, 0), (n - r, *r)).fill(0.0);
            let mut bjb = &vt * sys.control_weight() * v;
            bjb.view_mut((*r, 0), (n - r, n)).fill(0.0);
            bjb.view_mut((0, *r), (n, n - r)).fill(0.0);
            (a, symmetrize(&(&vt * sys.j_state() * v)), symmetrize(&bjb))
        }
        None => (sys.a().clone(), sys.j_state().clone(), sys.control_weight()),
    };
    let (a, j) = (&a, &j);
    let with_control = cert.d_alpha != 0.0;

    // Assembled in the congruent frame `Π̂ = G Π Gᵀ`, `G = exp(Aτ)`, with
    // `τ` from [`frame_point`].
    // Columns: [ (T−s) e^{−βs} GΦ(s)G^T | e^{−βs} GΦ(s)G^T | e^{−βs} GΨ(s)G^T ]
    let tau = frame_point(a, beta, horizon);
    let q = integrate_mat(
        |s| {
            let e = expm(a, tau - s).expect("finite generator");
            let et = e.transpose();
            let w = (-beta * s).exp();
            let mut out = Mat::zeros(n, 3 * n);
            if with_control {
                let phi = &e * &bjb * &et * w;
                out.view_mut((0, 0), (n, n))
                    .copy_from(&(&phi * (horizon - s)));
                out.view_mut((0, n), (n, n)).copy_from(&phi);
            }
            out.view_mut((0, 2 * n), (n, n))
                .copy_from(&(&e * j * &et * w));
            out
        },
        0.0,
        horizon,
        quad,
    )?;
    let coef = gain_scale(cert, horizon) / horizon;
    let block = |k: usize| q.value.columns(k * n, n).into_owned();
    let mut pi_hat = block(2) * cert.c_alpha;
    let mut lambda_hat =
        backward_congruence(a, j, horizon - tau) * (cert.c_alpha * (-beta * horizon).exp());
    if with_control {
        pi_hat += block(0) * coef;
        lambda_hat += block(1) * coef;
    }
    let pi_hat = symmetrize(&pi_hat);
    let g = expm(a, tau)?;
    let g_inv = expm(a, -tau)?;
    let pi = symmetrize(&(&g_inv * &pi_hat * g_inv.transpose()));
    let lambda_t = symmetrize(&(&g_inv * lambda_hat * g_inv.transpose()));
    let quad_error = q.err_estimate * coef.max(cert.c_alpha).max(1.0);

    let l = match chol_spd(&pi_hat)? {
        Cholesky::Factor(l) => l,
        Cholesky::NotSpd { pivot } => {
            return Err(Error::PositivityViolation(format!(
                "Pi is not positive definite (pivot {pivot}); the certificate is invalid or the quadrature is too coarse"
            )))
        }
    };
    // Π⁻¹ = Gᵀ Π̂⁻¹ G = (L⁻¹G)ᵀ (L⁻¹G)
    let r = solve_lower(&l, &g);
    let pi_inv = symmetrize(&(r.transpose() * &r));
    let (pi, pi_inv, lambda_t) = match &frame {
        Some((v, _)) => {
            let back = |m: &Mat| symmetrize(&(v * m * v.transpose()));
            (back(&pi), back(&pi_inv), back(&lambda_t))
        }
        None => (pi, pi_inv, lambda_t),
    };
    let j = sys.j_state();
    let q_op = symmetrize(&(&lambda_t - j * cert.c_alpha));
    let p = Mat::identity(n, n) * beta + &pi_inv * &q_op;
    Ok(GramianBundle {
        alpha: cert.alpha,
        eps,
        horizon,
        lambda_t,
        pi,
        pi_inv,
        q: q_op,
        p,
        quad_error,
        quad,
        cert: cert.clone(),
    })
}

/// `Q = Λ(T) − C(α) M_H⁻¹`.
pub fn q_operator(bundle: &GramianBundle) -> &Mat {
    &bundle.q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Ok,
    /// `ε` or `T` break the admissibility condition (wrong range for `ε`, or
    /// `T < ε⁻¹ ln C` when `C > 1`).
    Violates,
    /// `T ≤ α⁻¹ ln C`.
    OutsideWindow,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Ok => "ok",
            Verdict::Violates => "violates-admissibility",
            Verdict::OutsideWindow => "outside-window",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub verdict: Verdict,
    /// `T⁻¹ ln C(α)`.
    pub eps_hat: f64,
    /// `T > α⁻¹ ln C(α)`.
    pub in_window: bool,
    /// Left end of the window, `α⁻¹ ln C(α)`.
    pub window_start: f64,
}

/// Admissibility of `(ε, T)` for a certificate: for `C > 1` this needs
/// `ε ∈ (0, α)` and `T ≥ ε⁻¹ ln C`; for `C = 1`, `ε ∈ [0, α)` and `T > 0`.
pub fn admissible(cert: &ObservabilityCertificate, eps: f64, horizon: f64) -> Admissibility {
    let ln_c = cert.c_alpha.ln();
    let window_start = ln_c / cert.alpha;
    let in_window = horizon.is_finite() && horizon > window_start && horizon > 0.0;
    let eps_hat = if horizon > 0.0 {
        ln_c / horizon
    } else {
        f64::INFINITY
    };
    let verdict = if !in_window {
        Verdict::OutsideWindow
    } else if cert.c_alpha > 1.0 {
        // relative slack so that eps = ε̂ itself is accepted
        if eps > 0.0 && eps < cert.alpha && eps * horizon >= ln_c * (1.0 - 1e-12) {
            Verdict::Ok
        } else {
            Verdict::Violates
        }
    } else if eps >= 0.0 && eps < cert.alpha {
        Verdict::Ok
    } else {
        Verdict::Violates
    };
    Admissibility {
        verdict,
        eps_hat,
        in_window,
        window_start,
    }
}

/// Rejects inadmissible `(ε, T)` with a domain error naming the failed branch.
pub(crate) fn require_admissible(
    cert: &ObservabilityCertificate,
    eps: f64,
    horizon: f64,
) -> Result<Admissibility> {
    let adm = admissible(cert, eps, horizon);
    match adm.verdict {
        Verdict::Ok => Ok(adm),
        Verdict::OutsideWindow => Err(Error::domain(format!(
            "T = {horizon} is outside the admissible window I_alpha = ({}, +inf)",
            adm.window_start
        ))),
        Verdict::Violates if cert.c_alpha > 1.0 => Err(Error::domain(format!(
            "(eps, T) = ({eps}, {horizon}) inadmissible: C(alpha) > 1 requires eps in (0, alpha) and T >= ln C / eps = {}",
            cert.c_alpha.ln() / eps
        ))),
        Verdict::Violates => Err(Error::domain(format!(
            "(eps, T) = ({eps}, {horizon}) inadmissible: C(alpha) = 1 requires eps in [0, alpha) and T > 0"
        ))),
    }
}
