//! Weak observability certificates in two forms. The static form has a
//! contraction factor `δ` on a fixed horizon; the dynamic form is
//! `(α, D(α), C(α))`. Both convert into each other, and dynamic constants can
//! also be read off a stabilizing feedback.
//!
//! Matrix forms used throughout, with `J = M_H⁻¹`:
//!
//! * `W_t = exp(At) J exp(Aᵀt)` (squared dual norm of the adjoint flow),
//! * `G_o(t) = ∫₀ᵗ exp(As) B M_U⁻¹ Bᵀ exp(Aᵀs) ds` (observation energy).
//!
//! Margins are reported relative to `max(1, λ_max(W_t, J))` so that they
//! stay meaningful when `W_t` grows exponentially.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    expm, integrate_mat, solve_lyapunov, spectral_abscissa, sym_eigen, sym_pencil_extremes,
    symmetrize, Mat, QuadSpec,
};
use crate::systems::SystemDef;

/// Safety factor applied to `D` returned by [`certify_static`].
pub const STATIC_INFLATION: f64 = 1.05;
/// Safety factor applied to sup-norm constants sampled on finite grids.
pub const SUP_INFLATION: f64 = 1.02;
/// Margins at or above `-MARGIN_TOL` count as satisfied.
pub const MARGIN_TOL: f64 = 1e-7;

/// `‖S*(T)φ‖² ≤ D ∫₀ᵀ ‖B*S*(t)φ‖² dt + δ ‖φ‖²` in matrix form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticCert {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub delta: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl StaticCert {
    pub fn new(horizon: f64, delta: f64, d: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!(
                "static certificate: T must be positive, got {horizon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain(format!(
                "static certificate: delta must lie in (0, 1), got {delta}"
            )));
        }
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::domain(format!(
                "static certificate: D must be non-negative, got {d}"
            )));
        }
        Ok(StaticCert { horizon, delta, d })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ConvertedFromStatic,
    FromFeedback,
    UserSupplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMargin {
    pub t: f64,
    pub margin: f64,
}

/// `W_t ⪯ D_α G_o(t) + C_α e^{−αt} J` for all `t ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityCertificate {
    pub alpha: f64,
    #[serde(rename = "D_alpha")]
    pub d_alpha: f64,
    #[serde(rename = "C_alpha")]
    pub c_alpha: f64,
    pub provenance: Provenance,
    #[serde(default)]
    pub grid: Vec<GridMargin>,
}

impl ObservabilityCertificate {
    /// A user-supplied certificate with no validation grid yet.
    pub fn new(alpha: f64, d_alpha: f64, c_alpha: f64) -> Result<Self> {
        let cert = ObservabilityCertificate {
            alpha,
            d_alpha,
            c_alpha,
            provenance: Provenance::UserSupplied,
            grid: Vec::new(),
        };
        cert.check()?;
        Ok(cert)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::field(
                "alpha",
                format!("must be positive, got {}", self.alpha),
            ));
        }
        if !(self.d_alpha.is_finite() && self.d_alpha >= 0.0) {
            return Err(Error::field(
                "D_alpha",
                format!("must be non-negative, got {}", self.d_alpha),
            ));
        }
        if !(self.c_alpha.is_finite() && self.c_alpha >= 1.0) {
            return Err(Error::field(
                "C_alpha",
                format!("must be at least 1, got {}", self.c_alpha),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cert: ObservabilityCertificate = serde_json::from_str(text)?;
        cert.check()?;
        Ok(cert)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Smallest recorded grid margin, if any.
    pub fn min_margin(&self) -> Option<f64> {
        self.grid.iter().map(|g| g.margin).reduce(f64::min)
    }
}

/// Outcome of [`certify_static`].
#[derive(Debug, Clone, PartialEq)]
pub enum StaticOutcome {
    Feasible(StaticCert),
    /// No `D` works: on the unobservable subspace the flow does not contract
    /// by `δ`. Carries the largest eigenvalue of the offending restricted form.
    Infeasible {
        kernel_excess: f64,
    },
}

/// `exp(At) J exp(Aᵀt)`.
pub fn adjoint_flow_form(sys: &SystemDef, t: f64) -> Result<Mat> {
    let e = expm(sys.a(), t)?;
    Ok(symmetrize(&(&e * sys.j_state() * e.transpose())))
}

/// `G_o(t)` by quadrature, with its error estimate.
pub fn observation_gramian(sys: &SystemDef, t: f64, quad: QuadSpec) -> Result<(Mat, f64)> {
    let bjb = sys.control_weight();
    let a = sys.a().clone();
    let q = integrate_mat(
        |s| {
            let e = expm(&a, s).expect("finite generator");
            &e * &bjb * e.transpose()
        },
        0.0,
        t,
        quad,
    )?;
    let g = symmetrize(&q.value);
    check_precision(q.err_estimate, &g)?;
    Ok((g, q.err_estimate))
}

fn check_precision(err: f64, g: &Mat) -> Result<()> {
    let limit = 1e-6 * crate::numerics::max_abs(g);
    if err > limit {
        return Err(Error::Precision {
            estimate: err,
            limit,
        });
    }
    Ok(())
}

/// `G_o(kΔ)` for `k = 0..count` by the semigroup recurrence
/// `G_o(t + Δ) = G_o(Δ) + exp(AΔ) G_o(t) exp(AᵀΔ)`, which needs one
/// quadrature on `[0, Δ]`.
pub fn observation_gramian_grid(
    sys: &SystemDef,
    step: f64,
    count: usize,
    quad: QuadSpec,
) -> Result<Vec<Mat>> {
    let n = sys.n();
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    out.push(Mat::zeros(n, n));
    if count == 1 {
        return Ok(out);
    }
    let (g_step, _) = observation_gramian(sys, step, quad)?;
    let e = expm(sys.a(), step)?;
    let et = e.transpose();
    for k in 1..count {
        let next = &g_step + &e * &out[k - 1] * &et;
        out.push(symmetrize(&next));
    }
    Ok(out)
}

/// Relative margin `λ_min(S, J) / max(1, λ_max(W, J))`.
fn relative_margin(slack: &Mat, w: &Mat, j: &Mat) -> Result<f64> {
    let (lo, _) = sym_pencil_extremes(&symmetrize(slack), j)?;
    let (_, wmax) = sym_pencil_extremes(w, j)?;
    Ok(lo / wmax.max(1.0))
}

/// Smallest `D` (inflated by 5%) with `W_T ⪯ D G_o(T) + δ J`.
///
/// On the kernel `N` of `G_o(T)` the inequality needs `X_NN ≺ 0` for
/// `X = W_T − δJ`; the remaining constraint is then the Schur complement
/// `D G_R ⪰ X_RR + X_RN (−X_NN)⁻¹ X_NR` on the range.
pub fn certify_static(
    sys: &SystemDef,
    horizon: f64,
    delta: f64,
    quad: QuadSpec,
) -> Result<StaticOutcome> {
    StaticCert::new(horizon, delta, 0.0)?;
    let w = adjoint_flow_form(sys, horizon)?;
    let (g, _) = observation_gramian(sys, horizon, quad)?;
    let x = symmetrize(&(&w - sys.j_state() * delta));

    let (gvals, gvecs) = sym_eigen(&g);
    let gmax = gvals.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = 1e-10 * gmax;
    let range: Vec<usize> = (0..gvals.len())
        .filter(|&i| gmax > 0.0 && gvals[i] > cutoff)
        .collect();
    let kernel: Vec<usize> = (0..gvals.len()).filter(|i| !range.contains(i)).collect();
    let basis = |idx: &[usize]| gvecs.select_columns(idx);
    let vr = basis(&range);
    let vn = basis(&kernel);

    let mut schur = if range.is_empty() {
        Mat::zeros(0, 0)
    } else {
        vr.transpose() * &x * &vr
    };
    if !kernel.is_empty() {
        let xnn = symmetrize(&(vn.transpose() * &x * &vn));
        let (vals, _) = sym_eigen(&xnn);
        let top = vals[vals.len() - 1];
        let scale =
            crate::numerics::max_abs(&w).max(delta * crate::numerics::max_abs(sys.j_state()));
        if top > -1e-12 * scale {
            return Ok(StaticOutcome::Infeasible { kernel_excess: top });
        }
        if !range.is_empty() {
            let xrn = vr.transpose() * &x * &vn;
            let neg_inv = (-xnn)
                .try_inverse()
                .ok_or_else(|| Error::Singular("kernel block of the static form".into()))?;
            schur += &xrn * neg_inv * xrn.transpose();
        }
    }
    let d = if range.is_empty() {
        0.0
    } else {
        let g_r = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
            range.len(),
            range.iter().map(|&i| gvals[i]),
        ));
        let (_, top) = sym_pencil_extremes(&symmetrize(&schur), &g_r)?;
        top.max(0.0)
    };
    Ok(StaticOutcome::Feasible(StaticCert::new(
        horizon,
        delta,
        d * STATIC_INFLATION,
    )?))
}

/// Sup over `σ ∈ [0, T]` (200 points) of the dual-norm of `exp(Aᵀσ)`.
fn dual_sup_norm(sys: &SystemDef, horizon: f64) -> Result<f64> {
    let metric = sys.state_metric();
    let mut kappa: f64 = 0.0;
    for i in 0..200 {
        let s = horizon * i as f64 / 199.0;
        let e = expm(&sys.a().transpose(), s)?;
        kappa = kappa.max(metric.dual_op_norm(&e));
    }
    Ok(kappa)
}

/// Static to dynamic: `α = −ln δ / T`, `C_α = max(1, κ² e^{αT})`,
/// `D_α = κ² D / (1 − e^{−αT})` with `κ` the (inflated) sup of the adjoint
/// flow over one horizon. The result is validated on `[0, 5T]`.
pub fn static_to_dynamic(
    sys: &SystemDef,
    cert: &StaticCert,
    quad: QuadSpec,
) -> Result<ObservabilityCertificate> {
    StaticCert::new(cert.horizon, cert.delta, cert.d)?;
    let t = cert.horizon;
    let alpha = -cert.delta.ln() / t;
    let kappa = dual_sup_norm(sys, t)? * SUP_INFLATION;
    let k2 = kappa * kappa;
    let decay = (-alpha * t).exp();
    let mut out = ObservabilityCertificate {
        alpha,
        d_alpha: k2 * cert.d / (1.0 - decay),
        c_alpha: (k2 * (alpha * t).exp()).max(1.0),
        provenance: Provenance::ConvertedFromStatic,
        grid: Vec::new(),
    };
    out.check()?;
    let report = validate_certificate(sys, &out, 5.0 * t, 51, quad)?;
    out.grid = report.grid;
    Ok(out)
}

/// Dynamic to static: `T̂ = (ln C_α + ln 2)/α` so that `δ̂ = 1/2`.
pub fn dynamic_to_static(cert: &ObservabilityCertificate) -> Result<StaticCert> {
    cert.check()?;
    let horizon = (cert.c_alpha.ln() + std::f64::consts::LN_2) / cert.alpha;
    StaticCert::new(horizon, 0.5, cert.d_alpha)
}

/// Certificate from a feedback `K` with `A + BK` decaying faster than `θ`:
/// `α = 2θ`, `C_α = 2C₁²`, `D_α = 2D₁²`, where `C₁` bounds
/// `‖exp((A+BK)t)‖ e^{θt}` and `D₁²` bounds the closed-loop control energy.
pub fn constants_from_feedback(
    sys: &SystemDef,
    k: &Mat,
    theta: f64,
) -> Result<ObservabilityCertificate> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::domain(format!(
            "theta must be positive, got {theta}"
        )));
    }
    if k.shape() != (sys.m(), sys.n()) {
        return Err(Error::Dimension(format!(
            "gain must be {}x{}, got {}x{}",
            sys.m(),
            sys.n(),
            k.nrows(),
            k.ncols()
        )));
    }
    let a_cl = sys.a() + sys.b() * k;
    let abscissa = spectral_abscissa(&a_cl);
    if abscissa >= -theta {
        return Err(Error::NotStabilizedAtRate {
            rate: theta,
            abscissa,
        });
    }
    let metric = sys.state_metric();
    let horizon = 20.0 / theta;
    let mut c1: f64 = 0.0;
    for i in 0..400 {
        let t = horizon * i as f64 / 399.0;
        let e = expm(&a_cl, t)?;
        c1 = c1.max(metric.op_norm(&e) * (theta * t).exp());
    }
    let c1 = c1 * SUP_INFLATION;
    let energy = symmetrize(&(k.transpose() * sys.control_metric().gram() * k));
    let w = solve_lyapunov(&a_cl, &energy)?;
    let (_, d1_sq) = sym_pencil_extremes(&w, metric.gram())?;
    let cert = ObservabilityCertificate {
        alpha: 2.0 * theta,
        d_alpha: 2.0 * d1_sq.max(0.0),
        c_alpha: (2.0 * c1 * c1).max(1.0),
        provenance: Provenance::FromFeedback,
        grid: Vec::new(),
    };
    cert.check()?;
    Ok(cert)
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub grid: Vec<GridMargin>,
    pub min_margin: f64,
}

impl CertificateReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_margin >= -tol
    }
}

/// Margins of the dynamic inequality on `grid` uniform points of `[0, t_max]`.
pub fn validate_certificate(
    sys: &SystemDef,
    cert: &ObservabilityCertificate,
    t_max: f64,
    grid: usize,
    quad: QuadSpec,
) -> Result<CertificateReport> {
    cert.check()?;
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::domain(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    if grid < 2 {
        return Err(Error::domain("validation grid needs at least 2 points"));
    }
    let step = t_max / (grid - 1) as f64;
    let gs = observation_gramian_grid(sys, step, grid, quad)?;
    let j = sys.j_state();
    let mut out = Vec::with_capacity(grid);
    for (k, g) in gs.iter().enumerate() {
        let t = k as f64 * step;
        let w = adjoint_flow_form(sys, t)?;
        let slack = g * cert.d_alpha + j * (cert.c_alpha * (-cert.alpha * t).exp()) - &w;
        out.push(GridMargin {
            t,
            margin: relative_margin(&slack, &w, j)?,
        });
    }
    let min_margin = out.iter().map(|g| g.margin).fold(f64::INFINITY, f64::min);
    Ok(CertificateReport {
        grid: out,
        min_margin,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    /// `(k, margin)` for horizons `kT`, `k = 1..n`.
    pub margins: Vec<(usize, f64)>,
    pub min_margin: f64,
}

/// Checks `W_{kT} ⪯ D Σ_{j<k} δ^j G_o(kT) + δ^k J` for `k = 1..n`.
pub fn iterate_static(
    sys: &SystemDef,
    cert: &StaticCert,
    n: usize,
    quad: QuadSpec,
) -> Result<IterationReport> {
    StaticCert::new(cert.horizon, cert.delta, cert.d)?;
    if n == 0 {
        return Err(Error::domain("iterate_static needs n >= 1"));
    }
    let gs = observation_gramian_grid(sys, cert.horizon, n + 1, quad)?;
    let j = sys.j_state();
    let mut margins = Vec::with_capacity(n);
    for (k, g) in gs.iter().enumerate().skip(1) {
        let geometric: f64 = (0..k).map(|i| cert.delta.powi(i as i32)).sum();
        let w = adjoint_flow_form(sys, k as f64 * cert.horizon)?;
        let slack = g * (cert.d * geometric) + j * cert.delta.powi(k as i32) - &w;
        margins.push((k, relative_margin(&slack, &w, j)?));
    }
    let min_margin = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    Ok(IterationReport {
        margins,
        min_margin,
    })
}
