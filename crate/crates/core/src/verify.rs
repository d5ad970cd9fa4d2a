//! Independent checks of the identities and inequalities satisfied by the
//! synthesized objects, and closed-loop decay measurement.
//!
//! Every verdict is derived from [`Tolerances`]; nothing is tuned per call.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::gramian::{admissible, pi_integral, GramianBundle, Verdict};
use crate::numerics::{
    expm, integrate_mat, norm2, solve_lyapunov, spectral_abscissa, sym_pencil, sym_pencil_extremes,
    symmetrize, Mat,
};
use crate::systems::SystemDef;

/// Environment variable holding a JSON override of [`Tolerances`].
pub const TOL_ENV: &str = "STABKIT_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Positivity margins pass at `≥ −margin`.
    pub margin: f64,
    /// Relative Lyapunov residual bound.
    pub lyapunov: f64,
    /// Riccati residual may exceed the Lyapunov one by at most
    /// `riccati_factor · cond(Π)²`.
    pub riccati_factor: f64,
    /// Slack on decay comparisons.
    pub decay: f64,
    /// Slack on the quadratic-form decay and the control-energy bound.
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            margin: 1e-7,
            lyapunov: 1e-6,
            riccati_factor: 10.0,
            decay: 0.05,
            energy: 1e-6,
        }
    }
}

impl Tolerances {
    /// Defaults overridden field by field from a JSON object.
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Tolerances = serde_json::from_str(text)?;
        for (name, v) in [
            ("margin", t.margin),
            ("lyapunov", t.lyapunov),
            ("riccati_factor", t.riccati_factor),
            ("decay", t.decay),
            ("energy", t.energy),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::field(
                    name,
                    "tolerance must be finite and non-negative",
                ));
            }
        }
        Ok(t)
    }

    /// Reads [`TOL_ENV`]; defaults when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOL_ENV) {
            Ok(text) if !text.trim().is_empty() => Self::from_json(&text),
            _ => Ok(Self::default()),
        }
    }
}

/// `A Π + Π Aᵀ + (α−ε) Π + Q − T D e^{αT} B M_U⁻¹ Bᵀ`.
pub fn lyapunov_residual_matrix(sys: &SystemDef, bundle: &GramianBundle) -> Mat {
    let a = sys.a();
    let pi = &bundle.pi;
    let beta = bundle.alpha - bundle.eps;
    a * pi + pi * a.transpose() + pi * beta + &bundle.q - sys.control_weight() * bundle.gain_scale()
}

/// Relative residual of the Lyapunov identity,
/// `‖R‖ / max(‖AΠ‖, ‖Q‖, 1)`.
pub fn lyapunov_residual(sys: &SystemDef, bundle: &GramianBundle) -> f64 {
    let r = lyapunov_residual_matrix(sys, bundle);
    let scale = norm2(&(sys.a() * &bundle.pi))
        .max(norm2(&bundle.q))
        .max(1.0);
    norm2(&r) / scale
}

/// Relative residual of
/// `Π⁻¹A + AᵀΠ⁻¹ − T D e^{αT} Π⁻¹BM_U⁻¹BᵀΠ⁻¹ + (α−ε)Π⁻¹ + Π⁻¹QΠ⁻¹ = 0`,
/// computed directly from `Π⁻¹`.
pub fn riccati_residual(sys: &SystemDef, bundle: &GramianBundle) -> f64 {
    let a = sys.a();
    let x = &bundle.pi_inv;
    let beta = bundle.alpha - bundle.eps;
    let xa = x * a;
    let xqx = x * &bundle.q * x;
    let r =
        &xa + xa.transpose() - x * sys.control_weight() * x * bundle.gain_scale() + x * beta + &xqx;
    let scale = norm2(&xa).max(norm2(&xqx)).max(1.0);
    norm2(&r) / scale
}

/// Smallest relative margins of the positivity statements.
#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    /// min over the grid of `λ_min(Λ(t) − e^{εt}J, J) / max(1, λ_max(Λ(t), J))`.
    pub lambda_grid_min: f64,
    /// `λ_min(Π − T J, J) / max(1, λ_max(Π, J))`.
    pub pi: f64,
    /// `λ_min(Q, J) / max(1, λ_max(Λ(T), J))`.
    pub q: f64,
    /// Whether `(ε, T)` is admissible, which is when `Q ⪰ 0` is guaranteed.
    pub q_applies: bool,
    /// `−T λ_max(Π⁻¹ − T⁻¹M_H, M_H)`; non-negative when `Π⁻¹ ⪯ T⁻¹M_H`.
    pub sandwich_upper: f64,
    /// `λ_max(Π, J)`, the measured constant in the lower sandwich bound
    /// `Π⁻¹ ⪰ λ_max(Π, J)⁻¹ M_H`.
    pub pi_norm: f64,
    /// `λ_min(Π⁻¹ − λ_max(Π, J)⁻¹ M_H, M_H) · λ_max(Π, J)`.
    pub sandwich_lower: f64,
}

impl PositivityReport {
    pub fn min_margin(&self) -> f64 {
        let mut m = self
            .lambda_grid_min
            .min(self.pi)
            .min(self.sandwich_upper)
            .min(self.sandwich_lower);
        if self.q_applies {
            m = m.min(self.q);
        }
        m
    }
}

fn rel_min(s: &Mat, scale_of: &Mat, j: &Mat) -> Result<f64> {
    let (lo, _) = sym_pencil_extremes(&symmetrize(s), j)?;
    let (_, top) = sym_pencil_extremes(&symmetrize(scale_of), j)?;
    Ok(lo / top.max(1.0))
}

/// `Λ(t_k)` on `grid` uniform points of `[0, T]`, by stepping the integral
/// term: `I(t + Δ) = I(t) + e^{−βt} exp(−At) I(Δ) exp(−Aᵀt)`.
pub fn lambda_grid(
    sys: &SystemDef,
    bundle: &GramianBundle,
    grid: usize,
) -> Result<Vec<(f64, Mat)>> {
    if grid < 2 {
        return Err(Error::domain("grid needs at least 2 points"));
    }
    let cert = &bundle.cert;
    let t_end = bundle.horizon;
    let beta = bundle.alpha - bundle.eps;
    let step = t_end / (grid - 1) as f64;
    let a = sys.a();
    let j = sys.j_state();
    let bjb = sys.control_weight();
    let coef = bundle.gain_scale() / t_end;
    let first = if coef == 0.0 {
        Mat::zeros(sys.n(), sys.n())
    } else {
        integrate_mat(
            |s| {
                let e = expm(a, -s).expect("finite generator");
                &e * &bjb * e.transpose() * (-beta * s).exp()
            },
            0.0,
            step,
            bundle.quad,
        )?
        .value
    };
    let mut integral = Mat::zeros(sys.n(), sys.n());
    let mut out = Vec::with_capacity(grid);
    for k in 0..grid {
        let t = if k == grid - 1 {
            t_end
        } else {
            k as f64 * step
        };
        let e = expm(a, -t)?;
        let remainder = &e * j * e.transpose() * (cert.c_alpha * (-beta * t).exp());
        out.push((t, symmetrize(&(&integral * coef + remainder))));
        if coef != 0.0 {
            integral += &e * &first * e.transpose() * (-beta * t).exp();
        }
    }
    Ok(out)
}

pub fn positivity_report(
    sys: &SystemDef,
    bundle: &GramianBundle,
    grid: usize,
) -> Result<PositivityReport> {
    let j = sys.j_state();
    let m_h = sys.state_metric().gram();
    let t = bundle.horizon;
    let mut lambda_grid_min = f64::INFINITY;
    for (tk, lam) in lambda_grid(sys, bundle, grid)? {
        let s = &lam - j * (bundle.eps * tk).exp();
        lambda_grid_min = lambda_grid_min.min(rel_min(&s, &lam, j)?);
    }
    let pi = rel_min(&(&bundle.pi - j * t), &bundle.pi, j)?;
    let q = rel_min(&bundle.q, &bundle.lambda_t, j)?;
    let q_applies = admissible(&bundle.cert, bundle.eps, t).verdict == Verdict::Ok;
    let (_, up) = sym_pencil_extremes(&symmetrize(&(&bundle.pi_inv - m_h / t)), m_h)?;
    // The pencil (Π⁻¹ − M_H/μ_max, M_H) has eigenvalues 1/μᵢ − 1/μ_max where
    // μᵢ are the eigenvalues of (Π, J); reading them off (Π, J) avoids the
    // error of the explicit inverse when Π is badly conditioned.
    let pencil = sym_pencil(&bundle.pi, j)?;
    let pi_norm = pencil.values.max();
    let low = pencil
        .values
        .iter()
        .map(|&mu| pi_norm / mu - 1.0)
        .fold(f64::INFINITY, f64::min);
    Ok(PositivityReport {
        lambda_grid_min,
        pi,
        q,
        q_applies,
        sandwich_upper: -up * t,
        pi_norm,
        sandwich_lower: low,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub spectral_abscissa: f64,
    /// Negative least-squares slope of `ln ‖exp(A_cl t)‖` over the fit interval.
    pub fitted_rate: f64,
    pub fit_interval: (f64, f64),
    pub predicted_rate: f64,
    /// Whether the norm left the floating-point range during the fit.
    pub overflow: bool,
    pub passed: bool,
}

/// A horizon long enough for the tail half of `[0, h]` to expose the
/// asymptotic rate: `40/|abscissa|`, clamped to `[2, 200]`.
pub fn default_horizon(sys: &SystemDef, law: &FeedbackLaw) -> Result<f64> {
    let a_cl = law.closed_loop(sys)?;
    let s = spectral_abscissa(&a_cl).abs().max(0.2);
    Ok((40.0 / s).clamp(2.0, 200.0))
}

pub fn closed_loop_report(
    sys: &SystemDef,
    law: &FeedbackLaw,
    horizon: f64,
    samples: usize,
    tol: &Tolerances,
) -> Result<DecayReport> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if samples < 10 {
        return Err(Error::domain("closed-loop fit needs at least 10 samples"));
    }
    let a_cl = law.closed_loop(sys)?;
    let abscissa = spectral_abscissa(&a_cl);
    let metric = sys.state_metric();
    let lo = 0.5 * horizon;
    let mut pts = Vec::with_capacity(samples);
    let mut overflow = false;
    for i in 0..samples {
        let t = lo + (horizon - lo) * i as f64 / (samples - 1) as f64;
        let norm = metric.op_norm(&expm(&a_cl, t)?);
        if norm.is_finite() && norm > 0.0 {
            pts.push((t, norm.ln()));
        } else {
            overflow = true;
        }
    }
    let fitted_rate = if pts.len() >= 2 {
        -slope(&pts)
    } else {
        -abscissa
    };
    let predicted = law.predicted_rate;
    let passed = !overflow
        && abscissa < 0.0
        && fitted_rate >= predicted - tol.decay
        && abscissa <= -predicted + tol.decay;
    Ok(DecayReport {
        spectral_abscissa: abscissa,
        fitted_rate,
        fit_interval: (lo, horizon),
        predicted_rate: predicted,
        overflow,
        passed,
    })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// max over trajectories and grid of `e^{(α−ε)t} V(t)/V(0) − 1`,
    /// `V = xᵀΠ⁻¹x`.
    pub decay_violation: f64,
    /// max over trajectories of `∫₀^∞ ‖Kx‖²_{M_U} / (D e^{αT} ‖x₀‖²_{M_H}) − 1`.
    pub energy_violation: f64,
}

impl EnergyReport {
    pub fn max_violation(&self) -> f64 {
        self.decay_violation.max(self.energy_violation)
    }
}

/// Quadratic-form decay and control-energy bound along `x0_count` random
/// trajectories (seeded). The energy integral is evaluated exactly through
/// the closed-loop Lyapunov equation.
pub fn energy_monotonicity(
    sys: &SystemDef,
    law: &FeedbackLaw,
    bundle: &GramianBundle,
    x0_count: usize,
    horizon: f64,
    seed: u64,
) -> Result<EnergyReport> {
    if x0_count == 0 {
        return Err(Error::domain("need at least one initial state"));
    }
    let a_cl = law.closed_loop(sys)?;
    let n = sys.n();
    let beta = bundle.alpha - bundle.eps;
    let metric = sys.state_metric();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0s: Vec<DVector<f64>> = (0..x0_count)
        .map(|_| {
            let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let nrm = metric.norm_sq(&v).sqrt();
            v / nrm
        })
        .collect();
    let grid = 100;
    let flows: Vec<(f64, Mat)> = (0..grid)
        .map(|i| {
            let t = horizon * i as f64 / (grid - 1) as f64;
            expm(&a_cl, t).map(|e| (t, e))
        })
        .collect::<Result<_>>()?;
    let quad_form = |x: &DVector<f64>| (x.transpose() * &bundle.pi_inv * x)[(0, 0)];
    let mut decay_violation = f64::NEG_INFINITY;
    for x0 in &x0s {
        let v0 = quad_form(x0);
        for (t, e) in &flows {
            let v = quad_form(&(e * x0));
            decay_violation = decay_violation.max((beta * t).exp() * v / v0 - 1.0);
        }
    }
    let bound_scale = bundle.gain_scale() / bundle.horizon;
    let k = &law.k;
    let energy = symmetrize(&(k.transpose() * sys.control_metric().gram() * k));
    let energy_violation = if crate::numerics::max_abs(&energy) == 0.0 {
        0.0
    } else {
        let w = solve_lyapunov(&a_cl, &energy)?;
        x0s.iter()
            .map(|x0| {
                let e = (x0.transpose() * &w * x0)[(0, 0)];
                let bound = bound_scale * metric.norm_sq(x0);
                if bound > 0.0 {
                    e / bound - 1.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(EnergyReport {
        decay_violation,
        energy_violation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub method: String,
    pub lyapunov_residual: Option<f64>,
    pub riccati_residual: Option<f64>,
    pub positivity_margins: Option<PositivityReport>,
    pub decay: DecayReport,
    pub energy: Option<EnergyReport>,
    /// Panel count at which the bundle checks ran.
    pub quad_panels: Option<usize>,
    pub verdicts: BTreeMap<String, bool>,
    pub passed: bool,
}

/// Options for [`verify_law`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Closed-loop fit horizon; `None` picks [`default_horizon`].
    pub horizon: Option<f64>,
    pub samples: usize,
    pub lambda_grid: usize,
    pub trajectories: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            horizon: None,
            samples: 60,
            lambda_grid: 20,
            trajectories: 8,
            seed: 0,
        }
    }
}

/// Upper limit of the panel doubling in [`verify_law`].
pub const MAX_PANELS: usize = 16384;

/// Runs every check that applies to the law. Mutated-family laws get the
/// bundle checks in addition to the closed-loop decay check; their bundle is
/// rebuilt with doubled panels until the Lyapunov residual meets its
/// tolerance or [`MAX_PANELS`] is reached.
pub fn verify_law(
    sys: &SystemDef,
    law: &FeedbackLaw,
    tol: &Tolerances,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let horizon = match opts.horizon {
        Some(h) => h,
        None => default_horizon(sys, law)?,
    };
    let decay = closed_loop_report(sys, law, horizon, opts.samples, tol)?;
    let mut verdicts = BTreeMap::new();
    verdicts.insert("decay".to_string(), decay.passed);
    let mut report = VerificationReport {
        method: law.method.to_string(),
        lyapunov_residual: None,
        riccati_residual: None,
        positivity_margins: None,
        decay,
        energy: None,
        quad_panels: None,
        verdicts,
        passed: false,
    };
    if let Some(bundle) = law.bundle_for(sys)? {
        let (bundle, lyap) = refine_bundle(sys, bundle, tol)?;
        report.quad_panels = Some(bundle.quad.panels);
        let ric = riccati_residual(sys, &bundle);
        let cond = condition_number(&bundle.pi);
        let pos = positivity_report(sys, &bundle, opts.lambda_grid)?;
        let energy = energy_monotonicity(
            sys,
            law,
            &bundle,
            opts.trajectories,
            bundle.horizon.max(horizon),
            opts.seed,
        )?;
        report
            .verdicts
            .insert("lyapunov".into(), lyap <= tol.lyapunov);
        report.verdicts.insert(
            "riccati".into(),
            ric <= tol.lyapunov.max(lyap) * tol.riccati_factor * cond * cond,
        );
        report
            .verdicts
            .insert("positivity".into(), pos.min_margin() >= -tol.margin);
        report
            .verdicts
            .insert("energy".into(), energy.max_violation() <= tol.energy);
        report.lyapunov_residual = Some(lyap);
        report.riccati_residual = Some(ric);
        report.positivity_margins = Some(pos);
        report.energy = Some(energy);
    }
    report.passed = report.verdicts.values().all(|&v| v);
    Ok(report)
}

/// Rebuilds the bundle with doubled panels until its Lyapunov residual is
/// within tolerance or [`MAX_PANELS`] is reached; returns the last residual.
pub fn refine_bundle(
    sys: &SystemDef,
    mut bundle: GramianBundle,
    tol: &Tolerances,
) -> Result<(GramianBundle, f64)> {
    let mut lyap = lyapunov_residual(sys, &bundle);
    while lyap > tol.lyapunov && bundle.quad.panels < MAX_PANELS {
        bundle = pi_integral(
            sys,
            &bundle.cert,
            bundle.eps,
            bundle.horizon,
            bundle.quad.doubled(),
        )?;
        lyap = lyapunov_residual(sys, &bundle);
    }
    Ok((bundle, lyap))
}

/// Spectral condition number of an SPD matrix.
pub fn condition_number(m: &Mat) -> f64 {
    let sv = m.singular_values();
    let hi = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let lo = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    hi / lo
}
