//! Matrix-valued quadrature on an interval.

use serde::{Deserialize, Serialize};

use super::Mat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum QuadRule {
    /// Composite Simpson, three nodes per panel.
    Simpson,
    /// Gauss–Legendre with `nodes` points on each panel (2–10).
    GaussLegendre { nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadSpec {
    #[serde(flatten)]
    pub rule: QuadRule,
    pub panels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec::simpson(256)
    }
}

impl QuadSpec {
    pub fn simpson(panels: usize) -> Self {
        QuadSpec {
            rule: QuadRule::Simpson,
            panels,
        }
    }

    pub fn gauss(panels: usize, nodes: usize) -> Self {
        QuadSpec {
            rule: QuadRule::GaussLegendre { nodes },
            panels,
        }
    }

    pub fn doubled(&self) -> Self {
        QuadSpec {
            rule: self.rule,
            panels: self.panels * 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels == 0 {
            return Err(Error::domain("quadrature needs at least one panel"));
        }
        if let QuadRule::GaussLegendre { nodes } = self.rule {
            if !(2..=10).contains(&nodes) {
                return Err(Error::domain(format!(
                    "Gauss-Legendre nodes per panel must be in 2..=10, got {nodes}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of [`integrate_mat`]: the approximation at the requested panel
/// count and the entrywise max deviation from the doubled-panel rule.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub value: Mat,
    pub err_estimate: f64,
}

/// Integrates `f` over `[a, b]`.
///
/// Simpson reuses the coarse nodes inside the doubled rule, so the error
/// estimate costs one extra evaluation per coarse node. Summation order is
/// fixed (left to right by node index).
pub fn integrate_mat<F>(f: F, a: f64, b: f64, spec: QuadSpec) -> Result<Quadrature>
where
    F: Fn(f64) -> Mat,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::domain(format!("invalid interval [{a}, {b}]")));
    }
    match spec.rule {
        QuadRule::Simpson => simpson_pair(&f, a, b, spec.panels),
        QuadRule::GaussLegendre { nodes } => {
            let (x, w) = gauss_legendre(nodes);
            let coarse = gauss_composite(&f, a, b, spec.panels, &x, &w, None)?;
            let shape = coarse.shape();
            let fine = gauss_composite(&f, a, b, spec.panels * 2, &x, &w, Some(shape))?;
            let err = max_abs_diff(&coarse, &fine);
            Ok(Quadrature {
                value: coarse,
                err_estimate: err,
            })
        }
    }
}

fn check_shape(m: &Mat, shape: &mut Option<(usize, usize)>) -> Result<()> {
    match shape {
        None => {
            *shape = Some(m.shape());
            Ok(())
        }
        Some(s) if *s == m.shape() => Ok(()),
        Some(s) => Err(Error::Shape(format!(
            "integrand changed shape from {:?} to {:?}",
            s,
            m.shape()
        ))),
    }
}

fn simpson_pair<F: Fn(f64) -> Mat>(f: &F, a: f64, b: f64, panels: usize) -> Result<Quadrature> {
    // Fine grid has 4·panels + 1 nodes; the coarse rule uses every other node.
    let fine_nodes = 4 * panels + 1;
    let h = (b - a) / (4 * panels) as f64;
    let mut shape = None;
    let mut coarse: Option<Mat> = None;
    let mut fine: Option<Mat> = None;
    for k in 0..fine_nodes {
        let s = if k == fine_nodes - 1 {
            b
        } else {
            a + k as f64 * h
        };
        let v = f(s);
        check_shape(&v, &mut shape)?;
        let w_fine = simpson_weight(k, fine_nodes);
        let w_coarse = if k % 2 == 0 {
            simpson_weight(k / 2, 2 * panels + 1)
        } else {
            0.0
        };
        accumulate(&mut fine, &v, w_fine);
        if w_coarse != 0.0 {
            accumulate(&mut coarse, &v, w_coarse);
        }
    }
    let coarse = coarse.expect("at least three nodes") * (2.0 * h / 3.0);
    let fine = fine.expect("at least five nodes") * (h / 3.0);
    let err = max_abs_diff(&coarse, &fine);
    Ok(Quadrature {
        value: coarse,
        err_estimate: err,
    })
}

fn simpson_weight(k: usize, nodes: usize) -> f64 {
    if k == 0 || k == nodes - 1 {
        1.0
    } else if k % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

fn accumulate(acc: &mut Option<Mat>, v: &Mat, w: f64) {
    match acc {
        None => *acc = Some(v * w),
        Some(m) => *m += v * w,
    }
}

fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn gauss_composite<F: Fn(f64) -> Mat>(
    f: &F,
    a: f64,
    b: f64,
    panels: usize,
    x: &[f64],
    w: &[f64],
    shape: Option<(usize, usize)>,
) -> Result<Mat> {
    let mut shape = shape;
    let width = (b - a) / panels as f64;
    let mut acc: Option<Mat> = None;
    for p in 0..panels {
        let left = a + p as f64 * width;
        let mid = left + 0.5 * width;
        for (xi, wi) in x.iter().zip(w) {
            let v = f(mid + 0.5 * width * xi);
            check_shape(&v, &mut shape)?;
            accumulate(&mut acc, &v, 0.5 * width * wi);
        }
    }
    Ok(acc.expect("panels >= 1"))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_weights_sum_to_two_and_integrate_polynomials() {
        for n in 2..=10 {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}");
            // exact for degree 2n-1
            let deg = 2 * n - 1;
            let approx: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(deg as i32 - 1))
                .sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((approx - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let f = |_s: f64| Mat::identity(1, 1);
        assert!(integrate_mat(f, 0.0, 1.0, QuadSpec::simpson(0)).is_err());
        assert!(integrate_mat(f, 0.0, 1.0, QuadSpec::gauss(4, 11)).is_err());
        assert!(integrate_mat(f, 1.0, 0.0, QuadSpec::simpson(4)).is_err());
    }

    #[test]
    fn shape_change_is_an_error() {
        let f = |s: f64| {
            if s < 0.5 {
                Mat::zeros(1, 1)
            } else {
                Mat::zeros(2, 2)
            }
        };
        assert!(matches!(
            integrate_mat(f, 0.0, 1.0, QuadSpec::simpson(4)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_length_interval() {
        let q = integrate_mat(|_| Mat::identity(2, 2), 1.0, 1.0, QuadSpec::default()).unwrap();
        assert_eq!(q.value, Mat::zeros(2, 2));
    }
}
