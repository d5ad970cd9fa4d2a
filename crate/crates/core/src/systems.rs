//! Finite-dimensional realizations `x' = A x + B u` with weighted state and
//! control inner products. Also holds the example generators and the PBH
//! analysis that yields the best achievable decay rate.
//!
//! Duality convention: the pairing between a space and its dual is the plain
//! bilinear form with transposes as adjoints. The Riesz maps are the inverse
//! metric matrices. So `‖φ‖²_{H'} = φᵀ M_H⁻¹ φ` and the observation of the
//! dual state `φ` at time `s` is `Bᵀ exp(Aᵀ s) φ`.

use std::fmt;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{
    check_symmetric, complex_rank, eigenvalues, mat_from_rows, mat_to_rows, norm2, Mat, Metric,
};

#[derive(Debug, Clone)]
pub struct SystemDef {
    a: Mat,
    b: Mat,
    state_metric: Metric,
    control_metric: Metric,
    label: String,
}

/// Wire form of a system document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "M_H", default, skip_serializing_if = "Option::is_none")]
    m_h: Option<Vec<Vec<f64>>>,
    #[serde(rename = "M_U", default, skip_serializing_if = "Option::is_none")]
    m_u: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

fn check_rows(rows: &[Vec<f64>], r: usize, c: usize, field: &str) -> Result<Mat> {
    if rows.len() != r {
        return Err(Error::field(
            field,
            format!("expected {r} rows, got {}", rows.len()),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::field(
                field,
                format!("row {i} has {} entries, expected {c}", row.len()),
            ));
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::field(
                field,
                format!("entry ({i}, {j}) is not finite"),
            ));
        }
    }
    if r == 0 || c == 0 {
        return Ok(Mat::zeros(r, c));
    }
    mat_from_rows(rows).map_err(|e| Error::field(field, e.to_string()))
}

fn metric_from(m: Mat, field: &str) -> Result<Metric> {
    check_symmetric(&m, field).map_err(|e| Error::field(field, e.to_string()))?;
    Metric::new(m, field)
}

impl SystemDef {
    /// Identity metrics on both spaces.
    pub fn new(a: Mat, b: Mat, label: impl Into<String>) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        Self::with_metrics(a, b, Mat::identity(n, n), Mat::identity(m, m), label)
    }

    pub fn with_metrics(
        a: Mat,
        b: Mat,
        m_h: Mat,
        m_u: Mat,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::field("n", "state dimension must be at least 1"));
        }
        if a.ncols() != n {
            return Err(Error::field(
                "A",
                format!("expected {n}x{n}, got {}x{}", n, a.ncols()),
            ));
        }
        if b.nrows() != n {
            return Err(Error::field(
                "B",
                format!("expected {n} rows, got {}", b.nrows()),
            ));
        }
        let m = b.ncols();
        if m == 0 {
            return Err(Error::field("m", "control dimension must be at least 1"));
        }
        if m_h.shape() != (n, n) {
            return Err(Error::field("M_H", format!("expected {n}x{n}")));
        }
        if m_u.shape() != (m, m) {
            return Err(Error::field("M_U", format!("expected {m}x{m}")));
        }
        for (field, mat) in [("A", &a), ("B", &b), ("M_H", &m_h), ("M_U", &m_u)] {
            if mat.iter().any(|x| !x.is_finite()) {
                return Err(Error::field(field, "non-finite entry"));
            }
        }
        Ok(SystemDef {
            a,
            b,
            state_metric: metric_from(m_h, "M_H")?,
            control_metric: metric_from(m_u, "M_U")?,
            label: label.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Generator.
    pub fn a(&self) -> &Mat {
        &self.a
    }

    /// Control operator.
    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn state_metric(&self) -> &Metric {
        &self.state_metric
    }

    pub fn control_metric(&self) -> &Metric {
        &self.control_metric
    }

    /// Riesz map of the state space, `J₂ = M_H⁻¹`.
    pub fn j_state(&self) -> &Mat {
        self.state_metric.inverse()
    }

    /// Riesz map of the control space, `J₁ = M_U⁻¹`.
    pub fn j_control(&self) -> &Mat {
        self.control_metric.inverse()
    }

    /// `B M_U⁻¹ Bᵀ`.
    pub fn control_weight(&self) -> Mat {
        &self.b * self.j_control() * self.b.transpose()
    }

    /// Same realization in new coordinates `x̃ = Q x` for orthogonal `Q`
    /// (metrics transformed congruently).
    pub fn orthogonal_similarity(&self, q: &Mat) -> Result<Self> {
        let a = q * &self.a * q.transpose();
        let b = q * &self.b;
        let m_h = q * self.state_metric.gram() * q.transpose();
        Self::with_metrics(
            a,
            b,
            crate::numerics::symmetrize(&m_h),
            self.control_metric.gram().clone(),
            self.label.clone(),
        )
    }

    /// The same system with generator `A + θI`.
    pub fn shifted(&self, theta: f64) -> Result<Self> {
        let n = self.n();
        Self::with_metrics(
            &self.a + Mat::identity(n, n) * theta,
            self.b.clone(),
            self.state_metric.gram().clone(),
            self.control_metric.gram().clone(),
            self.label.clone(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        load_system(text)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SystemDoc {
            n: self.n(),
            m: self.m(),
            a: mat_to_rows(&self.a),
            b: mat_to_rows(&self.b),
            m_h: Some(mat_to_rows(self.state_metric.gram())),
            m_u: Some(mat_to_rows(self.control_metric.gram())),
            label: Some(self.label.clone()),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Parses and validates a system document.
pub fn load_system(document: &str) -> Result<SystemDef> {
    let doc: SystemDoc = serde_json::from_str(document)?;
    let n = doc.n;
    let m = doc.m;
    if n == 0 {
        return Err(Error::field("n", "must be at least 1"));
    }
    if m == 0 {
        return Err(Error::field("m", "must be at least 1"));
    }
    let a = check_rows(&doc.a, n, n, "A")?;
    let b = check_rows(&doc.b, n, m, "B")?;
    let m_h = match &doc.m_h {
        Some(rows) => check_rows(rows, n, n, "M_H")?,
        None => Mat::identity(n, n),
    };
    let m_u = match &doc.m_u {
        Some(rows) => check_rows(rows, m, m, "M_U")?,
        None => Mat::identity(m, m),
    };
    SystemDef::with_metrics(a, b, m_h, m_u, doc.label.unwrap_or_default())
}

/// Example families.
#[derive(Debug, Clone, PartialEq)]
pub enum Example {
    /// `A = [[a]]`, `B = [[1]]`.
    ScalarUnstable { a: f64 },
    /// `A = diag(−rates)`, `B = 0` (one control column).
    StableDiagonal { rates: Vec<f64> },
    /// Periodic upwind advection on `n` cells of the unit circle, control
    /// injected on cells `window_start .. window_start + window_len`.
    Transport1d {
        n: usize,
        speed: f64,
        window_start: usize,
        window_len: usize,
    },
    /// `k` unit masses joined by unit springs, fixed at both ends, viscous
    /// damping on every mass, force control on the first mass.
    /// State is `(positions, velocities)`.
    WaveChain { masses: usize, damping: f64 },
    /// Uncontrollable block with spectral abscissa exactly `−margin` plus a
    /// controllable block with unstable modes, in random orthogonal
    /// coordinates.
    RandStabilizable {
        n: usize,
        m: usize,
        n_unc: usize,
        margin: f64,
        seed: u64,
    },
}

impl Example {
    pub fn name(&self) -> &'static str {
        match self {
            Example::ScalarUnstable { .. } => "scalar-unstable",
            Example::StableDiagonal { .. } => "stable-diagonal",
            Example::Transport1d { .. } => "transport-1d",
            Example::WaveChain { .. } => "wave-chain",
            Example::RandStabilizable { .. } => "rand-stabilizable",
        }
    }
}

pub fn make_example(example: &Example) -> Result<SystemDef> {
    match example {
        Example::ScalarUnstable { a } => {
            if !a.is_finite() {
                return Err(Error::domain("scalar-unstable: a must be finite"));
            }
            SystemDef::new(
                DMatrix::from_element(1, 1, *a),
                DMatrix::from_element(1, 1, 1.0),
                "scalar-unstable",
            )
        }
        Example::StableDiagonal { rates } => {
            if rates.is_empty() {
                return Err(Error::domain("stable-diagonal: need at least one rate"));
            }
            if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(Error::domain("stable-diagonal: rates must be positive"));
            }
            let n = rates.len();
            let a = Mat::from_fn(n, n, |i, j| if i == j { -rates[i] } else { 0.0 });
            SystemDef::new(a, Mat::zeros(n, 1), "stable-diagonal")
        }
        Example::Transport1d {
            n,
            speed,
            window_start,
            window_len,
        } => transport(*n, *speed, *window_start, *window_len),
        Example::WaveChain { masses, damping } => wave_chain(*masses, *damping),
        Example::RandStabilizable {
            n,
            m,
            n_unc,
            margin,
            seed,
        } => rand_stabilizable(*n, *m, *n_unc, *margin, *seed),
    }
}

fn transport(n: usize, speed: f64, start: usize, len: usize) -> Result<SystemDef> {
    if n < 2 {
        return Err(Error::domain("transport-1d: need at least 2 cells"));
    }
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::domain("transport-1d: speed must be positive"));
    }
    if len == 0 || start + len > n {
        return Err(Error::domain(format!(
            "transport-1d: control window {start}..{} out of range 0..{n}",
            start + len
        )));
    }
    let c = speed * n as f64;
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = -c;
        a[(i, (i + n - 1) % n)] += c;
    }
    let b = Mat::from_fn(n, 1, |i, _| {
        if i >= start && i < start + len {
            1.0
        } else {
            0.0
        }
    });
    SystemDef::new(a, b, "transport-1d")
}

fn wave_chain(k: usize, damping: f64) -> Result<SystemDef> {
    if k == 0 {
        return Err(Error::domain("wave-chain: need at least one mass"));
    }
    if !(damping.is_finite() && damping >= 0.0) {
        return Err(Error::domain("wave-chain: damping must be non-negative"));
    }
    let n = 2 * k;
    let mut a = Mat::zeros(n, n);
    for i in 0..k {
        a[(i, k + i)] = 1.0;
        a[(k + i, i)] = -2.0;
        if i > 0 {
            a[(k + i, i - 1)] = 1.0;
        }
        if i + 1 < k {
            a[(k + i, i + 1)] = 1.0;
        }
        a[(k + i, k + i)] = -damping;
    }
    let mut b = Mat::zeros(n, 1);
    b[(k, 0)] = 1.0;
    SystemDef::new(a, b, "wave-chain")
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-distributed orthogonal matrix from the QR of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let qr = gaussian(rng, n, n).qr();
    let (q, r) = qr.unpack();
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

fn rand_stabilizable(
    n: usize,
    m: usize,
    n_unc: usize,
    margin: f64,
    seed: u64,
) -> Result<SystemDef> {
    if !(margin.is_finite() && margin > 0.0) {
        return Err(Error::domain("rand-stabilizable: margin must be positive"));
    }
    if n_unc == 0 || n_unc >= n {
        return Err(Error::domain(format!(
            "rand-stabilizable: need 1 <= n_unc < n, got n_unc={n_unc}, n={n}"
        )));
    }
    if m == 0 {
        return Err(Error::domain(
            "rand-stabilizable: need at least one control",
        ));
    }
    let nc = n - n_unc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Uncontrollable block: normal, real parts in [margin, margin + 0.4],
    // the first one pinned at exactly margin.
    let mut unc = Mat::zeros(n_unc, n_unc);
    let mut unc_eigs: Vec<Complex<f64>> = Vec::new();
    let mut i = 0;
    while i < n_unc {
        let re = if i == 0 {
            margin
        } else {
            margin + 0.4 * rng.random::<f64>()
        };
        if i + 1 < n_unc && rng.random::<f64>() < 0.5 {
            let im = 0.3 + rng.random::<f64>();
            unc[(i, i)] = -re;
            unc[(i + 1, i + 1)] = -re;
            unc[(i, i + 1)] = im;
            unc[(i + 1, i)] = -im;
            unc_eigs.push(Complex::new(-re, im));
            unc_eigs.push(Complex::new(-re, -im));
            i += 2;
        } else {
            unc[(i, i)] = -re;
            unc_eigs.push(Complex::new(-re, 0.0));
            i += 1;
        }
    }

    // Controllable block: Gaussian, shifted so its abscissa is 0.5, resampled
    // until its spectrum keeps a distance from the uncontrollable one and the
    // pair is comfortably controllable.
    let mut ctrl;
    let mut bc;
    let mut attempts = 0;
    loop {
        attempts += 1;
        ctrl = gaussian(&mut rng, nc, nc) * (1.0 / (nc as f64).sqrt());
        let shift = 0.5 - crate::numerics::spectral_abscissa(&ctrl);
        for d in 0..nc {
            ctrl[(d, d)] += shift;
        }
        bc = gaussian(&mut rng, nc, m);
        let eigs = eigenvalues(&ctrl);
        let separated = eigs
            .iter()
            .all(|z| unc_eigs.iter().all(|u| (z - u).norm() > 0.1));
        let distinct = eigs
            .iter()
            .enumerate()
            .all(|(p, z)| eigs.iter().skip(p + 1).all(|w| (z - w).norm() > 1e-3));
        let well_controllable = eigs.iter().all(|&lam| {
            let pbh = DMatrix::from_fn(nc, nc + m, |r, c| {
                if c < nc {
                    Complex::new(ctrl[(r, c)], 0.0)
                        - if r == c { lam } else { Complex::new(0.0, 0.0) }
                } else {
                    Complex::new(bc[(r, c - nc)], 0.0)
                }
            });
            let sv = pbh.singular_values();
            sv.iter().fold(f64::INFINITY, |a, &b| a.min(b)) > 0.05
        });
        if (separated && distinct && well_controllable) || attempts > 200 {
            break;
        }
    }

    let mut a = Mat::zeros(n, n);
    a.view_mut((0, 0), (nc, nc)).copy_from(&ctrl);
    a.view_mut((nc, nc), (n_unc, n_unc)).copy_from(&unc);
    // weak one-way coupling from the uncontrollable block into the controllable one
    let coupling = gaussian(&mut rng, nc, n_unc) * 0.2;
    a.view_mut((0, nc), (nc, n_unc)).copy_from(&coupling);
    let mut b = Mat::zeros(n, m);
    b.view_mut((0, 0), (nc, m)).copy_from(&bc);

    let q = random_orthogonal(&mut rng, n);
    let a = &q * a * q.transpose();
    let b = &q * b;
    SystemDef::new(a, b, format!("rand-stabilizable(seed={seed})"))
}

/// Best achievable decay rate: finite, or unbounded for controllable pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BestRate {
    Finite(f64),
    Unbounded,
}

impl BestRate {
    pub fn value(&self) -> f64 {
        match self {
            BestRate::Finite(v) => *v,
            BestRate::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, BestRate::Finite(_))
    }
}

impl fmt::Display for BestRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BestRate::Finite(v) => write!(f, "{v}"),
            BestRate::Unbounded => write!(f, "+inf"),
        }
    }
}

impl Serialize for BestRate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BestRate::Finite(v) => s.serialize_f64(*v),
            BestRate::Unbounded => s.serialize_str("+inf"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UncontrollableMode {
    pub re: f64,
    pub im: f64,
    /// `n − rank[A − λI, B]`.
    pub defect: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControllabilityReport {
    pub controllable: bool,
    pub uncontrollable_modes: Vec<UncontrollableMode>,
    pub omega_star: BestRate,
}

impl ControllabilityReport {
    pub fn stabilizable(&self) -> bool {
        self.omega_star.value() > 0.0
    }
}

/// PBH analysis at rank tolerance `1e−8·‖A‖`.
pub fn analyze(sys: &SystemDef) -> ControllabilityReport {
    let n = sys.n();
    let m = sys.m();
    let a = sys.a();
    let b = sys.b();
    let tol = 1e-8 * norm2(a);
    let mut modes = Vec::new();
    for lam in eigenvalues(a) {
        let pbh = DMatrix::from_fn(n, n + m, |r, c| {
            if c < n {
                let diag = if r == c { lam } else { Complex::new(0.0, 0.0) };
                Complex::new(a[(r, c)], 0.0) - diag
            } else {
                Complex::new(b[(r, c - n)], 0.0)
            }
        });
        let rank = complex_rank(&pbh, tol);
        if rank < n {
            modes.push(UncontrollableMode {
                re: lam.re,
                im: lam.im,
                defect: n - rank,
            });
        }
    }
    modes.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let omega_star = if modes.is_empty() {
        BestRate::Unbounded
    } else {
        BestRate::Finite(modes.iter().map(|md| -md.re).fold(f64::INFINITY, f64::min))
    };
    ControllabilityReport {
        controllable: modes.is_empty(),
        uncontrollable_modes: modes,
        omega_star,
    }
}
