//! Command-line front end. Every subcommand writes JSON or CSV either to
//! `--out` (atomically) or to stdout, and reports through the exit code:
//! 0 success, 1 verdict failure, 2 usage or input error, 3 numerical failure.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::{
    gain_norm, komornik_feedback, lqr_feedback, lqr_riccati, synthesize_for_rate,
    synthesize_general, synthesize_main, urquiza_feedback, FeedbackLaw, DEFAULT_T_FACTOR,
};
use crate::gramian::{admissible, pi_integral, Verdict};
use crate::numerics::{spectral_abscissa, QuadSpec};
use crate::observability::{
    certify_static, constants_from_feedback, static_to_dynamic, validate_certificate,
    ObservabilityCertificate, StaticCert, StaticOutcome,
};
use crate::systems::{analyze, load_system, make_example, BestRate, Example, SystemDef};
use crate::verify::{
    closed_loop_report, default_horizon, refine_bundle, verify_law, Tolerances, VerifyOptions,
};

/// First line of every CSV output.
pub const CSV_VERSION_LINE: &str = "# stabkit-v1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "stabkit",
    version,
    about = "Stabilizing feedback from weak observability certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a built-in example system as JSON.
    Example(ExampleArgs),
    /// Produce a static or dynamic observability certificate.
    Certify(CertifyArgs),
    /// Synthesize a feedback law.
    Synthesize(SynthesizeArgs),
    /// Run the verification suite on a law.
    Verify(VerifyArgs),
    /// Mutated-Gramian laws over a grid of (T, eps).
    Sweep(SweepArgs),
    /// Several synthesis methods side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExampleName {
    ScalarUnstable,
    StableDiagonal,
    #[value(name = "transport-1d")]
    Transport1d,
    WaveChain,
    RandStabilizable,
}

#[derive(Debug, Args)]
struct ExampleArgs {
    #[arg(long)]
    name: ExampleName,
    /// scalar-unstable: the entry of `A`.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    a: f64,
    /// stable-diagonal: comma-separated decay rates.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    rates: Vec<f64>,
    /// transport-1d and rand-stabilizable: state dimension.
    #[arg(long)]
    n: Option<usize>,
    /// rand-stabilizable: number of controls.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// rand-stabilizable: size of the uncontrollable block.
    #[arg(long, default_value_t = 1)]
    n_unc: usize,
    /// rand-stabilizable: decay rate of the uncontrollable block.
    #[arg(long, default_value_t = 0.8)]
    margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long, default_value_t = 0)]
    window_start: usize,
    #[arg(long)]
    window_len: Option<usize>,
    #[arg(long, default_value_t = 3)]
    masses: usize,
    #[arg(long, default_value_t = 0.1)]
    damping: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A dynamic certificate either from a file or from `--alpha --D --C`.
#[derive(Debug, Args)]
struct CertSource {
    #[arg(long)]
    cert: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "D")]
    d: Option<f64>,
    #[arg(long = "C")]
    c: Option<f64>,
}

#[derive(Debug, Args)]
struct QuadArgs {
    /// Composite Simpson panels.
    #[arg(long, default_value_t = 256)]
    panels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CertifyMode {
    Static,
    Dynamic,
    FromFeedback,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long, value_enum, default_value = "static")]
    mode: CertifyMode,
    /// Static horizon.
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[command(flatten)]
    source: CertSource,
    /// from-feedback: law whose gain supplies the constants (LQR when absent).
    #[arg(long)]
    law: Option<PathBuf>,
    /// from-feedback: decay rate the gain must beat.
    #[arg(long)]
    theta: Option<f64>,
    /// dynamic: end of the validation interval.
    #[arg(long)]
    horizon: Option<f64>,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Main,
    General,
    Rate,
    Komornik,
    Urquiza,
    Lqr,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Main => "main",
            MethodArg::General => "general",
            MethodArg::Rate => "rate",
            MethodArg::Komornik => "komornik",
            MethodArg::Urquiza => "urquiza",
            MethodArg::Lqr => "lqr",
        }
    }
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long, value_enum, default_value = "main")]
    method: MethodArg,
    #[command(flatten)]
    source: CertSource,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    law: PathBuf,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    system: PathBuf,
    #[command(flatten)]
    source: CertSource,
    /// `a:b:n`, n evenly spaced horizons.
    #[arg(long = "T-grid")]
    t_grid: String,
    /// `a:b:n`; when absent each horizon uses `eps = T⁻¹ ln C`.
    #[arg(long)]
    eps_grid: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    system: PathBuf,
    /// Comma-separated subset of main, general, rate, komornik, urquiza, lqr.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "main,rate,komornik,urquiza,lqr"
    )]
    methods: Vec<String>,
    #[command(flatten)]
    source: CertSource,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long)]
    horizon: Option<f64>,
    /// Append a synthesis wall-time column (makes the output non-reproducible).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = Tolerances::from_env().and_then(|tol| match cli.command {
        Command::Example(a) => cmd_example(a),
        Command::Certify(a) => cmd_certify(a, &tol),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Verify(a) => cmd_verify(a, &tol),
        Command::Sweep(a) => cmd_sweep(a, &tol),
        Command::Compare(a) => cmd_compare(a, &tol),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("stabkit: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code of a failed run.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn read_system(path: &Path) -> Result<SystemDef> {
    load_system(&read(path)?)
}

/// Writes through a temporary file in the target directory, then renames.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn quad_spec(q: &QuadArgs) -> Result<QuadSpec> {
    if q.panels < 2 {
        return Err(Error::field("panels", "need at least 2 panels"));
    }
    Ok(QuadSpec::simpson(q.panels))
}

impl CertSource {
    fn given(&self) -> bool {
        self.cert.is_some() || self.alpha.is_some() || self.d.is_some() || self.c.is_some()
    }

    fn load(&self) -> Result<ObservabilityCertificate> {
        match (&self.cert, self.alpha, self.d, self.c) {
            (Some(path), None, None, None) => ObservabilityCertificate::from_json(&read(path)?),
            (None, Some(alpha), Some(d), Some(c)) => ObservabilityCertificate::new(alpha, d, c),
            (Some(_), ..) => Err(Error::domain(
                "give either --cert or --alpha/--D/--C, not both",
            )),
            _ => Err(Error::domain(
                "a certificate needs --cert or all of --alpha, --D, --C",
            )),
        }
    }
}

fn need(v: Option<f64>, flag: &str) -> Result<f64> {
    v.ok_or_else(|| Error::domain(format!("missing required flag {flag}")))
}

/// Parses `a:b:n` into `n` evenly spaced points.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::domain(format!("grid must look like a:b:n, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect())
}

fn cmd_example(a: ExampleArgs) -> Result<i32> {
    let ex = match a.name {
        ExampleName::ScalarUnstable => Example::ScalarUnstable { a: a.a },
        ExampleName::StableDiagonal => Example::StableDiagonal { rates: a.rates },
        ExampleName::Transport1d => {
            let n = a.n.unwrap_or(16);
            Example::Transport1d {
                n,
                speed: a.speed,
                window_start: a.window_start,
                window_len: a.window_len.unwrap_or((n / 4).max(1)),
            }
        }
        ExampleName::WaveChain => Example::WaveChain {
            masses: a.masses,
            damping: a.damping,
        },
        ExampleName::RandStabilizable => Example::RandStabilizable {
            n: a.n.unwrap_or(6),
            m: a.m,
            n_unc: a.n_unc,
            margin: a.margin,
            seed: a.seed,
        },
    };
    let sys = make_example(&ex)?;
    let mut text = sys.to_json()?;
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_certify(a: CertifyArgs, tol: &Tolerances) -> Result<i32> {
    let sys = read_system(&a.system)?;
    let quad = quad_spec(&a.quad)?;
    match a.mode {
        CertifyMode::Static => {
            let t = need(a.t, "--T")?;
            match certify_static(&sys, t, a.delta, quad)? {
                StaticOutcome::Feasible(cert) => {
                    emit_json(a.out.as_deref(), &cert)?;
                    Ok(EXIT_OK)
                }
                StaticOutcome::Infeasible { kernel_excess } => {
                    eprintln!(
                        "stabkit: no static certificate with delta = {} at T = {t}: the unobserved directions \
                         grow by {kernel_excess:.6e} beyond delta",
                        a.delta
                    );
                    Ok(EXIT_VERDICT)
                }
            }
        }
        CertifyMode::Dynamic => {
            let cert = if a.source.alpha.is_some() || a.source.d.is_some() || a.source.c.is_some() {
                let mut cert = a.source.load()?;
                let span = match a.horizon {
                    Some(h) => h,
                    None => 5.0 * (cert.c_alpha.ln() + std::f64::consts::LN_2) / cert.alpha,
                };
                cert.grid = validate_certificate(&sys, &cert, span, 51, quad)?.grid;
                cert
            } else {
                let st = match (&a.source.cert, a.t) {
                    (Some(path), _) => serde_json::from_str::<StaticCert>(&read(path)?)?,
                    (None, Some(t)) => match certify_static(&sys, t, a.delta, quad)? {
                        StaticOutcome::Feasible(c) => c,
                        StaticOutcome::Infeasible { kernel_excess } => {
                            eprintln!("stabkit: static certificate infeasible (excess {kernel_excess:.6e})");
                            return Ok(EXIT_VERDICT);
                        }
                    },
                    (None, None) => {
                        return Err(Error::domain(
                            "dynamic mode needs --alpha/--D/--C, a static --cert, or --T to certify first",
                        ))
                    }
                };
                static_to_dynamic(&sys, &st, quad)?
            };
            emit_json(a.out.as_deref(), &cert)?;
            Ok(verdict_code(
                cert.min_margin().is_none_or(|m| m >= -tol.margin),
            ))
        }
        CertifyMode::FromFeedback => {
            let (k, theta) = match &a.law {
                Some(path) => {
                    let law = FeedbackLaw::from_json(&read(path)?)?;
                    let theta = match a.theta {
                        Some(th) => th,
                        None => -0.5 * spectral_abscissa(&law.closed_loop(&sys)?),
                    };
                    (law.k, theta)
                }
                None => {
                    let theta = need(a.theta, "--theta (required without --law)")?;
                    (lqr_riccati(&sys.shifted(theta)?)?.k, theta)
                }
            };
            let cert = constants_from_feedback(&sys, &k, theta)?;
            emit_json(a.out.as_deref(), &cert)?;
            Ok(EXIT_OK)
        }
    }
}

fn verdict_code(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_VERDICT
    }
}

#[allow(clippy::too_many_arguments)]
fn synthesize(
    sys: &SystemDef,
    method: MethodArg,
    source: &CertSource,
    t: Option<f64>,
    eps: Option<f64>,
    mu: Option<f64>,
    omega: Option<f64>,
    quad: QuadSpec,
) -> Result<FeedbackLaw> {
    match method {
        MethodArg::Main => synthesize_main(sys, &source.load()?, need(t, "--T")?, quad),
        MethodArg::General => synthesize_general(
            sys,
            &source.load()?,
            need(eps, "--eps")?,
            need(t, "--T")?,
            quad,
        ),
        MethodArg::Rate => synthesize_for_rate(sys, need(mu, "--mu")?, quad),
        MethodArg::Komornik => {
            komornik_feedback(sys, need(omega, "--omega")?, need(t, "--T")?, quad)
        }
        MethodArg::Urquiza => urquiza_feedback(sys, need(omega, "--omega")?, quad),
        MethodArg::Lqr => lqr_feedback(sys),
    }
}

fn cmd_synthesize(a: SynthesizeArgs) -> Result<i32> {
    let sys = read_system(&a.system)?;
    let quad = quad_spec(&a.quad)?;
    let law = synthesize(&sys, a.method, &a.source, a.t, a.eps, a.mu, a.omega, quad)?;
    let mut text = law.to_json()?;
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs, tol: &Tolerances) -> Result<i32> {
    let sys = read_system(&a.system)?;
    let law = FeedbackLaw::from_json(&read(&a.law)?)?;
    let opts = VerifyOptions {
        horizon: a.horizon,
        seed: a.seed,
        ..VerifyOptions::default()
    };
    let report = verify_law(&sys, &law, tol, &opts)?;
    emit_json(a.out.as_deref(), &report)?;
    Ok(verdict_code(report.passed))
}

/// Shortest round-trip text, switching to exponent form for very small or
/// large magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "{CSV_VERSION_LINE}")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(out)
}

/// Outcome of one admissible sweep point.
struct SweepPoint {
    predicted: f64,
    fitted: f64,
    abscissa: f64,
    lyap: f64,
    gain: f64,
    pass: bool,
}

fn sweep_point(
    sys: &SystemDef,
    cert: &ObservabilityCertificate,
    eps: f64,
    t: f64,
    horizon: Option<f64>,
    quad: QuadSpec,
    tol: &Tolerances,
) -> Result<SweepPoint> {
    let bundle = pi_integral(sys, cert, eps, t, quad)?;
    let (bundle, lyap) = refine_bundle(sys, bundle, tol)?;
    let law = synthesize_general(sys, cert, eps, t, bundle.quad)?;
    let h = match horizon {
        Some(h) => h,
        None => default_horizon(sys, &law)?,
    };
    let decay = closed_loop_report(sys, &law, h, VerifyOptions::default().samples, tol)?;
    Ok(SweepPoint {
        predicted: law.predicted_rate,
        fitted: decay.fitted_rate,
        abscissa: decay.spectral_abscissa,
        lyap,
        gain: gain_norm(&law),
        pass: decay.passed && lyap <= tol.lyapunov,
    })
}

fn cmd_sweep(a: SweepArgs, tol: &Tolerances) -> Result<i32> {
    let sys = read_system(&a.system)?;
    let cert = a.source.load()?;
    let quad = quad_spec(&a.quad)?;
    let ts = parse_grid(&a.t_grid)?;
    let eps_grid = a.eps_grid.as_deref().map(parse_grid).transpose()?;
    let header = [
        "T",
        "eps",
        "admissibility",
        "predicted_rate",
        "fitted_rate",
        "abscissa",
        "lyapunov_residual",
        "gain_norm",
        "pass",
        "reason",
    ];
    let mut rows = Vec::new();
    let mut admissible_points = 0usize;
    let mut all_pass = true;
    for &t in &ts {
        let epss = match &eps_grid {
            Some(g) => g.clone(),
            None => vec![admissible(&cert, 0.0, t).eps_hat.max(0.0)],
        };
        for eps in epss {
            let adm = admissible(&cert, eps, t);
            let mut row = vec![num(t), num(eps), adm.verdict.to_string()];
            if adm.verdict != Verdict::Ok {
                let reason = match adm.verdict {
                    Verdict::OutsideWindow => format!("T <= ln C / alpha = {}", adm.window_start),
                    _ => format!("eps * T < ln C = {}", cert.c_alpha.ln()),
                };
                row.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                row.extend(["false".to_string(), reason]);
                rows.push(row);
                continue;
            }
            admissible_points += 1;
            match sweep_point(&sys, &cert, eps, t, a.horizon, quad, tol) {
                Ok(p) => {
                    all_pass &= p.pass;
                    row.extend([
                        num(p.predicted),
                        num(p.fitted),
                        num(p.abscissa),
                        num(p.lyap),
                        num(p.gain),
                        p.pass.to_string(),
                        String::new(),
                    ]);
                }
                Err(e) => {
                    all_pass = false;
                    row.extend([
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]);
                    row.extend(["false".to_string(), e.to_string()]);
                }
            }
            rows.push(row);
        }
    }
    emit(a.out.as_deref(), &csv_bytes(&header, &rows)?)?;
    Ok(verdict_code(admissible_points > 0 && all_pass))
}

/// Certificate for `main`/`general` in `compare` when none is supplied: an
/// LQR gain for `A + θI` with `θ` half the best rate (capped at 1) gives the
/// constants.
fn auto_certificate(sys: &SystemDef) -> Result<ObservabilityCertificate> {
    let report = analyze(sys);
    if !report.stabilizable() {
        return Err(Error::domain("the pair (A, B) is not stabilizable"));
    }
    let theta = match report.omega_star {
        BestRate::Finite(w) => (0.5 * w).min(1.0),
        BestRate::Unbounded => 1.0,
    };
    let k = lqr_riccati(&sys.shifted(theta)?)?.k;
    constants_from_feedback(sys, &k, theta)
}

fn default_horizon_for(cert: &ObservabilityCertificate) -> f64 {
    let start = cert.c_alpha.ln() / cert.alpha;
    if start > 0.0 {
        DEFAULT_T_FACTOR * start
    } else {
        1.0
    }
}

fn compare_one(
    sys: &SystemDef,
    method: MethodArg,
    a: &CompareArgs,
    cert: &Option<ObservabilityCertificate>,
    quad: QuadSpec,
) -> Result<FeedbackLaw> {
    match method {
        MethodArg::Main | MethodArg::General => {
            let cert = match cert {
                Some(c) => c.clone(),
                None => auto_certificate(sys)?,
            };
            let t = a.t.unwrap_or_else(|| default_horizon_for(&cert));
            if method == MethodArg::Main {
                synthesize_main(sys, &cert, t, quad)
            } else {
                let eps_hat = admissible(&cert, 0.0, t).eps_hat.max(0.0);
                let eps = a.eps.unwrap_or(0.5 * (eps_hat + cert.alpha));
                synthesize_general(sys, &cert, eps, t, quad)
            }
        }
        MethodArg::Rate => {
            let mu = match a.mu {
                Some(mu) => mu,
                None => match analyze(sys).omega_star {
                    BestRate::Finite(w) if w > 0.0 => 0.5 * w,
                    BestRate::Finite(_) => {
                        return Err(Error::domain("no positive rate is achievable"))
                    }
                    BestRate::Unbounded => 1.0,
                },
            };
            synthesize_for_rate(sys, mu, quad)
        }
        MethodArg::Komornik => komornik_feedback(sys, a.omega, a.t.unwrap_or(1.0), quad),
        MethodArg::Urquiza => urquiza_feedback(sys, a.omega, quad),
        MethodArg::Lqr => lqr_feedback(sys),
    }
}

fn cmd_compare(a: CompareArgs, tol: &Tolerances) -> Result<i32> {
    let sys = read_system(&a.system)?;
    let quad = quad_spec(&a.quad)?;
    let mut methods = Vec::new();
    for name in a.methods.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let m = MethodArg::from_str(name, true)
            .map_err(|_| Error::domain(format!("unknown method {name:?}")))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(Error::domain("compare needs at least one method"));
    }
    let cert = if a.source.given() {
        Some(a.source.load()?)
    } else {
        None
    };
    let mut header = vec![
        "method",
        "status",
        "predicted_rate",
        "fitted_rate",
        "abscissa",
        "gain_norm",
        "pass",
        "reason",
    ];
    if a.timing {
        header.push("synthesis_seconds");
    }
    let mut rows = Vec::new();
    let mut synthesized = 0usize;
    let mut all_pass = true;
    for m in methods {
        let start = Instant::now();
        let law = compare_one(&sys, m, &a, &cert, quad);
        let elapsed = start.elapsed().as_secs_f64();
        let mut row = vec![m.name().to_string()];
        let outcome = law.and_then(|law| {
            let h = match a.horizon {
                Some(h) => h,
                None => default_horizon(&sys, &law)?,
            };
            let decay = closed_loop_report(&sys, &law, h, VerifyOptions::default().samples, tol)?;
            Ok((law, decay))
        });
        match outcome {
            Ok((law, decay)) => {
                synthesized += 1;
                all_pass &= decay.passed;
                row.extend([
                    "ok".to_string(),
                    num(law.predicted_rate),
                    num(decay.fitted_rate),
                    num(decay.spectral_abscissa),
                    num(gain_norm(&law)),
                    decay.passed.to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                let status = if e.is_numerical() { "error" } else { "refused" };
                all_pass &= !e.is_numerical();
                row.extend([
                    status.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                row.extend(["false".to_string(), e.to_string()]);
            }
        }
        if a.timing {
            row.push(format!("{elapsed:.6}"));
        }
        rows.push(row);
    }
    emit(a.out.as_deref(), &csv_bytes(&header, &rows)?)?;
    Ok(verdict_code(synthesized > 0 && all_pass))
}
