//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::E;
use std::path::Path;
use std::time::Instant;

use common::{random_instances, scalar_instance, transport_instance, window_horizon, Instance};
use stabkit::cli;
use stabkit::error::Error;
use stabkit::feedback::{
    komornik_feedback, synthesize_for_rate, synthesize_general, synthesize_main, urquiza_feedback,
};
use stabkit::gramian::{admissible, pi_integral, GramianBundle, Verdict};
use stabkit::numerics::{spectral_abscissa, QuadSpec};
use stabkit::observability::{
    certify_static, dynamic_to_static, iterate_static, validate_certificate,
    ObservabilityCertificate, StaticOutcome, STATIC_INFLATION,
};
use stabkit::systems::{analyze, make_example, BestRate, Example};
use stabkit::verify::{
    closed_loop_report, default_horizon, lyapunov_residual, positivity_report, refine_bundle,
    verify_law, Tolerances, VerifyOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// The scalar instance plus the 20 seeded random ones.
fn suite() -> Vec<Instance> {
    let mut v = vec![scalar_instance()];
    v.extend(random_instances());
    v
}

/// Horizon used for the main law on each suite instance.
fn main_horizon(inst: &Instance) -> f64 {
    if inst.cert.c_alpha > 1.0 {
        window_horizon(&inst.cert, 1.5)
    } else {
        1.0
    }
}

fn main_bundle(inst: &Instance, quad: QuadSpec) -> Result<GramianBundle, Error> {
    let t = main_horizon(inst);
    let eps = admissible(&inst.cert, 0.0, t).eps_hat.max(0.0);
    pi_integral(&inst.sys, &inst.cert, eps, t, quad)
}

/// Composite Gauss–Legendre (3 nodes) for scalar integrands.
fn gl3(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let x = (0.6f64).sqrt();
    let nodes = [(-x, 5.0 / 9.0), (0.0, 8.0 / 9.0), (x, 5.0 / 9.0)];
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (u, w) in nodes {
            acc += w * f(mid + 0.5 * h * u) * 0.5 * h;
        }
    }
    acc
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let inst = scalar_instance();
    let bundle = match pi_integral(&inst.sys, &inst.cert, 0.0, 1.0, QuadSpec::simpson(4096)) {
        Ok(b) => b,
        Err(e) => return outcome(false, format!("pi_integral failed: {e}")),
    };
    // Φ(s) = e^{−2s}, Ψ(t) = e^{−2t}, β = 1, D e^{αT} = 3e.
    let closed = E * (1.0 - (1.0 - (-3.0f64).exp()) / 3.0) + (1.0 - (-3.0f64).exp()) / 3.0;
    let quadrature = gl3(
        |s| 3.0 * E * (1.0 - s) * (-3.0 * s).exp() + (-3.0 * s).exp(),
        0.0,
        1.0,
        200,
    );
    let pi = bundle.pi[(0, 0)];
    let law = match synthesize_main(&inst.sys, &inst.cert, 1.0, QuadSpec::simpson(4096)) {
        Ok(l) => l,
        Err(e) => return outcome(false, format!("synthesis failed: {e}")),
    };
    let k = law.k[(0, 0)];
    let k_oracle = -3.0 * E / closed;
    let abscissa = spectral_abscissa(&law.closed_loop(&inst.sys).unwrap());
    let elapsed = start.elapsed().as_secs_f64();
    let pi_err = (pi - closed).abs() / closed;
    let k_err = (k - k_oracle).abs();
    let pass = pi_err <= 1e-8
        && (closed - quadrature).abs() <= 1e-12
        && (closed - 2.174033).abs() < 1e-5
        && k_err <= 1e-7
        && (k + 3.7508).abs() < 5e-4
        && abscissa <= -0.5
        && elapsed < 1.0;
    outcome(
        pass,
        format!("Pi = {pi:.9} (rel err {pi_err:.1e}), K = {k:.7} (err {k_err:.1e}), abscissa {abscissa:.4}, {elapsed:.3}s"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut max_panels = 0;
    let mut min_ratio = f64::INFINITY;
    let mut failures = Vec::new();
    for inst in suite() {
        let bundle = match main_bundle(&inst, QuadSpec::default()) {
            Ok(b) => b,
            Err(e) => {
                failures.push(format!("{}: {e}", inst.name));
                continue;
            }
        };
        let (bundle, lyap) = refine_bundle(&inst.sys, bundle, &tol).unwrap();
        worst = worst.max(lyap);
        max_panels = max_panels.max(bundle.quad.panels);
        if lyap > 1e-6 {
            failures.push(format!("{}: residual {lyap:.2e}", inst.name));
        }
        // Convergence order: compare successive doublings while the residual
        // is still well above the rounding floor.
        let mut prev: Option<f64> = None;
        for panels in [8, 16, 32, 64] {
            let r = lyapunov_residual(
                &inst.sys,
                &main_bundle(&inst, QuadSpec::simpson(panels)).unwrap(),
            );
            if let Some(p) = prev {
                if r > 1e-10 {
                    let ratio = p / r;
                    min_ratio = min_ratio.min(ratio);
                    if ratio < 8.0 {
                        failures.push(format!(
                            "{}: ratio {ratio:.2} at {panels} panels",
                            inst.name
                        ));
                    }
                }
            }
            prev = Some(r);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && elapsed < 30.0;
    outcome(
        pass,
        format!(
            "max residual {worst:.2e} (max panels {max_panels}), min doubling ratio {min_ratio:.1}, {elapsed:.1}s{}",
            failure_suffix(&failures)
        ),
    )
}

fn failure_suffix(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", failures.join(", "))
    }
}

fn criterion_3() -> Outcome {
    let tol = Tolerances::default();
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for inst in suite() {
        let bundle = match main_bundle(&inst, QuadSpec::default()) {
            Ok(b) => refine_bundle(&inst.sys, b, &tol).unwrap().0,
            Err(e) => {
                failures.push(format!("{}: {e}", inst.name));
                continue;
            }
        };
        let rep = positivity_report(&inst.sys, &bundle, 20).unwrap();
        let parts = [rep.lambda_grid_min, rep.pi, rep.q, rep.sandwich_upper];
        let m = parts.iter().copied().fold(f64::INFINITY, f64::min);
        if !rep.q_applies {
            failures.push(format!("{}: (eps, T) not admissible", inst.name));
        }
        worst = worst.min(m);
        if m < -1e-7 {
            failures.push(format!("{}: margin {m:.2e}", inst.name));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "min margin {worst:.2e} over 21 instances{}",
            failure_suffix(&failures)
        ),
    )
}

fn criterion_4() -> Outcome {
    let tol = Tolerances::default();
    let mut points = 0;
    let mut worst_fit = f64::INFINITY;
    let mut worst_abs = f64::INFINITY;
    let mut failures = Vec::new();
    for inst in suite() {
        let horizons: Vec<f64> = if inst.cert.c_alpha > 1.0 {
            [1.2, 1.6, 2.0]
                .iter()
                .map(|f| window_horizon(&inst.cert, *f))
                .collect()
        } else {
            vec![0.5, 1.0, 2.0]
        };
        for &t in &horizons {
            let eps_hat = admissible(&inst.cert, 0.0, t).eps_hat.max(0.0);
            for frac in [0.0, 0.25, 0.5] {
                let eps = eps_hat + frac * (inst.cert.alpha - eps_hat);
                if admissible(&inst.cert, eps, t).verdict != Verdict::Ok {
                    continue;
                }
                points += 1;
                let law =
                    match synthesize_general(&inst.sys, &inst.cert, eps, t, QuadSpec::default()) {
                        Ok(l) => l,
                        Err(e) => {
                            failures.push(format!("{} T={t:.2} eps={eps:.3}: {e}", inst.name));
                            continue;
                        }
                    };
                let rate = 0.5 * (inst.cert.alpha - eps);
                let h = default_horizon(&inst.sys, &law).unwrap();
                let rep = closed_loop_report(&inst.sys, &law, h, 60, &tol).unwrap();
                let fit_slack = rep.fitted_rate - (rate - 0.05);
                let abs_slack = (-rate + 0.05) - rep.spectral_abscissa;
                worst_fit = worst_fit.min(fit_slack);
                worst_abs = worst_abs.min(abs_slack);
                if fit_slack < 0.0 || abs_slack < 0.0 {
                    failures.push(format!(
                        "{} T={t:.2} eps={eps:.3}: fitted {:.3} abscissa {:.3} target {rate:.3}",
                        inst.name, rep.fitted_rate, rep.spectral_abscissa
                    ));
                }
            }
        }
    }
    outcome(
        failures.is_empty() && points == 21 * 9,
        format!(
            "{points} admissible points, min fit slack {worst_fit:.3}, min abscissa slack {worst_abs:.3}{}",
            failure_suffix(&failures)
        ),
    )
}

fn reported_omega_star(msg: &str) -> Option<f64> {
    let rest = msg.split("omega* = ").nth(1)?;
    let token: String = rest
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.' || *c == 'e' || *c == '-')
        .collect();
    token.parse().ok()
}

fn criterion_5() -> Outcome {
    let sys = make_example(&Example::RandStabilizable {
        n: 6,
        m: 2,
        n_unc: 2,
        margin: 0.8,
        seed: 5,
    })
    .unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    match analyze(&sys).omega_star {
        BestRate::Finite(w) if (w - 0.8).abs() <= 1e-6 => {}
        other => {
            pass = false;
            notes.push(format!("omega* = {other}"));
        }
    }
    for mu in [0.2, 0.4, 0.6] {
        match synthesize_for_rate(&sys, mu, QuadSpec::default()) {
            Ok(law) => {
                let a = spectral_abscissa(&law.closed_loop(&sys).unwrap());
                pass &= a <= -mu + 0.05;
                notes.push(format!("mu {mu}: abscissa {a:.3}"));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("mu {mu}: {e}"));
            }
        }
    }
    match synthesize_for_rate(&sys, 0.9, QuadSpec::default()) {
        Ok(_) => {
            pass = false;
            notes.push("mu 0.9 accepted".into());
        }
        Err(e) => {
            let w = reported_omega_star(&e.to_string());
            pass &= w.is_some_and(|w| (w - 0.8).abs() <= 1e-6);
            notes.push(format!("mu 0.9 rejected (omega* {w:?})"));
        }
    }
    let scalar = make_example(&Example::ScalarUnstable { a: 1.0 }).unwrap();
    pass &= analyze(&scalar).omega_star == BestRate::Unbounded;
    for mu in [0.5, 2.0] {
        match synthesize_for_rate(&scalar, mu, QuadSpec::default()) {
            Ok(law) => {
                let a = spectral_abscissa(&law.closed_loop(&scalar).unwrap());
                pass &= a <= -mu + 0.05;
                notes.push(format!("scalar mu {mu}: abscissa {a:.3}"));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("scalar mu {mu}: {e}"));
            }
        }
    }
    outcome(pass, notes.join(", "))
}

fn criterion_6() -> Outcome {
    let quad = QuadSpec::default();
    let mut failures = Vec::new();
    let mut worst_dyn = f64::INFINITY;
    let mut converted = random_instances();
    converted.push(transport_instance());
    for inst in &converted {
        let st = inst.static_cert.unwrap();
        let rep = validate_certificate(&inst.sys, &inst.cert, 5.0 * st.horizon, 101, quad).unwrap();
        worst_dyn = worst_dyn.min(rep.min_margin);
        if rep.min_margin < -1e-7 {
            failures.push(format!(
                "{}: dynamic margin {:.2e}",
                inst.name, rep.min_margin
            ));
        }
    }
    let mut back = 0;
    for inst in converted.iter().chain(std::iter::once(&scalar_instance())) {
        let st = dynamic_to_static(&inst.cert).unwrap();
        match certify_static(&inst.sys, st.horizon, st.delta, quad).unwrap() {
            StaticOutcome::Feasible(found) if found.d / STATIC_INFLATION <= st.d * (1.0 + 1e-9) => {
                back += 1
            }
            other => failures.push(format!(
                "{}: back-converted static certificate rejected: {other:?}",
                inst.name
            )),
        }
    }
    let mut worst_iter = f64::INFINITY;
    let scalar = scalar_instance();
    let scalar_static = match certify_static(&scalar.sys, 1.0, 0.5, quad).unwrap() {
        StaticOutcome::Feasible(c) => c,
        other => return outcome(false, format!("scalar static certificate: {other:?}")),
    };
    let transport = transport_instance();
    for (name, sys, st) in [
        ("scalar", &scalar.sys, scalar_static),
        ("transport", &transport.sys, transport.static_cert.unwrap()),
    ] {
        let rep = iterate_static(sys, &st, 5, quad).unwrap();
        worst_iter = worst_iter.min(rep.min_margin);
        if rep.min_margin < 0.0 {
            failures.push(format!("{name}: iterated margin {:.2e}", rep.min_margin));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "dynamic min margin {worst_dyn:.2e} on {} conversions, {back} static round trips, iterated min margin {worst_iter:.2e}{}",
            converted.len(),
            failure_suffix(&failures)
        ),
    )
}

fn criterion_7() -> Outcome {
    let quad = QuadSpec::default();
    let scalar = make_example(&Example::ScalarUnstable { a: 1.0 }).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for omega in [1.0, 2.0] {
        // ∫₀^∞ e^{−2ωs} e^{−2s} ds = 1/(2ω+2), so K = −(2ω+2) and A + BK = −(2ω+1).
        let expected = 1.0 - (2.0 * omega + 2.0);
        match urquiza_feedback(&scalar, omega, quad) {
            Ok(law) => {
                let a = spectral_abscissa(&law.closed_loop(&scalar).unwrap());
                pass &= (a - expected).abs() <= 1e-6;
                notes.push(format!("urquiza omega {omega}: abscissa {a:.8}"));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("urquiza omega {omega}: {e}"));
            }
        }
    }
    match komornik_feedback(&scalar, 1.0, 1.0, quad) {
        Ok(law) => {
            let a = spectral_abscissa(&law.closed_loop(&scalar).unwrap());
            pass &= a <= -1.0 + 0.05;
            notes.push(format!("komornik: abscissa {a:.4}"));
        }
        Err(e) => {
            pass = false;
            notes.push(format!("komornik: {e}"));
        }
    }
    let inst = &random_instances()[0];
    let report = analyze(&inst.sys);
    pass &= !report.controllable && report.stabilizable();
    let refused_u = matches!(
        urquiza_feedback(&inst.sys, 1.0, quad),
        Err(Error::Domain(_))
    );
    let refused_k = matches!(
        komornik_feedback(&inst.sys, 1.0, 1.0, quad),
        Err(Error::Domain(_))
    );
    let mutated = synthesize_main(&inst.sys, &inst.cert, main_horizon(inst), quad)
        .and_then(|law| {
            verify_law(
                &inst.sys,
                &law,
                &Tolerances::default(),
                &VerifyOptions::default(),
            )
        })
        .map(|r| r.passed)
        .unwrap_or(false);
    pass &= refused_u && refused_k && mutated;
    notes.push(format!(
        "{}: urquiza refused {refused_u}, komornik refused {refused_k}, mutated verified {mutated}",
        inst.name
    ));
    outcome(pass, notes.join(", "))
}

fn criterion_8() -> Outcome {
    let rates = vec![1.0, 1.5, 3.0];
    let sys = make_example(&Example::StableDiagonal {
        rates: rates.clone(),
    })
    .unwrap();
    // ‖e^{At}‖ = e^{−ωt} with ω the smallest rate, so Ĉ = 1.
    let omega = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let c_hat: f64 = 1.0;
    let cert = ObservabilityCertificate::new(2.0 * omega, 0.0, c_hat * c_hat).unwrap();
    let law = match synthesize_main(&sys, &cert, 1.0, QuadSpec::default()) {
        Ok(l) => l,
        Err(e) => return outcome(false, format!("synthesis failed: {e}")),
    };
    let zero = law.k.iter().all(|&v| v == 0.0);
    let report = verify_law(
        &sys,
        &law,
        &Tolerances::default(),
        &VerifyOptions::default(),
    )
    .unwrap();
    outcome(
        zero && report.passed,
        format!("K exactly zero: {zero}, verdicts {:?}", report.verdicts),
    )
}

fn run_cli(args: &[&str]) -> i32 {
    let mut argv = vec!["stabkit"];
    argv.extend_from_slice(args);
    cli::run(argv)
}

/// Runs the CLI pipeline in `dir` and returns the exit codes.
fn cli_suite(dir: &Path) -> Vec<i32> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let sys = p("sys.json");
    let scalar = p("scalar.json");
    let mut codes = vec![
        run_cli(&[
            "example",
            "--name",
            "rand-stabilizable",
            "--n",
            "6",
            "--m",
            "2",
            "--n-unc",
            "2",
            "--seed",
            "3",
            "--out",
            &sys,
        ]),
        run_cli(&[
            "example",
            "--name",
            "scalar-unstable",
            "--a",
            "1",
            "--out",
            &scalar,
        ]),
        run_cli(&[
            "certify",
            "--system",
            &sys,
            "--mode",
            "dynamic",
            "--T",
            "2.5",
            "--delta",
            "0.1",
            "--out",
            &p("cert.json"),
        ]),
        run_cli(&[
            "certify",
            "--system",
            &sys,
            "--mode",
            "from-feedback",
            "--theta",
            "0.3",
            "--out",
            &p("cert_fb.json"),
        ]),
    ];
    let cert_text = std::fs::read_to_string(p("cert.json")).unwrap_or_default();
    let t = ObservabilityCertificate::from_json(&cert_text)
        .map(|c| window_horizon(&c, 1.5))
        .unwrap_or(1.0)
        .to_string();
    codes.extend([
        run_cli(&[
            "synthesize",
            "--system",
            &sys,
            "--cert",
            &p("cert.json"),
            "--T",
            &t,
            "--out",
            &p("law.json"),
        ]),
        run_cli(&[
            "verify",
            "--system",
            &sys,
            "--law",
            &p("law.json"),
            "--out",
            &p("report.json"),
        ]),
        run_cli(&[
            "synthesize",
            "--system",
            &scalar,
            "--alpha",
            "1",
            "--D",
            "3",
            "--C",
            "1",
            "--T",
            "1",
            "--out",
            &p("scalar_law.json"),
        ]),
        run_cli(&[
            "verify",
            "--system",
            &scalar,
            "--law",
            &p("scalar_law.json"),
            "--out",
            &p("scalar_report.json"),
        ]),
        run_cli(&[
            "sweep",
            "--system",
            &scalar,
            "--alpha",
            "1",
            "--D",
            "3",
            "--C",
            "2",
            "--T-grid",
            "1:3:3",
            "--eps-grid",
            "0.3:0.6:2",
            "--out",
            &p("sweep.csv"),
        ]),
        run_cli(&["compare", "--system", &sys, "--out", &p("compare.csv")]),
        run_cli(&[
            "compare",
            "--system",
            &scalar,
            "--out",
            &p("compare_scalar.csv"),
        ]),
    ]);
    codes
}

const CLI_FILES: [&str; 11] = [
    "sys.json",
    "scalar.json",
    "cert.json",
    "cert_fb.json",
    "law.json",
    "report.json",
    "scalar_law.json",
    "scalar_report.json",
    "sweep.csv",
    "compare.csv",
    "compare_scalar.csv",
];

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let codes_a = cli_suite(a.path());
    let codes_b = cli_suite(b.path());
    let mut differing = Vec::new();
    for name in CLI_FILES {
        let fa = std::fs::read(a.path().join(name));
        let fb = std::fs::read(b.path().join(name));
        match (fa, fb) {
            (Ok(x), Ok(y)) if x == y && !x.is_empty() => {}
            _ => differing.push(name),
        }
    }
    let all_ok = codes_a.iter().all(|&c| c == 0);
    outcome(
        differing.is_empty() && codes_a == codes_b && all_ok,
        format!(
            "exit codes {codes_a:?}, {} files compared, differing {differing:?}",
            CLI_FILES.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("scalar oracle end to end", criterion_1),
        ("Lyapunov identity", criterion_2),
        ("positivity suite", criterion_3),
        ("decay over (eps, T) sweeps", criterion_4),
        ("rate-targeted synthesis", criterion_5),
        ("static and dynamic certificate equivalence", criterion_6),
        ("baselines and the uncontrollable case", criterion_7),
        ("zero-feedback consistency", criterion_8),
        ("determinism of CLI outputs", criterion_9),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {tag} [{name}] {}", i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
