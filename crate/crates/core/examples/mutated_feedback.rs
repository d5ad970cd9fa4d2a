//! Mutated feedback `K_{ε,T}` for a stabilizable but uncontrollable random
//! system, followed by the full verification suite.

use stabkit::feedback::synthesize_general;
use stabkit::gramian::admissible;
use stabkit::numerics::QuadSpec;
use stabkit::observability::{certify_static, static_to_dynamic, StaticOutcome};
use stabkit::systems::{analyze, make_example, Example};
use stabkit::verify::{verify_law, Tolerances, VerifyOptions};

fn main() -> stabkit::Result<()> {
    let sys = make_example(&Example::RandStabilizable {
        n: 6,
        m: 1,
        n_unc: 2,
        margin: 0.8,
        seed: 7,
    })?;
    println!("omega* = {}", analyze(&sys).omega_star);

    let quad = QuadSpec::default();
    let StaticOutcome::Feasible(st) = certify_static(&sys, 2.5, 0.1, quad)? else {
        println!("no static certificate at T = 2.5");
        return Ok(());
    };
    let cert = static_to_dynamic(&sys, &st, quad)?;

    let window = cert.c_alpha.ln() / cert.alpha;
    let t = 1.5 * window.max(0.5);
    let eps_hat = admissible(&cert, 0.0, t).eps_hat;
    let eps = eps_hat + 0.25 * (cert.alpha - eps_hat);
    println!(
        "alpha = {:.4}, window starts at {:.4}, T = {:.4}, eps = {:.4}",
        cert.alpha, window, t, eps
    );

    let law = synthesize_general(&sys, &cert, eps, t, quad)?;
    let report = verify_law(
        &sys,
        &law,
        &Tolerances::default(),
        &VerifyOptions::default(),
    )?;
    println!(
        "predicted rate {:.4}, fitted {:.4}, abscissa {:.4}",
        report.decay.predicted_rate, report.decay.fitted_rate, report.decay.spectral_abscissa
    );
    for (check, ok) in &report.verdicts {
        println!("  {check:<10} {}", if *ok { "pass" } else { "FAIL" });
    }
    Ok(())
}
