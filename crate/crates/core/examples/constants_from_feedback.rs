//! Observability constants read off a known stabilizing feedback, then used
//! to synthesize the mutated law.

use stabkit::feedback::{lqr_riccati, synthesize_main};
use stabkit::numerics::{spectral_abscissa, QuadSpec};
use stabkit::observability::{constants_from_feedback, validate_certificate};
use stabkit::systems::{make_example, Example};

fn main() -> stabkit::Result<()> {
    let sys = make_example(&Example::ScalarUnstable { a: 0.5 })?;
    let theta = 0.8;
    let baseline = lqr_riccati(&sys.shifted(theta)?)?;
    println!(
        "baseline gain {:.4}, abscissa {:.4}",
        baseline.k[(0, 0)],
        spectral_abscissa(&(sys.a() + sys.b() * &baseline.k))
    );

    let cert = constants_from_feedback(&sys, &baseline.k, theta)?;
    println!(
        "alpha = {:.4}, D = {:.4}, C = {:.4}",
        cert.alpha, cert.d_alpha, cert.c_alpha
    );
    let check = validate_certificate(&sys, &cert, 5.0, 41, QuadSpec::default())?;
    println!("validated on [0, 5]: min margin {:.3e}", check.min_margin);

    let t = 1.5 * (cert.c_alpha.ln() / cert.alpha).max(0.5);
    let law = synthesize_main(&sys, &cert, t, QuadSpec::default())?;
    println!(
        "mutated gain {:.4}, abscissa {:.4}, predicted rate {:.4}",
        law.k[(0, 0)],
        spectral_abscissa(&law.closed_loop(&sys)?),
        law.predicted_rate
    );
    Ok(())
}
