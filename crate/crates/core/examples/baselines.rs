//! Mutated feedback against the classical baselines on a damped spring chain.

use stabkit::feedback::{
    gain_norm, komornik_feedback, lqr_feedback, lqr_riccati, synthesize_main, urquiza_feedback,
    FeedbackLaw,
};
use stabkit::numerics::{spectral_abscissa, QuadSpec};
use stabkit::observability::constants_from_feedback;
use stabkit::systems::{make_example, Example};

fn main() -> stabkit::Result<()> {
    let sys = make_example(&Example::WaveChain {
        masses: 3,
        damping: 0.1,
    })?;
    let quad = QuadSpec::default();
    let omega = 1.0;

    let theta = 0.5;
    let k0 = lqr_riccati(&sys.shifted(theta)?)?.k;
    let cert = constants_from_feedback(&sys, &k0, theta)?;
    let t = 1.5 * (cert.c_alpha.ln() / cert.alpha).max(0.5);
    println!(
        "certificate from LQR: alpha {:.3}, D {:.3}, C {:.3}; T = {t:.3}",
        cert.alpha, cert.d_alpha, cert.c_alpha
    );

    let laws: Vec<(&str, stabkit::Result<FeedbackLaw>)> = vec![
        ("main", synthesize_main(&sys, &cert, t, quad)),
        ("komornik", komornik_feedback(&sys, omega, 2.0, quad)),
        ("urquiza", urquiza_feedback(&sys, omega, quad)),
        ("lqr", lqr_feedback(&sys)),
    ];
    println!(
        "{:<10} {:>12} {:>12} {:>10}",
        "method", "predicted", "abscissa", "|K|"
    );
    for (name, law) in laws {
        match law {
            Ok(law) => println!(
                "{name:<10} {:>12.4} {:>12.4} {:>10.3}",
                law.predicted_rate,
                spectral_abscissa(&law.closed_loop(&sys)?),
                gain_norm(&law)
            ),
            Err(e) => println!("{name:<10} refused: {e}"),
        }
    }
    Ok(())
}
