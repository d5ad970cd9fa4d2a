//! The `(ε, T)` family: admissibility verdicts and achieved rates across a
//! grid of horizons and weights.

use stabkit::feedback::synthesize_general;
use stabkit::gramian::{admissible, Verdict};
use stabkit::numerics::{spectral_abscissa, QuadSpec};
use stabkit::observability::ObservabilityCertificate;
use stabkit::systems::{make_example, Example};

fn main() -> stabkit::Result<()> {
    let sys = make_example(&Example::ScalarUnstable { a: 1.0 })?;
    let cert = ObservabilityCertificate::new(1.0, 3.0, 2.0)?;
    println!("window starts at T = {:.4}", cert.c_alpha.ln() / cert.alpha);
    println!(
        "{:>6} {:>6} {:>24} {:>10} {:>10}",
        "T", "eps", "verdict", "predicted", "abscissa"
    );
    for t in [0.5, 1.0, 1.5, 2.0, 3.0] {
        for eps in [0.25, 0.5, 0.75] {
            let adm = admissible(&cert, eps, t);
            if adm.verdict != Verdict::Ok {
                println!("{t:>6} {eps:>6} {:>24}", adm.verdict.to_string());
                continue;
            }
            let law = synthesize_general(&sys, &cert, eps, t, QuadSpec::default())?;
            let abscissa = spectral_abscissa(&law.closed_loop(&sys)?);
            println!(
                "{t:>6} {eps:>6} {:>24} {:>10.4} {:>10.4}",
                "ok", law.predicted_rate, abscissa
            );
        }
    }
    Ok(())
}
