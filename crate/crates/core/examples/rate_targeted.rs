//! Rate-targeted synthesis: request a decay rate `μ < ω*` and check what the
//! closed loop delivers.

use stabkit::feedback::synthesize_for_rate;
use stabkit::numerics::{spectral_abscissa, QuadSpec};
use stabkit::systems::{analyze, make_example, Example};

fn main() -> stabkit::Result<()> {
    let sys = make_example(&Example::RandStabilizable {
        n: 6,
        m: 2,
        n_unc: 2,
        margin: 0.8,
        seed: 5,
    })?;
    let omega = analyze(&sys).omega_star.value();
    println!("omega* = {omega}");

    for mu in [0.2, 0.4, 0.6] {
        match synthesize_for_rate(&sys, mu, QuadSpec::default()) {
            Ok(law) => {
                let abscissa = spectral_abscissa(&law.closed_loop(&sys)?);
                println!(
                    "mu = {mu}: T = {:.3}, eps = {:.4}, abscissa {:.4} (target {})",
                    law.param("T").unwrap_or(f64::NAN),
                    law.param("eps").unwrap_or(f64::NAN),
                    abscissa,
                    -mu
                );
            }
            Err(e) => println!("mu = {mu}: {e}"),
        }
    }
    Ok(())
}
