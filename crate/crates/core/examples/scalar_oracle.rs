//! Scalar system `x' = x + u` with the certificate `(α, D, C) = (1, 3, 1)`:
//! the Gramian integral and the gain against their closed forms.

use stabkit::feedback::synthesize_main;
use stabkit::gramian::pi_integral;
use stabkit::numerics::{spectral_abscissa, QuadSpec};
use stabkit::observability::ObservabilityCertificate;
use stabkit::systems::{make_example, Example};

fn main() -> stabkit::Result<()> {
    let sys = make_example(&Example::ScalarUnstable { a: 1.0 })?;
    let cert = ObservabilityCertificate::new(1.0, 3.0, 1.0)?;
    let t = 1.0;

    let bundle = pi_integral(&sys, &cert, 0.0, t, QuadSpec::default())?;
    // Π = 3e ∫₀¹ (1 − s) e⁻³ˢ ds + ∫₀¹ e⁻³ˢ ds for these constants.
    let e = 1f64.exp();
    let third = (1.0 - (-3f64).exp()) / 3.0;
    let exact = 3.0 * e * (1.0 - third) / 3.0 + third;
    println!("Pi  = {:.9}  closed form {:.9}", bundle.pi[(0, 0)], exact);

    let law = synthesize_main(&sys, &cert, t, QuadSpec::default())?;
    let k_exact = -3.0 * e / exact;
    println!("K   = {:.9}  closed form {:.9}", law.k[(0, 0)], k_exact);

    let a_cl = law.closed_loop(&sys)?;
    println!(
        "closed-loop abscissa {:.6}, predicted rate {:.6}",
        spectral_abscissa(&a_cl),
        law.predicted_rate
    );
    Ok(())
}
