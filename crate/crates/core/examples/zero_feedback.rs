//! A stable system with `B = 0`: any certificate has `D(α) = 0`, so the
//! mutated law is the zero gain and the rate is inherited from `A`.

use stabkit::feedback::synthesize_general;
use stabkit::numerics::{max_abs, QuadSpec};
use stabkit::observability::{validate_certificate, ObservabilityCertificate};
use stabkit::systems::{make_example, Example};
use stabkit::verify::{verify_law, Tolerances, VerifyOptions};

fn main() -> stabkit::Result<()> {
    let sys = make_example(&Example::StableDiagonal {
        rates: vec![1.0, 1.5, 3.0],
    })?;
    let cert = ObservabilityCertificate::new(2.0, 0.0, 1.0)?;
    let quad = QuadSpec::default();

    let report = validate_certificate(&sys, &cert, 5.0, 21, quad)?;
    println!("certificate margin on [0, 5]: {:.3e}", report.min_margin);

    let law = synthesize_general(&sys, &cert, 0.5, 1.0, quad)?;
    println!("max |K| = {}", max_abs(&law.k));
    let v = verify_law(
        &sys,
        &law,
        &Tolerances::default(),
        &VerifyOptions::default(),
    )?;
    println!(
        "fitted rate {:.4} >= predicted {:.4}: {}",
        v.decay.fitted_rate, v.decay.predicted_rate, v.passed
    );
    Ok(())
}
