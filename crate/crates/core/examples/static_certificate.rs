//! Weak observability on a periodic transport system. A static certificate is
//! converted to the dynamic form and back, then checked on multiples of `T`.

use stabkit::numerics::QuadSpec;
use stabkit::observability::{
    certify_static, dynamic_to_static, iterate_static, static_to_dynamic, validate_certificate,
    StaticOutcome,
};
use stabkit::systems::{make_example, Example};

fn main() -> stabkit::Result<()> {
    let sys = make_example(&Example::Transport1d {
        n: 8,
        speed: 0.25,
        window_start: 2,
        window_len: 2,
    })?;
    let quad = QuadSpec::default();

    let st = match certify_static(&sys, 2.0, 0.5, quad)? {
        StaticOutcome::Feasible(c) => c,
        StaticOutcome::Infeasible { kernel_excess } => {
            println!("no static certificate: kernel excess {kernel_excess:.3e}");
            return Ok(());
        }
    };
    println!(
        "static:  T = {}, delta = {}, D = {:.6}",
        st.horizon, st.delta, st.d
    );

    let dynamic = static_to_dynamic(&sys, &st, quad)?;
    println!(
        "dynamic: alpha = {:.6}, D = {:.6}, C = {:.6}",
        dynamic.alpha, dynamic.d_alpha, dynamic.c_alpha
    );

    let report = validate_certificate(&sys, &dynamic, 5.0 * st.horizon, 41, quad)?;
    println!(
        "dynamic inequality on [0, 5T]: min relative margin {:.3e}",
        report.min_margin
    );

    let back = dynamic_to_static(&dynamic)?;
    println!(
        "back to static: T = {:.6}, delta = {:.6}, D = {:.6}",
        back.horizon, back.delta, back.d
    );

    let iter = iterate_static(&sys, &st, 4, quad)?;
    for (k, margin) in &iter.margins {
        println!("  horizon {k}T: margin {margin:.3e}");
    }
    Ok(())
}
