//! PBH analysis of the example families: uncontrollable modes and the best
//! achievable decay rate.

use stabkit::numerics::controllable_basis;
use stabkit::systems::{analyze, make_example, Example};

fn main() -> stabkit::Result<()> {
    let examples = [
        Example::ScalarUnstable { a: 1.0 },
        Example::StableDiagonal {
            rates: vec![1.0, 2.0],
        },
        Example::Transport1d {
            n: 8,
            speed: 0.25,
            window_start: 2,
            window_len: 2,
        },
        Example::WaveChain {
            masses: 3,
            damping: 0.1,
        },
        Example::RandStabilizable {
            n: 6,
            m: 1,
            n_unc: 2,
            margin: 0.7,
            seed: 1,
        },
    ];
    for ex in &examples {
        let sys = make_example(ex)?;
        let report = analyze(&sys);
        let rank = controllable_basis(sys.a(), sys.b()).ncols();
        println!(
            "{:<18} n = {:<2} reachable dim {:<2} controllable {:<5} omega* = {}",
            ex.name(),
            sys.n(),
            rank,
            report.controllable,
            report.omega_star
        );
        for mode in &report.uncontrollable_modes {
            println!(
                "    mode {:+.4} {:+.4}i, defect {}",
                mode.re, mode.im, mode.defect
            );
        }
    }
    Ok(())
}
