#![allow(dead_code)]

use stabkit::numerics::QuadSpec;
use stabkit::observability::{
    certify_static, static_to_dynamic, ObservabilityCertificate, StaticCert, StaticOutcome,
};
use stabkit::systems::{make_example, Example, SystemDef};

pub struct Instance {
    pub name: String,
    pub sys: SystemDef,
    pub static_cert: Option<StaticCert>,
    pub cert: ObservabilityCertificate,
}

pub fn scalar_instance() -> Instance {
    Instance {
        name: "scalar".into(),
        sys: make_example(&Example::ScalarUnstable { a: 1.0 }).unwrap(),
        static_cert: None,
        cert: ObservabilityCertificate::new(1.0, 3.0, 1.0).unwrap(),
    }
}

pub fn random_example(seed: u64) -> Example {
    let n = 4 + (seed as usize % 9);
    Example::RandStabilizable {
        n,
        m: 1 + (n - 4) / 3,
        n_unc: 1 + (seed as usize % 3),
        margin: 0.6 + 0.1 * (seed % 4) as f64,
        seed,
    }
}

/// Static certificate on `[0, T]` with contraction `δ`, converted to the
/// dynamic form (validated on `[0, 5T]` by the conversion itself).
pub fn certified(name: String, sys: SystemDef, horizon: f64, delta: f64) -> Instance {
    let quad = QuadSpec::default();
    let st = match certify_static(&sys, horizon, delta, quad).unwrap() {
        StaticOutcome::Feasible(c) => c,
        other => panic!("{name}: static certificate infeasible: {other:?}"),
    };
    let cert = static_to_dynamic(&sys, &st, quad).unwrap();
    Instance {
        name,
        sys,
        static_cert: Some(st),
        cert,
    }
}

pub fn random_instances() -> Vec<Instance> {
    (1..=20)
        .map(|seed| {
            let sys = make_example(&random_example(seed)).unwrap();
            certified(format!("rand-{seed}"), sys, 2.5, 0.1)
        })
        .collect()
}

pub fn transport_instance() -> Instance {
    let sys = make_example(&Example::Transport1d {
        n: 8,
        speed: 0.25,
        window_start: 2,
        window_len: 2,
    })
    .unwrap();
    certified("transport".into(), sys, 2.0, 0.5)
}

/// Horizon at `factor` times the left end of the admissible window.
pub fn window_horizon(cert: &ObservabilityCertificate, factor: f64) -> f64 {
    let start = cert.c_alpha.ln() / cert.alpha;
    if start > 0.0 {
        factor * start
    } else {
        1.0
    }
}
