use std::f64::consts::PI;

use schiffer_lab::bessel::lambda_disk;
use schiffer_lab::curve::FourierCurve;
use schiffer_lab::experiments::perturbed_disk;
use schiffer_lab::flow::*;
use schiffer_lab::numerics::fourier_coefficients;
use schiffer_lab::riemann::{Functional, MetricSpec};
use schiffer_lab::Error;

fn j3_config(max_iterations: usize) -> FlowConfig {
    FlowConfig {
        functional: Functional::J3 { gamma: 0.5 * lambda_disk(1.0).powi(2) },
        metric: MetricSpec::ga(0.0),
        s0: 0.1,
        max_iterations,
        tol: 1e-3,
        area: PI,
        harmonics: 8,
        h: 0.08,
        remesh_every: 0,
    }
}

fn max_coefficient_gap(a: &FourierCurve, b: &FourierCurve) -> f64 {
    let m = a.harmonics_max().max(b.harmonics_max());
    let (a, b) = (a.with_harmonics(m), b.with_harmonics(m));
    let pairs = a.cos_coefficients().iter().zip(b.cos_coefficients()).chain(a.sin_coefficients().iter().zip(b.sin_coefficients()));
    pairs.map(|(p, q)| (p[0] - q[0]).abs().max((p[1] - q[1]).abs())).fold(0.0, f64::max)
}

#[test]
fn critical_disk_is_a_fixed_point() {
    let disk = FourierCurve::circle([0.0, 0.0], 1.0);
    let config = j3_config(200);
    let run = run(&disk, &config, 0).unwrap();
    assert_eq!(run.verdict.termination, Termination::Converged);
    assert!(run.states.len() <= 2);
    assert!(run.verdict.disk_defect < 1e-3);
    let first = &run.states[0];
    let next = step(first, &config).unwrap();
    assert!(max_coefficient_gap(&first.curve, &next.curve) < 1e-8);
    assert_eq!(next.value, first.value);
}

#[test]
fn perturbed_disk_flows_to_a_disk() {
    let start = perturbed_disk(0.05, 2, 4, 0).unwrap().rescale_to_area(PI).unwrap();
    let run = run(&start, &j3_config(200), 0).unwrap();
    let states = &run.states;
    assert!(states.len() <= 201);
    assert!(states[1].value < states[0].value);
    assert!(states.windows(2).all(|p| p[1].value < p[0].value));
    assert!(states.iter().all(|s| (s.curve.area() - PI).abs() < 1e-8));
    assert!(states.iter().all(|s| s.grad_norm.is_finite()));
    assert!(run.verdict.disk_defect < 1e-2);
    assert!(run.verdict.disk_defect < states[0].disk_defect);
    assert!(run.verdict.optimality.unwrap().deviation < states[0].eig.domain.frame.nodes() as f64);
}

#[test]
fn huge_step_on_thin_ellipse_fails() {
    let thin = FourierCurve::ellipse([0.0, 0.0], 3.0, 1.0 / 3.0);
    let mut config = j3_config(5);
    config.s0 = 1e6;
    config.h = 0.05;
    let state = initial_state(&thin, &config, 0).unwrap();
    assert!(matches!(step(&state, &config), Err(Error::StepFailure { halvings: MAX_HALVINGS })));
    let run = run(&thin, &config, 0).unwrap();
    assert_eq!(run.verdict.termination, Termination::Stalled);
    assert_eq!(run.states.len(), 1);
}

#[test]
fn sobolev_weight_damps_high_harmonics() {
    // ratio of harmonic-8 to harmonic-1 energy in the gradient
    let noisy = {
        let mut cos = vec![[0.0, 0.0]; 9];
        let mut sin = vec![[0.0, 0.0]; 9];
        cos[1] = [1.0, 0.0];
        sin[1] = [0.0, 1.0];
        cos[2] = [0.03, 0.0];
        cos[8] = [0.004, 0.0];
        sin[8] = [0.0, 0.004];
        FourierCurve::new(cos, sin).unwrap()
    };
    let ratio = |metric: MetricSpec| {
        let mut config = j3_config(0);
        config.metric = metric;
        config.harmonics = 10;
        config.h = 0.05;
        let state = initial_state(&noisy, &config, 0).unwrap();
        let (_, a, b) = fourier_coefficients(&state.gradient.samples, 10);
        (a[7].powi(2) + b[7].powi(2)) / (a[0].powi(2) + b[0].powi(2)).max(1e-300)
    };
    let flat = ratio(MetricSpec::sobolev(0.0));
    let damped = ratio(MetricSpec::sobolev(1.0));
    assert!(damped < flat, "{damped} vs {flat}");
    assert!(damped < 0.1 * flat);
}

#[test]
fn j2_flow_starts_on_the_radial_mode() {
    let config = FlowConfig {
        functional: Functional::J2 { gamma: -0.162 },
        metric: MetricSpec::ga(1.0),
        s0: 0.05,
        max_iterations: 2,
        tol: 1e-6,
        area: PI,
        harmonics: 6,
        h: 0.08,
        remesh_every: 0,
    };
    let start = FourierCurve::ellipse([0.0, 0.0], 1.05, 1.0 / 1.05);
    let run = run(&start, &config, 5).unwrap();
    assert!(run.states.windows(2).all(|p| p[1].value < p[0].value));
    assert!(run.verdict.optimality.is_none());
}
