//! Area-preserving Riemannian gradient descent on Fourier curves.

use std::sync::Arc;

use crate::bessel::BoundaryCondition;
use crate::curve::{BoundaryScalar, FourierCurve, Frame};
use crate::error::{Error, Result};
use crate::fem::{solve_eigs, Domain, EigenPair};
use crate::numerics::fourier_coefficients;
use crate::riemann::{metric, riemannian_gradient, Functional, MetricSpec};
use crate::shape::{optimality_residual, schiffer_residuals, track_mode, Optimality, SchifferResiduals};

pub const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub functional: Functional,
    pub metric: MetricSpec,
    /// initial step size of every line search
    pub s0: f64,
    pub max_iterations: usize,
    /// stop when the projected gradient norm falls below this
    pub tol: f64,
    /// enclosed area V₀ kept fixed
    pub area: f64,
    /// Fourier harmonics kept after each move
    pub harmonics: usize,
    /// mesh size
    pub h: f64,
    /// re-triangulate every this many accepted steps (0: only when the
    /// morphed mesh degrades)
    pub remesh_every: usize,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("s0", self.s0), ("tol", self.tol), ("area", self.area), ("h", self.h)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.harmonics == 0 {
            return Err(Error::Config("harmonics must be at least 1".into()));
        }
        Ok(())
    }
}

/// One iterate of the flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub iteration: usize,
    pub curve: FourierCurve,
    pub value: f64,
    /// √G(grad, grad) of the projected gradient
    pub grad_norm: f64,
    pub disk_defect: f64,
    /// accepted step (0 for the initial state)
    pub step: f64,
    /// no sign change of the curvature
    pub convex: bool,
    pub eig: EigenPair,
    pub gradient: BoundaryScalar,
}

fn solve_mode(domain: &Arc<Domain>, functional: Functional, previous: Option<&EigenPair>) -> Result<EigenPair> {
    match (functional, previous) {
        (Functional::J3 { .. }, _) => Ok(solve_eigs(domain, BoundaryCondition::Dirichlet, 1)?.remove(0)),
        (Functional::J2 { .. }, Some(prev)) if prev.domain.mesh.vertex_count() == domain.mesh.vertex_count() => {
            Ok(track_mode(prev, domain)?.1)
        }
        (Functional::J2 { .. }, Some(prev)) => {
            // connectivity changed: nearest eigenvalue
            let pairs = solve_eigs(domain, BoundaryCondition::Neumann, 16)?;
            pairs
                .into_iter()
                .min_by(|a, b| (a.lambda - prev.lambda).abs().total_cmp(&(b.lambda - prev.lambda).abs()))
                .ok_or(Error::ModeTrackingFailure(0.0))
        }
        (Functional::J2 { .. }, None) => Err(Error::Config("a J2 flow needs a starting Neumann mode".into())),
    }
}

/// Gradient restricted to moves the flow can make: arc-length mean removed
/// (area-preserving to first order) and harmonics above the cap dropped.
pub fn projected_gradient(spec: &MetricSpec, frame: &Frame, density: &BoundaryScalar, harmonics: usize) -> Result<BoundaryScalar> {
    let grad = riemannian_gradient(spec, frame, density)?;
    let mean = frame.integrate(&grad) / frame.length();
    let centered = grad.map(|g| g - mean);
    let (a0, a, b) = fourier_coefficients(&centered.samples, harmonics.min(frame.nodes() / 2 - 1));
    let mut coeffs = vec![a0];
    for k in 0..a.len() {
        coeffs.push(a[k]);
        coeffs.push(b[k]);
    }
    let banded = BoundaryScalar::from_fourier(frame.nodes(), &coeffs);
    let mean = frame.integrate(&banded) / frame.length();
    Ok(banded.map(|g| g - mean))
}

fn is_convex(frame: &Frame) -> bool {
    frame.curvature.iter().all(|&k| k > 0.0)
}

/// State for `curve` on `domain` with the mode `eig`.
fn make_state(
    iteration: usize,
    domain: &Arc<Domain>,
    eig: EigenPair,
    config: &FlowConfig,
    step: f64,
) -> Result<FlowState> {
    let frame = &domain.frame;
    let density = config.functional.density(&eig)?;
    let gradient = projected_gradient(&config.metric, frame, &density, config.harmonics)?;
    let grad_norm = metric(&config.metric, frame, &gradient, &gradient)?.max(0.0).sqrt();
    Ok(FlowState {
        iteration,
        curve: domain.curve.clone(),
        value: config.functional.value(&eig)?,
        grad_norm,
        disk_defect: domain.curve.disk_defect().defect,
        step,
        convex: is_convex(frame),
        eig,
        gradient,
    })
}

/// Initial state: the curve is padded to the harmonic cap, rescaled to V₀
/// and meshed. For J₂, `mode` selects the Neumann eigenpair by index.
pub fn initial_state(curve: &FourierCurve, config: &FlowConfig, mode: usize) -> Result<FlowState> {
    config.validate()?;
    let curve = curve.with_harmonics(config.harmonics.max(curve.harmonics_max())).rescale_to_area(config.area)?;
    let domain = Domain::new(curve, config.h)?;
    let eig = match config.functional {
        Functional::J3 { .. } => solve_eigs(&domain, BoundaryCondition::Dirichlet, 1)?.remove(0),
        Functional::J2 { .. } => solve_eigs(&domain, BoundaryCondition::Neumann, mode + 1)?.remove(mode),
    };
    make_state(0, &domain, eig, config, 0.0)
}

/// Moves the curve to `c − s grad ν`, projects to the harmonic cap and
/// rescales to V₀.
fn candidate_curve(state: &FlowState, config: &FlowConfig, s: f64) -> Result<FourierCurve> {
    let frame = state.eig.frame();
    let pts: Vec<[f64; 2]> = frame
        .position
        .iter()
        .zip(&frame.normal)
        .zip(&state.gradient.samples)
        .map(|((p, n), g)| [p[0] - s * g * n[0], p[1] - s * g * n[1]])
        .collect();
    FourierCurve::from_samples(&pts, config.harmonics)?.rescale_to_area(config.area)
}

fn evaluate(state: &FlowState, config: &FlowConfig, curve: FourierCurve, remesh: bool) -> Result<(Arc<Domain>, EigenPair)> {
    let domain = if remesh {
        Domain::with_nodes(curve, config.h, state.eig.frame().nodes())?
    } else {
        match state.eig.domain.morph(curve.clone()) {
            Ok(d) => d,
            Err(Error::MeshFailure(_)) => Domain::with_nodes(curve, config.h, state.eig.frame().nodes())?,
            Err(e) => return Err(e),
        }
    };
    let eig = solve_mode(&domain, config.functional, Some(&state.eig))?;
    Ok((domain, eig))
}

/// One backtracking step. A state whose gradient norm is within tolerance is
/// returned unchanged.
pub fn step(state: &FlowState, config: &FlowConfig) -> Result<FlowState> {
    if state.grad_norm <= config.tol {
        return Ok(state.clone());
    }
    let remesh = config.remesh_every > 0 && (state.iteration + 1) % config.remesh_every == 0;
    let mut s = config.s0;
    for _ in 0..=MAX_HALVINGS {
        let attempt = candidate_curve(state, config, s).and_then(|c| evaluate(state, config, c, remesh));
        match attempt {
            Ok((domain, eig)) => {
                let next = make_state(state.iteration + 1, &domain, eig, config, s)?;
                if next.value < state.value {
                    return Ok(next);
                }
            }
            Err(
                Error::ImmersionViolation { .. }
                | Error::SelfIntersection { .. }
                | Error::Orientation(_)
                | Error::MeshFailure(_)
                | Error::SingularMass(_)
                | Error::SolverDivergence(_)
                | Error::ModeTrackingFailure(_)
                | Error::InvalidCurve(_),
            ) => {}
            Err(e) => return Err(e),
        }
        s *= 0.5;
    }
    Err(Error::StepFailure { halvings: MAX_HALVINGS })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// gradient norm within tolerance
    Converged,
    MaxIterations,
    /// line search found no decrease
    Stalled,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "not converged",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub termination: Termination,
    pub disk_defect: f64,
    pub schiffer: SchifferResiduals,
    /// for J₃ flows
    pub optimality: Option<Optimality>,
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub states: Vec<FlowState>,
    pub verdict: Verdict,
}

/// Iterates until the gradient tolerance, the iteration cap or a failed
/// line search.
pub fn run(initial: &FourierCurve, config: &FlowConfig, mode: usize) -> Result<FlowRun> {
    let mut states = vec![initial_state(initial, config, mode)?];
    let mut termination = Termination::MaxIterations;
    loop {
        let current = states.last().unwrap();
        if current.grad_norm <= config.tol {
            termination = Termination::Converged;
            break;
        }
        if current.iteration >= config.max_iterations {
            break;
        }
        match step(current, config) {
            Ok(next) => states.push(next),
            Err(Error::StepFailure { .. }) => {
                termination = Termination::Stalled;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let last = states.last().unwrap();
    let schiffer = schiffer_residuals(&last.eig.domain)?;
    let optimality = match config.functional {
        Functional::J3 { .. } => Some(optimality_residual(&last.eig)?),
        Functional::J2 { .. } => None,
    };
    let verdict = Verdict { termination, disk_defect: last.disk_defect, schiffer, optimality };
    Ok(FlowRun { states, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riemann::MetricKind;

    fn config(max_iterations: usize) -> FlowConfig {
        FlowConfig {
            functional: Functional::J3 { gamma: 0.92 },
            metric: MetricSpec { kind: MetricKind::GA, a: 0.0 },
            s0: 0.1,
            max_iterations,
            tol: 1e-3,
            area: std::f64::consts::PI,
            harmonics: 8,
            h: 0.1,
            remesh_every: 0,
        }
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let curve = FourierCurve::ellipse([0.0, 0.0], 1.1, 1.0 / 1.1);
        let run = run(&curve, &config(0), 0).unwrap();
        assert_eq!(run.states.len(), 1);
        assert_eq!(run.verdict.termination, Termination::MaxIterations);
        assert_eq!(run.verdict.termination.label(), "not converged");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = config(1);
        c.area = -1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
