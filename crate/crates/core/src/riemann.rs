//! Metrics on the space of embedded curves (L², curvature-weighted, first
//! Sobolev), Riemannian gradients, the covariant derivative of ambient
//! vector fields, and the Hessian quadratic form of the boundary
//! functionals with its finite-difference connection check.

use std::sync::Arc;

use crate::bessel::BoundaryCondition;
use crate::curve::{AmbientField, BoundaryScalar, FourierCurve, Frame};
use crate::error::{Error, Result};
use crate::fem::{Domain, EigenPair};
use crate::numerics::{solve_cyclic_tridiagonal, spectral_derivative};
use crate::shape::{functional_j2, functional_j3, j2_density, j3_density, peak_normalized, relative_gap, track_mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MetricKind {
    /// ∮ α β ds
    G0,
    /// ∮ (1 + A K²) α β ds
    GA,
    /// ∮ (α − A D_s² α) β ds
    Sobolev,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g0" => Ok(MetricKind::G0),
            "ga" => Ok(MetricKind::GA),
            "sobolev" | "h1" => Ok(MetricKind::Sobolev),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub a: f64,
}

impl MetricSpec {
    pub fn new(kind: MetricKind, a: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::Config(format!("metric weight A = {a} must be finite and >= 0")));
        }
        Ok(Self { kind, a })
    }

    pub fn g0() -> Self {
        Self { kind: MetricKind::G0, a: 0.0 }
    }

    pub fn ga(a: f64) -> Self {
        Self { kind: MetricKind::GA, a }
    }

    pub fn sobolev(a: f64) -> Self {
        Self { kind: MetricKind::Sobolev, a }
    }
}

/// Spectral D_s² f = D_s(D_s f) with D_s = ∂_θ / |c_θ|.
pub fn arc_second_derivative(frame: &Frame, f: &BoundaryScalar) -> BoundaryScalar {
    let ds = |v: &[f64]| -> Vec<f64> {
        spectral_derivative(v).iter().zip(&frame.speed).map(|(d, s)| d / s).collect()
    };
    BoundaryScalar::new(ds(&ds(&f.samples)))
}

/// Metric value on the normal components h = αν, m = βν.
pub fn metric(spec: &MetricSpec, frame: &Frame, alpha: &BoundaryScalar, beta: &BoundaryScalar) -> Result<f64> {
    frame.check(alpha)?;
    frame.check(beta)?;
    Ok(match spec.kind {
        MetricKind::G0 => frame.inner(alpha, beta),
        MetricKind::GA => {
            let w = frame.curvature_field().zip_with(alpha, |k, a| (1.0 + spec.a * k * k) * a);
            frame.inner(&w, beta)
        }
        MetricKind::Sobolev => {
            let d2 = arc_second_derivative(frame, alpha);
            frame.inner(&alpha.zip_with(&d2, |a, d| a - spec.a * d), beta)
        }
    })
}

/// Arc-length spacing between node i and i + 1 (trapezoid on |c_θ|).
fn arc_gaps(frame: &Frame) -> Vec<f64> {
    let n = frame.nodes();
    (0..n).map(|i| 0.5 * (frame.speed[i] + frame.speed[(i + 1) % n]) * frame.dtheta()).collect()
}

/// Periodic second difference in arc length as cyclic tridiagonal rows
/// (lower, diag, upper) of I − A D_s².
fn l1_rows(frame: &Frame, a: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = frame.nodes();
    let gaps = arc_gaps(frame);
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let back = gaps[(i + n - 1) % n];
        let ahead = gaps[i];
        let w = 2.0 / (back + ahead);
        lower[i] = -a * w / back;
        upper[i] = -a * w / ahead;
        diag[i] = 1.0 + a * w * (1.0 / back + 1.0 / ahead);
    }
    (lower, diag, upper)
}

/// (I − A D_s²) f with D_s² the periodic arc-length second difference.
pub fn apply_l1(frame: &Frame, a: f64, f: &BoundaryScalar) -> Result<BoundaryScalar> {
    frame.check(f)?;
    let (lower, diag, upper) = l1_rows(frame, a);
    let n = frame.nodes();
    let s = &f.samples;
    Ok(BoundaryScalar::new(
        (0..n).map(|i| lower[i] * s[(i + n - 1) % n] + diag[i] * s[i] + upper[i] * s[(i + 1) % n]).collect(),
    ))
}

/// φ with (I − A D_s²) φ = f, same discretization as [`apply_l1`].
pub fn invert_l1(frame: &Frame, a: f64, f: &BoundaryScalar) -> Result<BoundaryScalar> {
    frame.check(f)?;
    if !(a > 0.0) {
        return Err(Error::SingularOperator(format!("A = {a} must be positive")));
    }
    let (lower, diag, upper) = l1_rows(frame, a);
    Ok(BoundaryScalar::new(solve_cyclic_tridiagonal(&lower, &diag, &upper, &f.samples)?))
}

/// Riemannian gradient of a functional whose derivative is ∮ G α ds.
pub fn riemannian_gradient(spec: &MetricSpec, frame: &Frame, density: &BoundaryScalar) -> Result<BoundaryScalar> {
    frame.check(density)?;
    match spec.kind {
        MetricKind::G0 => Ok(density.clone()),
        MetricKind::GA => Ok(frame.curvature_field().zip_with(density, |k, g| g / (1.0 + spec.a * k * k))),
        MetricKind::Sobolev if spec.a == 0.0 => Ok(density.clone()),
        MetricKind::Sobolev => invert_l1(frame, spec.a, density),
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// ∇_V W = ⟨D_V W, ν⟩ + (3AK³ + K)/(1 + AK²) ⟨V, ν⟩⟨W, ν⟩ at every node.
pub fn covariant_derivative(frame: &Frame, a: f64, v: &AmbientField, w: &AmbientField) -> BoundaryScalar {
    BoundaryScalar::new(
        (0..frame.nodes())
            .map(|i| {
                let p = frame.position[i];
                let nu = frame.normal[i];
                let k = frame.curvature[i];
                let dvw = w.directional(v, p);
                dot(dvw, nu) + (3.0 * a * k.powi(3) + k) / (1.0 + a * k * k) * dot(v.eval(p), nu) * dot(w.eval(p), nu)
            })
            .collect(),
    )
}

/// ⟨∇_V W − ∇_W V − (D_V W − D_W V), ν⟩ at every node.
pub fn torsion(frame: &Frame, a: f64, v: &AmbientField, w: &AmbientField) -> BoundaryScalar {
    let vw = covariant_derivative(frame, a, v, w);
    let wv = covariant_derivative(frame, a, w, v);
    BoundaryScalar::new(
        (0..frame.nodes())
            .map(|i| {
                let p = frame.position[i];
                let nu = frame.normal[i];
                let dvw = w.directional(v, p);
                let dwv = v.directional(w, p);
                vw.samples[i] - wv.samples[i] - (dot(dvw, nu) - dot(dwv, nu))
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// ∮u² + γ|Ω| on a Neumann mode
    J2 { gamma: f64 },
    /// ∫|∇u|² + γ|Ω| on a Dirichlet mode
    J3 { gamma: f64 },
}

impl Functional {
    pub fn gamma(&self) -> f64 {
        match *self {
            Functional::J2 { gamma } | Functional::J3 { gamma } => gamma,
        }
    }

    pub fn bc(&self) -> BoundaryCondition {
        match self {
            Functional::J2 { .. } => BoundaryCondition::Neumann,
            Functional::J3 { .. } => BoundaryCondition::Dirichlet,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Functional::J2 { .. } => "j2",
            Functional::J3 { .. } => "j3",
        }
    }

    pub fn value(&self, eig: &EigenPair) -> Result<f64> {
        match *self {
            Functional::J2 { gamma } => functional_j2(eig, gamma),
            Functional::J3 { gamma } => functional_j3(eig, gamma),
        }
    }

    /// Boundary density G with dJ(α) = ∮ G α ds.
    pub fn density(&self, eig: &EigenPair) -> Result<BoundaryScalar> {
        match *self {
            Functional::J2 { gamma } => j2_density(eig, gamma),
            Functional::J3 { gamma } => j3_density(eig, gamma),
        }
    }
}

/// Boundary density ∂ψ/∂ν + Kψ of the Hessian quadratic form.
#[derive(Debug, Clone)]
pub struct HessianForm {
    pub density: BoundaryScalar,
    pub functional: Functional,
    /// sign s in ∂K/∂ν = s K²
    pub convention: f64,
}

impl HessianForm {
    /// ∮ density α β ds.
    pub fn evaluate(&self, frame: &Frame, alpha: &BoundaryScalar, beta: &BoundaryScalar) -> Result<f64> {
        frame.check(alpha)?;
        frame.check(beta)?;
        Ok(frame.inner(&self.density.zip_with(alpha, |d, a| d * a), beta))
    }
}

/// Hessian density for J₂ (ψ = K u² + γ, ∂ψ/∂ν = s K² u² + 2 K u ∂u/∂ν with
/// ∂u/∂ν = 0) or J₃ (ψ = −½(∂u/∂ν)² + γ, ∂ψ/∂ν = K (∂u/∂ν)² from
/// ∂²u/∂ν² = −K ∂u/∂ν on a Dirichlet boundary).
pub fn hessian_form(eig: &EigenPair, functional: Functional, convention: f64) -> Result<HessianForm> {
    if eig.bc != functional.bc() {
        return Err(Error::WrongBC { expected: functional.bc().label() });
    }
    let frame = eig.frame();
    let k = frame.curvature_field();
    let psi = functional.density(eig)?;
    let dpsi = match functional {
        Functional::J2 { .. } => {
            let u = peak_normalized(eig);
            k.zip_with(&u.trace, |k, u| convention * k * k * u * u)
        }
        Functional::J3 { .. } => k.zip_with(eig.flux()?, |k, f| k * f * f),
    };
    let density = dpsi.zip_with(&k.zip_with(&psi, |k, p| k * p), |a, b| a + b);
    Ok(HessianForm { density, functional, convention })
}

/// c + t V(c) sampled on the frame grid and projected to Fourier harmonics.
pub fn move_along(curve: &FourierCurve, frame: &Frame, field: &AmbientField, t: f64) -> Result<FourierCurve> {
    let pts: Vec<[f64; 2]> = frame
        .position
        .iter()
        .map(|&p| {
            let v = field.eval(p);
            [p[0] + t * v[0], p[1] + t * v[1]]
        })
        .collect();
    let m = (curve.harmonics_max() + field.degree() as usize * curve.harmonics_max())
        .max(crate::shape::PERTURBED_HARMONICS)
        .min(frame.nodes() / 4 - 1);
    FourierCurve::from_samples(&pts, m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionCheck {
    /// second central difference of J along c ± tV
    pub lhs: f64,
    /// Hessian form plus dJ(∇_V V)
    pub rhs: f64,
    pub gap: f64,
    pub convention: f64,
}

/// Compares d²J(c + tV)/dt² at t = 0 with Hess J(α, α) + dJ(∇_V V), where
/// α = ⟨V, ν⟩ and `eig` is the mode J is built on.
pub fn connection_identity_check(
    eig: &EigenPair,
    functional: Functional,
    field: &AmbientField,
    a: f64,
    convention: f64,
    t: f64,
) -> Result<ConnectionCheck> {
    let base: &Arc<Domain> = &eig.domain;
    let frame = &base.frame;
    let value_at = |step: f64| -> Result<f64> {
        let curve = move_along(&base.curve, frame, field, step)?;
        let moved = base.morph(curve)?;
        let (_, pair) = track_mode(eig, &moved)?;
        functional.value(&pair)
    };
    let lhs = (value_at(t)? - 2.0 * functional.value(eig)? + value_at(-t)?) / (t * t);
    let alpha = field.normal_component(frame);
    let hess = hessian_form(eig, functional, convention)?.evaluate(frame, &alpha, &alpha)?;
    let nabla = covariant_derivative(frame, a, field, field);
    let rhs = hess + frame.inner(&functional.density(eig)?, &nabla);
    Ok(ConnectionCheck { lhs, rhs, gap: relative_gap(rhs, lhs), convention })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(r: f64) -> Frame {
        FourierCurve::circle([0.0, 0.0], r).frame(256).unwrap()
    }

    #[test]
    fn metric_examples() {
        let f = circle(1.0);
        let one = BoundaryScalar::constant(256, 1.0);
        assert!((metric(&MetricSpec::ga(1.0), &f, &one, &one).unwrap() - 4.0 * PI).abs() < 1e-10);
        let f2 = circle(2.0);
        let expect = 2.0 * PI * 2.0 * (1.0 + 0.25);
        assert!((metric(&MetricSpec::ga(1.0), &f2, &one, &one).unwrap() - expect).abs() < 1e-10);
        let g0 = metric(&MetricSpec::g0(), &f2, &one, &one).unwrap();
        assert!((metric(&MetricSpec::ga(0.0), &f2, &one, &one).unwrap() - g0).abs() < 1e-12);
        assert!((g0 - 4.0 * PI).abs() < 1e-10);
        let cos = BoundaryScalar::from_fn(256, f64::cos);
        assert!((metric(&MetricSpec::sobolev(1.0), &f, &cos, &cos).unwrap() - 2.0 * PI).abs() < 1e-10);
        let short = BoundaryScalar::constant(128, 1.0);
        assert!(matches!(metric(&MetricSpec::g0(), &f, &short, &one), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn invert_l1_examples() {
        let f = FourierCurve::ellipse([0.0, 0.0], 2.0, 1.0).frame(256).unwrap();
        let one = BoundaryScalar::constant(256, 1.0);
        let phi = invert_l1(&f, 0.7, &one).unwrap();
        assert!(phi.samples.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let c = circle(1.0);
        let cos = BoundaryScalar::from_fn(256, f64::cos);
        let phi = invert_l1(&c, 1.0, &cos).unwrap();
        for (p, t) in phi.samples.iter().zip(&c.theta) {
            assert!((p - 0.5 * t.cos()).abs() < 1e-4);
        }
        let back = apply_l1(&c, 1.0, &phi).unwrap();
        assert!(back.zip_with(&cos, |a, b| a - b).max_abs() < 1e-12);
        assert!(matches!(invert_l1(&c, 0.0, &cos), Err(Error::SingularOperator(_))));
    }

    #[test]
    fn gradient_examples() {
        let c = circle(1.0);
        let one = BoundaryScalar::constant(256, 1.0);
        let g = riemannian_gradient(&MetricSpec::ga(1.0), &c, &one).unwrap();
        assert!(g.samples.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let g = riemannian_gradient(&MetricSpec::ga(0.0), &c, &one).unwrap();
        assert_eq!(g, one);
    }

    #[test]
    fn covariant_examples() {
        let c = circle(1.0);
        let radial = AmbientField::radial();
        let cd = covariant_derivative(&c, 0.0, &radial, &radial);
        assert!(cd.samples.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let cd = covariant_derivative(&c, 1.0, &radial, &radial);
        assert!(cd.samples.iter().all(|v| (v - 3.0).abs() < 1e-12));
        let cd = covariant_derivative(&c, 1.0, &AmbientField::rotation(), &radial);
        assert!(cd.max_abs() < 1e-12);
    }

    #[test]
    fn torsion_examples() {
        let c = circle(1.0);
        let v = AmbientField::new(vec![(2, 1, 0.3), (0, 0, 1.0)], vec![(1, 1, -0.7)]);
        let w = AmbientField::radial();
        assert!(torsion(&c, 1.0, &v, &w).max_abs() < 1e-10);
        assert_eq!(torsion(&c, 1.0, &v, &v).max_abs(), 0.0);
        let e = FourierCurve::ellipse([0.0, 0.0], 2.0, 1.0).frame(256).unwrap();
        let vx = AmbientField::new(vec![(1, 0, 1.0)], vec![]);
        let wy = AmbientField::new(vec![], vec![(0, 1, 1.0)]);
        assert!(torsion(&e, 0.5, &vx, &wy).max_abs() < 1e-10);
    }
}
