//! Shape derivatives of eigenvalues and energy functionals under normal
//! boundary perturbations V·ν = α, plus a finite-difference differentiator
//! that re-solves on perturbed domains.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bessel::BoundaryCondition;
use crate::curve::{BoundaryScalar, FourierCurve, Frame};
use crate::error::{Error, Result};
use crate::fem::{eig_with_multiplicity, solve_eigs, Domain, EigenPair};
use crate::numerics::spectral_derivative;

/// Floor in relative deviations.
pub const EPS: f64 = 1e-12;

/// Relative gap |formula − reference| / max(|reference|, ε).
pub fn relative_gap(formula: f64, reference: f64) -> f64 {
    (formula - reference).abs() / reference.abs().max(EPS)
}

/// A formula value, an optional alternative form of the same derivative and
/// an optional finite-difference companion.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub formula: &'static str,
    pub value: f64,
    pub alternate: Option<(&'static str, f64)>,
    pub nodes: usize,
    pub fd: Option<f64>,
    pub fd_step: Option<f64>,
}

impl DerivativeReport {
    fn new(formula: &'static str, value: f64, nodes: usize) -> Self {
        Self { formula, value, alternate: None, nodes, fd: None, fd_step: None }
    }

    pub fn with_fd(mut self, fd: f64, step: f64) -> Self {
        self.fd = Some(fd);
        self.fd_step = Some(step);
        self
    }

    pub fn rel_gap(&self) -> Option<f64> {
        self.fd.map(|fd| relative_gap(self.value, fd))
    }

    pub fn alternate_value(&self) -> Option<f64> {
        self.alternate.map(|a| a.1)
    }
}

fn require(eig: &EigenPair, bc: BoundaryCondition) -> Result<()> {
    if eig.bc != bc {
        return Err(Error::WrongBC { expected: bc.label() });
    }
    Ok(())
}

fn check_grid(frame: &Frame, alpha: &BoundaryScalar) -> Result<()> {
    frame.check(alpha)?;
    if !alpha.is_finite() {
        return Err(Error::InvalidCurve("perturbation field has non-finite samples".into()));
    }
    Ok(())
}

/// Tangential derivative D_s f = f_θ / |c_θ|, spectral in θ.
pub fn arc_derivative(frame: &Frame, f: &BoundaryScalar) -> BoundaryScalar {
    let d = spectral_derivative(&f.samples);
    BoundaryScalar::new(d.iter().zip(&frame.speed).map(|(v, s)| v / s).collect())
}

/// J = ∫|∇u|² for a normalized Dirichlet eigenfunction.
pub fn functional_j(eig: &EigenPair) -> Result<f64> {
    require(eig, BoundaryCondition::Dirichlet)?;
    Ok(eig.energy())
}

/// Hadamard derivative of the Dirichlet energy: −∮(∂u/∂ν)²α ds, with the
/// half-weighted form −½∮(∂u/∂ν)²α ds as the alternate.
pub fn dj_dirichlet(eig: &EigenPair, alpha: &BoundaryScalar) -> Result<DerivativeReport> {
    require(eig, BoundaryCondition::Dirichlet)?;
    let frame = eig.frame();
    check_grid(frame, alpha)?;
    let f = eig.flux()?;
    let value = -frame.inner(&f.map(|v| v * v), alpha);
    let mut report = DerivativeReport::new("dirichlet_classical", value, frame.nodes());
    report.alternate = Some(("dirichlet_half", 0.5 * value));
    Ok(report)
}

/// Derivative of a simple Neumann eigenvalue ∮(|∇_Γu|² − λu²)α ds.
pub fn dlambda_neumann(cluster: &[EigenPair], alpha: &BoundaryScalar) -> Result<DerivativeReport> {
    if cluster.len() != 1 {
        return Err(Error::MultipleEigenvalue(cluster.len()));
    }
    let m = multi_matrix_neumann(cluster, alpha)?;
    Ok(DerivativeReport::new("neumann_simple", m.matrix[(0, 0)], cluster[0].frame().nodes()))
}

/// Symmetric p×p derivative matrix of a multiple eigenvalue and its
/// eigenvalues (ascending), the one-sided directional derivatives.
#[derive(Debug, Clone)]
pub struct ClusterDerivative {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

fn check_cluster(cluster: &[EigenPair], bc: BoundaryCondition) -> Result<()> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster { target: f64::NAN });
    }
    let mut worst: f64 = 0.0;
    for (i, a) in cluster.iter().enumerate() {
        require(a, bc)?;
        if !Arc::ptr_eq(&a.domain, &cluster[0].domain) {
            return Err(Error::InvalidCurve("cluster members live on different domains".into()));
        }
        for (j, b) in cluster.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.mass_inner(b) - expect).abs());
        }
    }
    if worst >= 1e-8 {
        return Err(Error::NonOrthonormalCluster(worst));
    }
    Ok(())
}

fn cluster_matrix(
    cluster: &[EigenPair],
    alpha: &BoundaryScalar,
    entry: impl Fn(usize, usize) -> BoundaryScalar,
) -> Result<ClusterDerivative> {
    let frame = cluster[0].frame();
    check_grid(frame, alpha)?;
    let p = cluster.len();
    let mut matrix = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = frame.inner(&entry(i, j), alpha);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    let mut eigenvalues: Vec<f64> = if p == 1 {
        vec![matrix[(0, 0)]]
    } else {
        SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect()
    };
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    Ok(ClusterDerivative { matrix, eigenvalues })
}

/// m_ij = −∮ ∂u_i/∂ν ∂u_j/∂ν α ds.
pub fn multi_matrix_dirichlet(cluster: &[EigenPair], alpha: &BoundaryScalar) -> Result<ClusterDerivative> {
    check_cluster(cluster, BoundaryCondition::Dirichlet)?;
    let fluxes = cluster.iter().map(|e| e.flux().cloned()).collect::<Result<Vec<_>>>()?;
    cluster_matrix(cluster, alpha, |i, j| fluxes[i].zip_with(&fluxes[j], |a, b| -a * b))
}

/// m_ij = ∮(∇_Γu_i·∇_Γu_j − k² u_i u_j) α ds with k² the cluster mean.
pub fn multi_matrix_neumann(cluster: &[EigenPair], alpha: &BoundaryScalar) -> Result<ClusterDerivative> {
    check_cluster(cluster, BoundaryCondition::Neumann)?;
    let frame = cluster[0].frame();
    let k2 = cluster.iter().map(|e| e.lambda).sum::<f64>() / cluster.len() as f64;
    let grads: Vec<BoundaryScalar> = cluster.iter().map(|e| arc_derivative(frame, &e.trace)).collect();
    cluster_matrix(cluster, alpha, |i, j| {
        let g = grads[i].zip_with(&grads[j], |a, b| a * b);
        let u = cluster[i].trace.zip_with(&cluster[j].trace, |a, b| a * b);
        g.zip_with(&u, |a, b| a - k2 * b)
    })
}

/// The eigenpair rescaled so that its nodal value of largest magnitude is 1.
pub fn peak_normalized(eig: &EigenPair) -> EigenPair {
    let peak = eig.peak_value();
    eig.scaled(if peak != 0.0 { 1.0 / peak } else { 1.0 })
}

/// J₂ = ∮u² ds + γ|Ω| on the peak-normalized Neumann eigenfunction.
pub fn functional_j2(eig: &EigenPair, gamma: f64) -> Result<f64> {
    require(eig, BoundaryCondition::Neumann)?;
    let u = peak_normalized(eig);
    let frame = eig.frame();
    Ok(frame.inner(&u.trace, &u.trace) + gamma * eig.domain.curve.area())
}

/// Boundary density K u² + γ of the reduced J₂ derivative.
pub fn j2_density(eig: &EigenPair, gamma: f64) -> Result<BoundaryScalar> {
    require(eig, BoundaryCondition::Neumann)?;
    let u = peak_normalized(eig);
    Ok(eig.frame().curvature_field().zip_with(&u.trace, |k, v| k * v * v + gamma))
}

/// dJ₂ = ∮(K u² + γ)α ds with the material derivative of u dropped.
pub fn dj2_reduced(eig: &EigenPair, gamma: f64, alpha: &BoundaryScalar) -> Result<DerivativeReport> {
    let density = j2_density(eig, gamma)?;
    let frame = eig.frame();
    check_grid(frame, alpha)?;
    Ok(DerivativeReport::new("j2_reduced", frame.inner(&density, alpha), frame.nodes()))
}

/// J₃ = ∫|∇u|² + γ|Ω| for the normalized Dirichlet eigenfunction.
pub fn functional_j3(eig: &EigenPair, gamma: f64) -> Result<f64> {
    require(eig, BoundaryCondition::Dirichlet)?;
    Ok(eig.energy() + gamma * eig.domain.curve.area())
}

/// Boundary density −½(∂u/∂ν)² + γ.
pub fn j3_density(eig: &EigenPair, gamma: f64) -> Result<BoundaryScalar> {
    require(eig, BoundaryCondition::Dirichlet)?;
    Ok(eig.flux()?.map(|f| -0.5 * f * f + gamma))
}

/// dJ₃ = ∮(−½(∂u/∂ν)² + γ)α ds; the alternate uses the full Hadamard
/// weight −(∂u/∂ν)² + γ.
pub fn dj3(eig: &EigenPair, gamma: f64, alpha: &BoundaryScalar) -> Result<DerivativeReport> {
    let density = j3_density(eig, gamma)?;
    let frame = eig.frame();
    check_grid(frame, alpha)?;
    let value = frame.inner(&density, alpha);
    let full = frame.inner(&eig.flux()?.map(|f| -f * f + gamma), alpha);
    let mut report = DerivativeReport::new("j3_half", value, frame.nodes());
    report.alternate = Some(("j3_classical", full));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimality {
    /// arc-length mean of −½(∂u/∂ν)²
    pub tau: f64,
    /// (−2τ)^½
    pub lambda: f64,
    /// max-node |−½(∂u/∂ν)² − τ| / |τ|
    pub deviation: f64,
}

/// Lagrange multiplier of the fixed-volume energy problem and the deviation
/// of the boundary density from it.
pub fn optimality_residual(eig: &EigenPair) -> Result<Optimality> {
    require(eig, BoundaryCondition::Dirichlet)?;
    let frame = eig.frame();
    let density = eig.flux()?.map(|f| -0.5 * f * f);
    let tau = frame.integrate(&density) / frame.length();
    if tau.abs() < 1e-300 {
        return Err(Error::ZeroFlux);
    }
    let deviation = density.samples.iter().map(|v| (v - tau).abs()).fold(0.0, f64::max) / tau.abs();
    Ok(Optimality { tau, lambda: (-2.0 * tau).sqrt(), deviation })
}

/// Best near-witness of a constant boundary datum among a family of modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub residual: f64,
    /// index in the computed spectrum
    pub mode: usize,
    pub lambda: f64,
    /// arc-length mean of the boundary datum
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchifferResiduals {
    /// constant Dirichlet trace of a Neumann mode (trace peak-normalized)
    pub neumann: Witness,
    /// constant |∂u/∂ν| of a Dirichlet mode (L²-normalized)
    pub dirichlet: Witness,
}

/// Residual max|g − mean| / max(|mean|, ε) for each mode's datum g; the
/// smallest one wins.
fn best_witness(frame: &Frame, modes: &[(usize, f64, BoundaryScalar)]) -> Witness {
    let mut best = Witness { residual: f64::INFINITY, mode: 0, lambda: f64::NAN, mean: f64::NAN };
    for (idx, lambda, g) in modes {
        let mean = frame.integrate(g) / frame.length();
        let dev = g.samples.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        let residual = dev / mean.abs().max(EPS);
        if residual < best.residual {
            best = Witness { residual, mode: *idx, lambda: *lambda, mean };
        }
    }
    best
}

/// Scans the first six nonconstant Neumann modes for a constant trace and
/// the first six Dirichlet modes for a constant flux magnitude.
pub fn schiffer_residuals(domain: &Arc<Domain>) -> Result<SchifferResiduals> {
    let frame = &domain.frame;
    let neumann = solve_eigs(domain, BoundaryCondition::Neumann, 7)?;
    let n_modes: Vec<_> = neumann
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, e)| (i, e.lambda, peak_normalized(e).trace))
        .collect();
    let dirichlet = solve_eigs(domain, BoundaryCondition::Dirichlet, 6)?;
    let d_modes = dirichlet
        .iter()
        .enumerate()
        .map(|(i, e)| Ok((i, e.lambda, e.flux()?.map(f64::abs))))
        .collect::<Result<Vec<_>>>()?;
    Ok(SchifferResiduals { neumann: best_witness(frame, &n_modes), dirichlet: best_witness(frame, &d_modes) })
}

/// Quantity differentiated by [`fd_shape_derivative`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdQuantity {
    /// eigenvalue of the tracked mode
    Lambda,
    /// J₂ with the tracked Neumann mode
    J2 { gamma: f64 },
    /// J₃ with the tracked Dirichlet mode
    J3 { gamma: f64 },
}

/// Harmonics used when a perturbed boundary is projected back to a curve.
pub const PERTURBED_HARMONICS: usize = 32;

/// c + t α ν sampled on the frame grid and projected to Fourier harmonics.
pub fn perturb_normal(curve: &FourierCurve, frame: &Frame, alpha: &BoundaryScalar, t: f64) -> Result<FourierCurve> {
    frame.check(alpha)?;
    let pts: Vec<[f64; 2]> = frame
        .position
        .iter()
        .zip(&frame.normal)
        .zip(&alpha.samples)
        .map(|((p, n), a)| [p[0] + t * a * n[0], p[1] + t * a * n[1]])
        .collect();
    let m = curve.harmonics_max().max(PERTURBED_HARMONICS).min(frame.nodes() / 4 - 1);
    FourierCurve::from_samples(&pts, m)
}

/// Solves on `domain` and returns the eigenpair continuing `reference`,
/// matched by mass correlation of nodal fields (same mesh connectivity).
/// Nearly degenerate candidates are scored together and their mean
/// eigenvalue is returned with the best single member.
pub fn track_mode(reference: &EigenPair, domain: &Arc<Domain>) -> Result<(f64, EigenPair)> {
    if reference.domain.mesh.vertex_count() != domain.mesh.vertex_count() {
        return Err(Error::ModeTrackingFailure(0.0));
    }
    let candidates = eig_with_multiplicity(domain, reference.bc, reference.lambda.max(1e-3), 0.3)?;
    let corr: Vec<f64> = candidates
        .iter()
        .map(|c| reference.domain.mass.quadratic(&reference.values, &c.values))
        .collect();
    let mut best = (0.0, 0.0, 0usize);
    let mut i = 0;
    while i < candidates.len() {
        let mut j = i + 1;
        while j < candidates.len() && relative_gap(candidates[j].lambda, candidates[i].lambda) < 1e-4 {
            j += 1;
        }
        let score = corr[i..j].iter().map(|c| c * c).sum::<f64>().sqrt();
        if score > best.0 {
            let mean = candidates[i..j].iter().map(|c| c.lambda).sum::<f64>() / (j - i) as f64;
            let member = (i..j).max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs())).unwrap();
            best = (score, mean, member);
        }
        i = j;
    }
    if best.0 < 0.9 {
        return Err(Error::ModeTrackingFailure(best.0));
    }
    let mut pair = candidates[best.2].clone();
    if corr[best.2] < 0.0 {
        pair = pair.scaled(-1.0);
    }
    Ok((best.1, pair))
}

fn quantity_value(reference: &EigenPair, domain: &Arc<Domain>, quantity: FdQuantity) -> Result<f64> {
    let (lambda, pair) = track_mode(reference, domain)?;
    match quantity {
        FdQuantity::Lambda => Ok(lambda),
        FdQuantity::J2 { gamma } => functional_j2(&pair, gamma),
        FdQuantity::J3 { gamma } => functional_j3(&pair, gamma),
    }
}

/// Central difference (q(c + tαν) − q(c − tαν)) / 2t on morphed meshes.
pub fn fd_shape_derivative(reference: &EigenPair, alpha: &BoundaryScalar, quantity: FdQuantity, t: f64) -> Result<f64> {
    if alpha.samples.iter().all(|&a| a == 0.0) {
        return Ok(0.0);
    }
    let base = &reference.domain;
    let plus = base.morph(perturb_normal(&base.curve, &base.frame, alpha, t)?)?;
    let minus = base.morph(perturb_normal(&base.curve, &base.frame, alpha, -t)?)?;
    let qp = quantity_value(reference, &plus, quantity)?;
    let qm = quantity_value(reference, &minus, quantity)?;
    Ok((qp - qm) / (2.0 * t))
}

/// Central differences at t and t/2 and their Richardson combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Richardson {
    pub coarse: f64,
    pub fine: f64,
    pub extrapolated: f64,
}

pub fn fd_richardson(reference: &EigenPair, alpha: &BoundaryScalar, quantity: FdQuantity, t: f64) -> Result<Richardson> {
    let coarse = fd_shape_derivative(reference, alpha, quantity, t)?;
    let fine = fd_shape_derivative(reference, alpha, quantity, 0.5 * t)?;
    Ok(Richardson { coarse, fine, extrapolated: (4.0 * fine - coarse) / 3.0 })
}
