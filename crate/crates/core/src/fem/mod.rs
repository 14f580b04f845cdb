//! P1 finite elements for −Δu = λu with Dirichlet or Neumann conditions on
//! a meshed Fourier-curve domain, including variational recovery of the
//! boundary flux and traces resampled to the curve's parameter grid.

pub mod eigen;
pub mod mesh;
pub mod sparse;

use std::sync::{Arc, OnceLock};

pub use crate::bessel::BoundaryCondition;
use crate::curve::{BoundaryScalar, FourierCurve, Frame, DEFAULT_NODES};
use crate::error::{Error, Result};
use crate::numerics::{fourier_coefficients, grid_angle, solve_cyclic_tridiagonal, PeriodicSpline};
pub use mesh::{triangulate, Mesh};
use sparse::{CsrMatrix, SkylineCholesky};

/// A curve, a mesh of its interior and the assembled P1 matrices.
#[derive(Debug)]
pub struct Domain {
    pub curve: FourierCurve,
    pub mesh: Mesh,
    pub frame: Frame,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    interior_factor: OnceLock<SkylineCholesky>,
}

impl Domain {
    /// Meshes `curve` with size `h` and uses the default parameter grid.
    pub fn new(curve: FourierCurve, h: f64) -> Result<Arc<Self>> {
        let nodes = DEFAULT_NODES.max((4 * (curve.harmonics_max() + 1)).next_power_of_two());
        Self::with_nodes(curve, h, nodes)
    }

    pub fn with_nodes(curve: FourierCurve, h: f64, nodes: usize) -> Result<Arc<Self>> {
        let mesh = triangulate(&curve, h)?;
        Self::from_mesh(curve, mesh, nodes)
    }

    pub fn from_mesh(curve: FourierCurve, mesh: Mesh, nodes: usize) -> Result<Arc<Self>> {
        let frame = curve.frame(nodes)?;
        let (stiffness, mass) = assemble(&mesh)?;
        Ok(Arc::new(Self { curve, mesh, frame, stiffness, mass, interior_factor: OnceLock::new() }))
    }

    pub fn nodes(&self) -> usize {
        self.frame.nodes()
    }

    /// Same connectivity, boundary nodes moved to `curve` at their parameter
    /// values and interior nodes displaced by the discrete harmonic
    /// extension of the boundary displacement.
    pub fn morph(&self, curve: FourierCurve) -> Result<Arc<Domain>> {
        let nb = self.mesh.boundary_count();
        let n = self.mesh.vertex_count();
        let mut disp = vec![[0.0; 2]; n];
        for i in 0..nb {
            let p = curve.eval(self.mesh.boundary_theta[i]);
            let q = self.mesh.vertices[i];
            disp[i] = [p[0] - q[0], p[1] - q[1]];
        }
        if n > nb {
            let factor = match self.interior_factor.get() {
                Some(f) => f,
                None => {
                    let keep: Vec<usize> = (nb..n).collect();
                    let f = SkylineCholesky::factor(&self.stiffness.restrict(&keep))?;
                    self.interior_factor.get_or_init(|| f)
                }
            };
            for comp in 0..2 {
                let rhs: Vec<f64> = (nb..n)
                    .map(|i| {
                        -self
                            .stiffness
                            .row(i)
                            .filter(|&(j, _)| j < nb)
                            .map(|(j, v)| v * disp[j][comp])
                            .sum::<f64>()
                    })
                    .collect();
                let d = factor.solve(&rhs);
                for (k, v) in d.into_iter().enumerate() {
                    disp[nb + k][comp] = v;
                }
            }
        }
        let mut mesh = self.mesh.clone();
        for (v, d) in mesh.vertices.iter_mut().zip(&disp) {
            v[0] += d[0];
            v[1] += d[1];
        }
        mesh.check_quality()?;
        Self::from_mesh(curve, mesh, self.nodes())
    }
}

fn assemble(mesh: &Mesh) -> Result<(CsrMatrix, CsrMatrix)> {
    let n = mesh.vertex_count();
    let mut kt = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mt = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        if !(area > 0.0) {
            return Err(Error::SingularMass(format!("triangle {t} has area {area:.3e}")));
        }
        let p = [mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]];
        let mut b = [0.0; 3];
        let mut c = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            b[i] = p[j][1] - p[k][1];
            c[i] = p[k][0] - p[j][0];
        }
        for i in 0..3 {
            for j in 0..3 {
                kt.push((tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area)));
                let w = if i == j { area / 6.0 } else { area / 12.0 };
                mt.push((tri[i], tri[j], w));
            }
        }
    }
    Ok((CsrMatrix::from_triplets(n, &kt), CsrMatrix::from_triplets(n, &mt)))
}

/// Eigenvalue with nodal field and boundary traces on the parameter grid.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub domain: Arc<Domain>,
    pub lambda: f64,
    pub bc: BoundaryCondition,
    /// nodal values on every mesh vertex, ∫u² = 1
    pub values: Vec<f64>,
    /// u on the boundary
    pub trace: BoundaryScalar,
    /// ∂u/∂ν on the boundary
    pub flux: Option<BoundaryScalar>,
}

impl EigenPair {
    /// ∫|∇u|².
    pub fn energy(&self) -> f64 {
        self.domain.stiffness.quadratic(&self.values, &self.values)
    }

    /// ∫u v.
    pub fn mass_inner(&self, other: &EigenPair) -> f64 {
        self.domain.mass.quadratic(&self.values, &other.values)
    }

    pub fn frame(&self) -> &Frame {
        &self.domain.frame
    }

    pub fn flux(&self) -> Result<&BoundaryScalar> {
        self.flux.as_ref().ok_or(Error::MissingFlux)
    }

    /// Nodal value of largest magnitude (signed).
    pub fn peak_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, |m, v| if v.abs() > m.abs() { v } else { m })
    }

    /// Copy with every field multiplied by `k`.
    pub fn scaled(&self, k: f64) -> EigenPair {
        EigenPair {
            domain: self.domain.clone(),
            lambda: self.lambda,
            bc: self.bc,
            values: self.values.iter().map(|v| v * k).collect(),
            trace: self.trace.map(|v| v * k),
            flux: self.flux.as_ref().map(|f| f.map(|v| v * k)),
        }
    }
}

/// The `count` smallest eigenpairs.
pub fn solve_eigs(domain: &Arc<Domain>, bc: BoundaryCondition, count: usize) -> Result<Vec<EigenPair>> {
    let mesh = &domain.mesh;
    let nb = mesh.boundary_count();
    let n = mesh.vertex_count();
    let (lambdas, vectors) = match bc {
        BoundaryCondition::Dirichlet => {
            let keep: Vec<usize> = (nb..n).collect();
            let k = domain.stiffness.restrict(&keep);
            let m = domain.mass.restrict(&keep);
            let (vals, vecs) = eigen::lowest_eigenpairs(&k, &m, count, &Default::default())?;
            let full = vecs
                .into_iter()
                .map(|v| {
                    let mut u = vec![0.0; nb];
                    u.extend(v);
                    u
                })
                .collect::<Vec<_>>();
            (vals, full)
        }
        BoundaryCondition::Neumann => {
            eigen::lowest_eigenpairs(&domain.stiffness, &domain.mass, count, &Default::default())?
        }
    };
    let lengths = mesh.boundary_edge_lengths();
    let mut out = Vec::with_capacity(count);
    for (idx, (lambda, mut u)) in lambdas.into_iter().zip(vectors).enumerate() {
        let nodal_flux = recover_flux(domain, &lengths, lambda, &u)?;
        let mut trace = resample(domain, &u[..nb])?;
        let mut flux = resample(domain, &nodal_flux)?;
        let flip = if idx == 0 {
            u.iter().sum::<f64>() < 0.0
        } else {
            let signal = match bc {
                BoundaryCondition::Dirichlet => &flux,
                BoundaryCondition::Neumann => &trace,
            };
            leading_coefficient(signal) < 0.0
        };
        if flip {
            u.iter_mut().for_each(|v| *v = -*v);
            trace = trace.map(|v| -v);
            flux = flux.map(|v| -v);
        }
        out.push(EigenPair { domain: domain.clone(), lambda, bc, values: u, trace, flux: Some(flux) });
    }
    Ok(out)
}

/// Boundary flux f solving ∮ f φ_i = (K u − λ M u)_i over boundary hats.
fn recover_flux(domain: &Domain, lengths: &[f64], lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
    let nb = lengths.len();
    let rhs: Vec<f64> = (0..nb)
        .map(|i| {
            domain.stiffness.row(i).map(|(j, v)| v * u[j]).sum::<f64>()
                - lambda * domain.mass.row(i).map(|(j, v)| v * u[j]).sum::<f64>()
        })
        .collect();
    let diag: Vec<f64> = (0..nb).map(|i| (lengths[(i + nb - 1) % nb] + lengths[i]) / 3.0).collect();
    let upper: Vec<f64> = (0..nb).map(|i| lengths[i] / 6.0).collect();
    let lower: Vec<f64> = (0..nb).map(|i| lengths[(i + nb - 1) % nb] / 6.0).collect();
    solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs)
}

/// Periodic cubic interpolation from the boundary nodes onto the uniform
/// parameter grid.
fn resample(domain: &Domain, nodal: &[f64]) -> Result<BoundaryScalar> {
    let spline = PeriodicSpline::new(&domain.mesh.boundary_theta, nodal, std::f64::consts::TAU)?;
    let n = domain.nodes();
    Ok(BoundaryScalar::new((0..n).map(|i| spline.eval(grid_angle(i, n))).collect()))
}

/// First Fourier coefficient (a0, a1, b1, a2, ...) that is not negligible.
fn leading_coefficient(f: &BoundaryScalar) -> f64 {
    let (a0, a, b) = fourier_coefficients(&f.samples, 12);
    let mut coeffs = vec![a0];
    for k in 0..a.len() {
        coeffs.push(a[k]);
        coeffs.push(b[k]);
    }
    let scale = coeffs.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
    coeffs.into_iter().find(|c| c.abs() > 1e-3 * scale).unwrap_or(0.0)
}

/// All eigenpairs with |λ − target| ≤ tol·target, mass-orthonormal.
pub fn eig_with_multiplicity(
    domain: &Arc<Domain>,
    bc: BoundaryCondition,
    target: f64,
    tol: f64,
) -> Result<Vec<EigenPair>> {
    let limit = target * (1.0 + tol) + 1e-9;
    let dofs = match bc {
        BoundaryCondition::Dirichlet => domain.mesh.vertex_count() - domain.mesh.boundary_count(),
        BoundaryCondition::Neumann => domain.mesh.vertex_count(),
    };
    let mut count = 8.min(dofs);
    loop {
        let pairs = solve_eigs(domain, bc, count)?;
        let top = pairs.last().map(|p| p.lambda).unwrap_or(0.0);
        if top > limit || count == dofs {
            let cluster: Vec<EigenPair> =
                pairs.into_iter().filter(|p| (p.lambda - target).abs() <= tol * target + 1e-9).collect();
            if cluster.is_empty() {
                return Err(Error::EmptyCluster { target });
            }
            return Ok(cluster);
        }
        count = (2 * count).min(dofs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembled_matrices_integrate_exactly() {
        let d = Domain::new(FourierCurve::circle([0.0, 0.0], 1.0), 0.2).unwrap();
        let n = d.mesh.vertex_count();
        let ones = vec![1.0; n];
        assert!((d.mass.quadratic(&ones, &ones) - d.mesh.area()).abs() < 1e-12);
        let k1 = d.stiffness.matvec(&ones);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
        // ∫|∇x|² = area
        let xs: Vec<f64> = d.mesh.vertices.iter().map(|p| p[0]).collect();
        assert!((d.stiffness.quadratic(&xs, &xs) - d.mesh.area()).abs() < 1e-12);
    }

    #[test]
    fn morph_reproduces_affine_maps() {
        let disk = FourierCurve::circle([0.0, 0.0], 1.0);
        let d = Domain::new(disk.clone(), 0.15).unwrap();
        let moved = d.morph(disk.scaled_about([0.0, 0.0], 1.1)).unwrap();
        for (p, q) in d.mesh.vertices.iter().zip(&moved.mesh.vertices) {
            assert!((q[0] - 1.1 * p[0]).abs() < 1e-10 && (q[1] - 1.1 * p[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn neumann_first_mode_is_constant() {
        let d = Domain::new(FourierCurve::circle([0.0, 0.0], 1.0), 0.2).unwrap();
        let pairs = solve_eigs(&d, BoundaryCondition::Neumann, 2).unwrap();
        assert!(pairs[0].lambda.abs() < 1e-8);
        let c = pairs[0].values[0];
        assert!(c > 0.0 && pairs[0].values.iter().all(|v| (v - c).abs() < 1e-8));
    }
}
