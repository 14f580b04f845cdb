//! Lowest eigenpairs of K x = λ M x by shift-invert block subspace iteration
//! with Rayleigh-Ritz projection.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::{CsrMatrix, SkylineCholesky};
use crate::error::{Error, Result};

const SHIFT: f64 = -1.0;
const MAX_ITERATIONS: usize = 400;
const START_SEED: u64 = 0x5eed_cafe;

pub struct EigenOptions {
    /// stop when ‖Kx − λMx‖ ≤ tol ‖Mx‖ for every requested pair
    pub tol: f64,
    /// accept after the iteration budget when the residual is below this
    pub accept: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-10, accept: 1e-8 }
    }
}

/// The `count` smallest eigenvalues (ascending) and M-orthonormal vectors.
pub fn lowest_eigenpairs(
    k: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = k.n;
    if count == 0 || count > n {
        return Err(Error::SolverDivergence(format!("cannot extract {count} pairs from {n} unknowns")));
    }
    let block = (count + count.max(8)).min(n);
    let shifted = SkylineCholesky::factor(&k.combine(1.0, m, -SHIFT))?;

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut x = DMatrix::<f64>::from_fn(n, block, |_, _| rng.random_range(-1.0..1.0));
    for i in 0..n {
        x[(i, 0)] = 1.0;
    }
    let mut mx = apply(m, &x);
    let mut values = vec![0.0; block];
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let mut y = DMatrix::<f64>::zeros(n, block);
        for c in 0..block {
            let col: Vec<f64> = mx.column(c).iter().copied().collect();
            y.set_column(c, &nalgebra::DVector::from_vec(shifted.solve(&col)));
        }
        let ky = apply(k, &y);
        let my = apply(m, &y);
        let kr = symmetrize(y.transpose() * &ky);
        let mr = symmetrize(y.transpose() * &my);
        let (theta, q) = ritz(&kr, &mr)?;
        x = &y * &q;
        let kx = &ky * &q;
        mx = &my * &q;
        values = theta;
        worst = 0.0;
        for c in 0..count {
            let r = kx.column(c) - mx.column(c) * values[c];
            let rel = r.norm() / mx.column(c).norm().max(1e-300);
            worst = f64::max(worst, rel);
        }
        if worst <= opts.tol {
            break;
        }
    }
    if !(worst <= opts.accept) {
        return Err(Error::SolverDivergence(format!("relative residual {worst:.3e} after {MAX_ITERATIONS} sweeps")));
    }
    let vectors = (0..count).map(|c| x.column(c).iter().copied().collect()).collect();
    values.truncate(count);
    Ok((values, vectors))
}

fn apply(a: &CsrMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::zeros(x.nrows(), x.ncols());
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            for c in 0..x.ncols() {
                out[(i, c)] += v * x[(j, c)];
            }
        }
    }
    out
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// Solves the projected problem Kr q = θ Mr q; columns of q are
/// Mr-orthonormal and θ is ascending.
fn ritz(kr: &DMatrix<f64>, mr: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = mr
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SolverDivergence("projected mass matrix lost definiteness".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SolverDivergence("projected mass matrix is singular".into()))?;
    let c = symmetrize(&linv * kr * linv.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let p = order.len();
    let mut vecs = DMatrix::<f64>::zeros(p, p);
    let mut theta = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        theta.push(eig.eigenvalues[src]);
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((theta, linv.transpose() * vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// 1D P1 Dirichlet problem on (0, 1) with n interior nodes.
    fn chain(n: usize) -> (CsrMatrix, CsrMatrix) {
        let h = 1.0 / (n + 1) as f64;
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        for i in 0..n {
            kt.push((i, i, 2.0 / h));
            mt.push((i, i, 4.0 * h / 6.0));
            if i + 1 < n {
                kt.push((i, i + 1, -1.0 / h));
                kt.push((i + 1, i, -1.0 / h));
                mt.push((i, i + 1, h / 6.0));
                mt.push((i + 1, i, h / 6.0));
            }
        }
        (CsrMatrix::from_triplets(n, &kt), CsrMatrix::from_triplets(n, &mt))
    }

    #[test]
    fn matches_closed_form_p1_chain() {
        let n = 199;
        let (k, m) = chain(n);
        let (vals, vecs) = lowest_eigenpairs(&k, &m, 4, &EigenOptions::default()).unwrap();
        let h = 1.0 / (n + 1) as f64;
        for (j, v) in vals.iter().enumerate() {
            // exact discrete eigenvalues of the P1 chain
            let c = (PI * (j + 1) as f64 * h).cos();
            let exact = 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
            assert!((v - exact).abs() < 1e-8 * exact, "{v} vs {exact}");
        }
        for a in 0..4 {
            for b in 0..4 {
                let g = m.quadratic(&vecs[a], &vecs[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10);
            }
        }
    }
}
