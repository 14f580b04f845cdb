//! Small numerical kernels shared by the geometry, FEM and Riemannian modules:
//! cyclic tridiagonal solves, periodic cubic splines and spectral
//! differentiation on a uniform periodic grid.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Solves the periodic tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` (indices mod n)
/// with the Sherman-Morrison correction of the corner entries.
pub fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 || lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::SingularOperator(format!(
            "cyclic system needs n >= 3 and matching lengths (n = {n})"
        )));
    }
    // corner entries: A[0][n-1] = lower[0], A[n-1][0] = upper[n-1]
    let corner_top = lower[0];
    let corner_bottom = upper[n - 1];
    let gamma = if diag[0] != 0.0 { -diag[0] } else { -1.0 };

    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= corner_bottom * corner_top / gamma;

    let x = solve_tridiagonal(&lower[1..], &bb, &upper[..n - 1], rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner_bottom;
    let z = solve_tridiagonal(&lower[1..], &bb, &upper[..n - 1], &u)?;

    let denom = 1.0 + z[0] + corner_top * z[n - 1] / gamma;
    if denom.abs() < 1e-300 {
        return Err(Error::SingularOperator("cyclic correction breaks down".into()));
    }
    let fact = (x[0] + corner_top * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

/// Thomas algorithm. `sub` and `sup` have length n-1.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut gam = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut bet = diag[0];
    if bet == 0.0 {
        return Err(Error::SingularOperator("zero pivot in tridiagonal solve".into()));
    }
    x[0] = rhs[0] / bet;
    for j in 1..n {
        gam[j] = sup[j - 1] / bet;
        bet = diag[j] - sub[j - 1] * gam[j];
        if bet == 0.0 {
            return Err(Error::SingularOperator("zero pivot in tridiagonal solve".into()));
        }
        x[j] = (rhs[j] - sub[j - 1] * x[j - 1]) / bet;
    }
    for j in (0..n - 1).rev() {
        x[j] -= gam[j + 1] * x[j + 1];
    }
    Ok(x)
}

/// Interpolating periodic cubic spline on strictly increasing, possibly
/// non-uniform knots covering one period.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
    period: f64,
}

impl PeriodicSpline {
    pub fn new(knots: &[f64], values: &[f64], period: f64) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::SingularOperator("periodic spline needs >= 3 knots".into()));
        }
        let width = |i: usize| -> f64 {
            if i + 1 < n {
                knots[i + 1] - knots[i]
            } else {
                knots[0] + period - knots[n - 1]
            }
        };
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            let hp = width(prev);
            let hn = width(i);
            if hp <= 0.0 || hn <= 0.0 {
                return Err(Error::SingularOperator("spline knots must increase".into()));
            }
            lower[i] = hp;
            diag[i] = 2.0 * (hp + hn);
            upper[i] = hn;
            rhs[i] = 6.0 * ((values[next] - values[i]) / hn - (values[i] - values[prev]) / hp);
        }
        let second = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs)?;
        Ok(Self { knots: knots.to_vec(), values: values.to_vec(), second, period })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        let t0 = self.knots[0];
        let mut t = (t - t0).rem_euclid(self.period) + t0;
        if t >= t0 + self.period {
            t -= self.period;
        }
        // last knot <= t
        let i = match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            p => p - 1,
        };
        let j = (i + 1) % n;
        let left = self.knots[i];
        let right = if i + 1 < n { self.knots[i + 1] } else { t0 + self.period };
        let h = right - left;
        let a = right - t;
        let b = t - left;
        let (mi, mj) = (self.second[i], self.second[j]);
        mi * a * a * a / (6.0 * h)
            + mj * b * b * b / (6.0 * h)
            + (self.values[i] / h - mi * h / 6.0) * a
            + (self.values[j] / h - mj * h / 6.0) * b
    }
}

/// Uniform periodic grid node `i` of `n`: 2πi/n.
pub fn grid_angle(i: usize, n: usize) -> f64 {
    TAU * i as f64 / n as f64
}

/// Spectral derivative d/dθ of samples on the uniform grid over [0, 2π).
/// The Nyquist mode is dropped so the discrete operator is exactly
/// antisymmetric.
pub fn spectral_derivative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let wave = if k < n / 2 {
            k as f64
        } else if k == n / 2 && n % 2 == 0 {
            0.0
        } else {
            k as f64 - n as f64
        };
        *c *= Complex64::new(0.0, wave);
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Real Fourier coefficients (a_0, [a_k], [b_k]) for k = 1..=kmax of samples on
/// the uniform grid, so that f ≈ a_0 + Σ a_k cos kθ + b_k sin kθ.
pub fn fourier_coefficients(samples: &[f64], kmax: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let a0 = samples.iter().sum::<f64>() / n as f64;
    let mut a = vec![0.0; kmax];
    let mut b = vec![0.0; kmax];
    for k in 1..=kmax {
        let (mut sc, mut ss) = (0.0, 0.0);
        for (i, &v) in samples.iter().enumerate() {
            let ang = (k * i % n) as f64 * TAU / n as f64;
            sc += v * ang.cos();
            ss += v * ang.sin();
        }
        let scale = if 2 * k == n { 1.0 } else { 2.0 } / n as f64;
        a[k - 1] = sc * scale;
        b[k - 1] = ss * scale;
    }
    (a0, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_matvec(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| lower[i] * x[(i + n - 1) % n] + diag[i] * x[i] + upper[i] * x[(i + 1) % n])
            .collect()
    }

    #[test]
    fn cyclic_solve_recovers_rhs() {
        let n = 17;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.2 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + (i as f64).sin()).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let x = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let back = dense_matvec(&lower, &diag, &upper, &x);
        for (b, r) in back.iter().zip(&rhs) {
            assert!((b - r).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_reproduces_trig_on_uneven_knots() {
        let knots: Vec<f64> = (0..64)
            .map(|i| {
                let u = TAU * i as f64 / 64.0;
                u + 0.03 * u.sin()
            })
            .collect();
        let values: Vec<f64> = knots.iter().map(|t| (2.0 * t).cos()).collect();
        let s = PeriodicSpline::new(&knots, &values, TAU).unwrap();
        for i in 0..200 {
            let t = -1.0 + i as f64 * 0.05;
            assert!((s.eval(t) - (2.0 * t).cos()).abs() < 1e-4, "t = {t}");
        }
        assert!((s.eval(knots[5]) - values[5]).abs() < 1e-13);
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let n = 64;
        let f: Vec<f64> = (0..n).map(|i| (3.0 * grid_angle(i, n)).sin()).collect();
        let d = spectral_derivative(&f);
        for i in 0..n {
            assert!((d[i] - 3.0 * (3.0 * grid_angle(i, n)).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_coefficients_pick_out_modes() {
        let n = 128;
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let t = grid_angle(i, n);
                0.5 + 2.0 * (3.0 * t).cos() - 0.25 * (5.0 * t).sin()
            })
            .collect();
        let (a0, a, b) = fourier_coefficients(&f, 6);
        assert!((a0 - 0.5).abs() < 1e-13);
        assert!((a[2] - 2.0).abs() < 1e-13);
        assert!((b[4] + 0.25).abs() < 1e-13);
        assert!(a[0].abs() < 1e-13 && b[0].abs() < 1e-13);
    }
}
