//! Bessel functions of the first kind, their roots and the closed-form disk
//! spectra built from them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 12.0;

/// J_n(x) for n ≥ 0 and x ≥ 0.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_LIMIT {
        series(n, x)
    } else {
        miller(n, x)
    }
}

/// Ascending series Σ (−1)^k (x/2)^(2k+n) / (k! (k+n)!).
fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + n as usize) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k as f64 > half {
            break;
        }
    }
    sum
}

/// Backward recurrence J_{k−1} = (2k/x) J_k − J_{k+1}, normalized with
/// J_0 + 2 Σ J_{2k} = 1.
fn miller(n: u32, x: f64) -> f64 {
    let start = {
        let m = (x.max(n as f64) + 40.0 + 10.0 * x.sqrt()) as usize;
        m + m % 2
    };
    let (mut next, mut cur) = (0.0_f64, 1e-30_f64);
    let mut norm = 0.0;
    let mut want = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds the unnormalized J_{k−1}
        let idx = k - 1;
        if idx == n as usize {
            want = cur;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            want *= 1e-250;
        }
    }
    norm += cur;
    want / norm
}

/// J_n'(x); J_0' = −J_1 and J_n' = (J_{n−1} − J_{n+1}) / 2.
pub fn bessel_j_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        -bessel_j(1, x)
    } else {
        0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
    }
}

/// J_n''(x) from Bessel's equation.
fn bessel_j_second(n: u32, x: f64) -> f64 {
    let nf = n as f64;
    -bessel_j_prime(n, x) / x - (1.0 - nf * nf / (x * x)) * bessel_j(n, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RootKind {
    /// zeros of J_n
    Function,
    /// positive zeros of J_n'
    Derivative,
}

impl RootKind {
    pub fn label(self) -> &'static str {
        match self {
            RootKind::Function => "function",
            RootKind::Derivative => "derivative",
        }
    }
}

/// m-th positive root (m ≥ 1) of J_n or J_n'.
pub fn bessel_root(n: u32, m: u32, kind: RootKind) -> Result<f64> {
    if m == 0 {
        return Err(Error::ConvergenceFailure("root index starts at 1".into()));
    }
    let f = |x: f64| match kind {
        RootKind::Function => bessel_j(n, x),
        RootKind::Derivative => bessel_j_prime(n, x),
    };
    let df = |x: f64| match kind {
        RootKind::Function => bessel_j_prime(n, x),
        RootKind::Derivative => bessel_j_second(n, x),
    };
    // no roots of J_n or J_n' (other than 0) lie below n
    let mut lo = (n as f64).max(0.05);
    let mut flo = f(lo);
    let mut found = 0;
    let step = 0.25;
    loop {
        let hi = lo + step;
        let fhi = f(hi);
        if flo == 0.0 || flo * fhi < 0.0 {
            found += 1;
            if found == m {
                return refine(lo, hi, f, df);
            }
        }
        lo = hi;
        flo = fhi;
        if lo > 1e4 {
            return Err(Error::ConvergenceFailure(format!("no bracket for root ({n}, {m})")));
        }
    }
}

fn refine(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Result<f64> {
    let mut fa = f(a);
    if fa == 0.0 {
        return Ok(a);
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fa * fx < 0.0 {
            b = x;
        } else {
            a = x;
            fa = fx;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - x).abs() <= 1e-15 * x.max(1.0) || b - a <= 1e-14 * x.max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::ConvergenceFailure(format!("root refinement stalled near {x}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub fn label(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }

    pub fn root_kind(self) -> RootKind {
        match self {
            BoundaryCondition::Dirichlet => RootKind::Function,
            BoundaryCondition::Neumann => RootKind::Derivative,
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "neumann" => Ok(BoundaryCondition::Neumann),
            other => Err(Error::Config(format!("unknown boundary condition {other:?}"))),
        }
    }
}

/// Angular factor of a disk mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Angular {
    Radial,
    Cos,
    Sin,
}

/// Separated eigenfunction u = N J_n(j r / R) {cos nθ, sin nθ} on the disk
/// of radius R, with N fixing ∫u² = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskEigen {
    pub radius: f64,
    pub bc: BoundaryCondition,
    pub lambda: f64,
    pub n: u32,
    /// 0 for the Neumann constant mode
    pub m: u32,
    pub root: f64,
    pub angular: Angular,
    /// amplitude of u on the boundary
    pub trace: f64,
    /// amplitude of ∂u/∂ν on the boundary
    pub flux: f64,
}

impl DiskEigen {
    fn new(radius: f64, bc: BoundaryCondition, n: u32, m: u32, root: f64, angular: Angular) -> Self {
        if m == 0 {
            let trace = 1.0 / (PI * radius * radius).sqrt();
            return Self { radius, bc, lambda: 0.0, n, m, root, angular, trace, flux: 0.0 };
        }
        let nf = n as f64;
        let jn = bessel_j(n, root);
        let jp = bessel_j_prime(n, root);
        let radial = 0.5 * radius * radius * (jp * jp + (1.0 - nf * nf / (root * root)) * jn * jn);
        let angular_weight = if n == 0 { 2.0 * PI } else { PI };
        let norm = 1.0 / (angular_weight * radial).sqrt();
        let (trace, flux) = match bc {
            BoundaryCondition::Dirichlet => (0.0, norm * root / radius * jp),
            BoundaryCondition::Neumann => (norm * jn, 0.0),
        };
        Self { radius, bc, lambda: (root / radius).powi(2), n, m, root, angular, trace, flux }
    }
}

/// The `count` smallest eigenvalues on the disk of radius R, listing the
/// cos and sin copies of every n ≥ 1 mode.
pub fn disk_spectrum(radius: f64, bc: BoundaryCondition, count: usize) -> Result<Vec<DiskEigen>> {
    let mut all = Vec::new();
    if bc == BoundaryCondition::Neumann {
        all.push(DiskEigen::new(radius, bc, 0, 0, 0.0, Angular::Radial));
    }
    let span = count as u32 + 1;
    for n in 0..span {
        for m in 1..=span {
            let root = bessel_root(n, m, bc.root_kind())?;
            if n == 0 {
                all.push(DiskEigen::new(radius, bc, n, m, root, Angular::Radial));
            } else {
                all.push(DiskEigen::new(radius, bc, n, m, root, Angular::Cos));
                all.push(DiskEigen::new(radius, bc, n, m, root, Angular::Sin));
            }
        }
    }
    all.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.n.cmp(&b.n)));
    all.truncate(count);
    Ok(all)
}

/// j_{0,1}, the first zero of J_0.
pub fn first_dirichlet_root() -> f64 {
    bessel_root(0, 1, RootKind::Function).expect("j_{0,1} is bracketed")
}

/// Λ(B_R) = |∂u/∂ν| on ∂B_R for the normalized first Dirichlet mode.
pub fn lambda_disk(radius: f64) -> f64 {
    first_dirichlet_root() / (PI.sqrt() * radius * radius)
}

/// Whether −Δ − k² has a positive first Dirichlet eigenvalue on B_R.
pub fn max_principle_holds(k: f64, radius: f64) -> bool {
    k.abs() < first_dirichlet_root() / radius
}
