//! Closed planar curves given by truncated Fourier series, their moving
//! frames, and the reflection/symmetry predicates used to study domains
//! bounded by them.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fourier_coefficients, grid_angle};

/// Default number of quadrature nodes on the parameter circle.
pub const DEFAULT_NODES: usize = 256;

pub type Point = [f64; 2];

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Smallest power of two grid that integrates products of the curve's
/// harmonics exactly.
fn exact_grid(harmonics: usize) -> usize {
    (4 * (harmonics + 1)).next_power_of_two().max(DEFAULT_NODES)
}

/// c(θ) = Σ_m cos_m cos(mθ) + sin_m sin(mθ), m = 0..=M, counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCurve {
    cos: Vec<Point>,
    sin: Vec<Point>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveFile {
    harmonics_max: usize,
    cos: Vec<Point>,
    sin: Vec<Point>,
}

impl FourierCurve {
    /// Builds a curve and checks immersion, embeddedness and orientation.
    pub fn new(cos: Vec<Point>, sin: Vec<Point>) -> Result<Self> {
        let curve = Self::from_coefficients(cos, sin)?;
        curve.validate()?;
        Ok(curve)
    }

    fn from_coefficients(cos: Vec<Point>, mut sin: Vec<Point>) -> Result<Self> {
        if cos.is_empty() || cos.len() != sin.len() {
            return Err(Error::InvalidCurve(format!(
                "cos/sin lengths {} and {} must agree and be >= 1",
                cos.len(),
                sin.len()
            )));
        }
        if cos.iter().chain(sin.iter()).any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidCurve("non-finite coefficient".into()));
        }
        sin[0] = [0.0, 0.0];
        Ok(Self { cos, sin })
    }

    pub fn circle(center: Point, radius: f64) -> Self {
        Self::ellipse(center, radius, radius)
    }

    /// Axis-aligned ellipse with semi-axes `a` (x) and `b` (y).
    pub fn ellipse(center: Point, a: f64, b: f64) -> Self {
        Self { cos: vec![center, [a, 0.0]], sin: vec![[0.0, 0.0], [0.0, b]] }
    }

    /// c(θ) = ((1 + 0.65 cos 2θ) cos θ + 0.8 cos²θ, (1 + 0.65 cos 2θ) sin θ),
    /// a curve with a dent that is not convex in the x direction.
    pub fn kidney() -> Self {
        // (1 + 0.65 cos2θ) cosθ = cosθ + 0.325 (cos3θ + cosθ)
        // (1 + 0.65 cos2θ) sinθ = sinθ + 0.325 (sin3θ - sinθ)
        // 0.8 cos²θ = 0.4 + 0.4 cos2θ
        Self {
            cos: vec![[0.4, 0.0], [1.325, 0.0], [0.4, 0.0], [0.325, 0.0]],
            sin: vec![[0.0, 0.0], [0.0, 0.675], [0.0, 0.0], [0.0, 0.325]],
        }
    }

    /// Least-squares projection of samples on the uniform grid onto
    /// `harmonics` Fourier modes.
    pub fn from_samples(points: &[Point], harmonics: usize) -> Result<Self> {
        if points.len() < 2 * harmonics + 1 {
            return Err(Error::InvalidCurve(format!(
                "{} samples cannot resolve {harmonics} harmonics",
                points.len()
            )));
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let (x0, xa, xb) = fourier_coefficients(&xs, harmonics);
        let (y0, ya, yb) = fourier_coefficients(&ys, harmonics);
        let mut cos = vec![[x0, y0]];
        let mut sin = vec![[0.0, 0.0]];
        for m in 0..harmonics {
            cos.push([xa[m], ya[m]]);
            sin.push([xb[m], yb[m]]);
        }
        Self::new(cos, sin)
    }

    pub fn harmonics_max(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn cos_coefficients(&self) -> &[Point] {
        &self.cos
    }

    pub fn sin_coefficients(&self) -> &[Point] {
        &self.sin
    }

    /// Same curve with the coefficient table padded (or truncated) to `m`.
    pub fn with_harmonics(&self, m: usize) -> Self {
        let mut cos = self.cos.clone();
        let mut sin = self.sin.clone();
        cos.resize(m + 1, [0.0, 0.0]);
        sin.resize(m + 1, [0.0, 0.0]);
        Self { cos, sin }
    }

    /// k-th derivative of c at θ.
    pub fn derivative(&self, theta: f64, order: u32) -> Point {
        let mut out = [0.0, 0.0];
        for (m, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let mf = m as f64;
            let (s, c) = (mf * theta).sin_cos();
            // d^k/dθ^k of (cos mθ, sin mθ)
            let (dc, ds) = match order % 4 {
                0 => (c, s),
                1 => (-s, c),
                2 => (-c, -s),
                _ => (s, -c),
            };
            let w = mf.powi(order as i32);
            if order > 0 && m == 0 {
                continue;
            }
            out[0] += w * (a[0] * dc + b[0] * ds);
            out[1] += w * (a[1] * dc + b[1] * ds);
        }
        out
    }

    pub fn eval(&self, theta: f64) -> Point {
        self.derivative(theta, 0)
    }

    pub fn sample(&self, n: usize) -> Vec<Point> {
        (0..n).map(|i| self.eval(grid_angle(i, n))).collect()
    }

    /// Position, tangent, speed, outward normal and curvature at `nodes`
    /// uniform parameter values.
    pub fn frame(&self, nodes: usize) -> Result<Frame> {
        if !nodes.is_power_of_two() || nodes < 4 * (self.harmonics_max() + 1) {
            return Err(Error::InvalidCurve(format!(
                "grid of {nodes} nodes is not a power of two >= 4(M+1) = {}",
                4 * (self.harmonics_max() + 1)
            )));
        }
        let mut frame = Frame {
            theta: Vec::with_capacity(nodes),
            position: Vec::with_capacity(nodes),
            tangent: Vec::with_capacity(nodes),
            speed: Vec::with_capacity(nodes),
            normal: Vec::with_capacity(nodes),
            curvature: Vec::with_capacity(nodes),
        };
        for i in 0..nodes {
            let t = grid_angle(i, nodes);
            let d1 = self.derivative(t, 1);
            let d2 = self.derivative(t, 2);
            let speed = norm(d1);
            if speed < 1e-10 {
                return Err(Error::ImmersionViolation { node: i, speed });
            }
            frame.theta.push(t);
            frame.position.push(self.eval(t));
            frame.tangent.push(d1);
            frame.speed.push(speed);
            frame.normal.push([d1[1] / speed, -d1[0] / speed]);
            frame.curvature.push(cross(d1, d2) / speed.powi(3));
        }
        check_simple(&frame.position)?;
        Ok(frame)
    }

    fn validate(&self) -> Result<()> {
        let n = exact_grid(self.harmonics_max());
        self.frame(n)?;
        let area = self.area();
        if area <= 0.0 {
            return Err(Error::Orientation(area));
        }
        Ok(())
    }

    /// Signed enclosed area ½∮(x dy − y dx); exact for the truncated series.
    pub fn area(&self) -> f64 {
        let n = exact_grid(self.harmonics_max());
        let mut acc = 0.0;
        for i in 0..n {
            let t = grid_angle(i, n);
            acc += cross(self.eval(t), self.derivative(t, 1));
        }
        0.5 * acc * TAU / n as f64
    }

    /// Area centroid of the enclosed region.
    pub fn centroid(&self) -> Point {
        let n = exact_grid(self.harmonics_max());
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let t = grid_angle(i, n);
            let p = self.eval(t);
            let d = self.derivative(t, 1);
            cx += p[0] * p[0] * d[1];
            cy -= p[1] * p[1] * d[0];
        }
        let a = self.area();
        let w = TAU / n as f64 / (2.0 * a);
        [cx * w, cy * w]
    }

    /// Uniform scaling about the centroid so that the enclosed area equals
    /// `target`.
    pub fn rescale_to_area(&self, target: f64) -> Result<Self> {
        if !(target > 0.0) || !target.is_finite() {
            return Err(Error::NonPositiveTarget(target));
        }
        let k = (target / self.area()).sqrt();
        let c = self.centroid();
        Ok(self.scaled_about(c, k))
    }

    pub fn scaled_about(&self, center: Point, k: f64) -> Self {
        let mut cos: Vec<Point> = self.cos.iter().map(|p| [k * p[0], k * p[1]]).collect();
        let sin: Vec<Point> = self.sin.iter().map(|p| [k * p[0], k * p[1]]).collect();
        let c0 = self.cos[0];
        cos[0] = [center[0] + k * (c0[0] - center[0]), center[1] + k * (c0[1] - center[1])];
        Self { cos, sin }
    }

    /// Rigid motion x ↦ R(angle) x + shift applied to the coefficients.
    pub fn rigid_motion(&self, angle: f64, shift: Point) -> Self {
        let (s, c) = angle.sin_cos();
        let rot = |p: &Point| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        let mut cos: Vec<Point> = self.cos.iter().map(rot).collect();
        let sin = self.sin.iter().map(rot).collect();
        cos[0] = [cos[0][0] + shift[0], cos[0][1] + shift[1]];
        Self { cos, sin }
    }

    /// Maximum distance between dense boundary samples.
    pub fn diameter(&self) -> f64 {
        let pts = self.sample(512);
        let mut best: f64 = 0.0;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                best = best.max(norm(sub(*p, *q)));
            }
        }
        best
    }

    pub fn perimeter(&self) -> f64 {
        let n = exact_grid(self.harmonics_max()).max(1024);
        (0..n).map(|i| norm(self.derivative(grid_angle(i, n), 1))).sum::<f64>() * TAU / n as f64
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CurveFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let file: CurveFile = serde_json::from_value(value)?;
        Self::from_file(file)
    }

    fn from_file(file: CurveFile) -> Result<Self> {
        let m = file.harmonics_max;
        if file.cos.len() != m + 1 || file.sin.len() != m + 1 {
            return Err(Error::InvalidCurve(format!(
                "expected {} cos and sin entries for harmonics_max = {m}",
                m + 1
            )));
        }
        if file.sin[0] != [0.0, 0.0] {
            return Err(Error::InvalidCurve("sin entry 0 must be [0, 0]".into()));
        }
        Self::new(file.cos, file.sin)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(CurveFile {
            harmonics_max: self.harmonics_max(),
            cos: self.cos.clone(),
            sin: self.sin.clone(),
        })
        .expect("curve serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("curve serializes")
    }

    /// Directional convexity test by reflecting caps. See [`P0Report`].
    pub fn p0_predicate(&self, direction: Point) -> Result<P0Report> {
        let cap = HalfspaceCap::new(direction, 0.0)?;
        let e = cap.direction;
        let across = [-e[1], e[0]];
        let poly = self.sample(P0_SAMPLES);
        let diam = self.diameter();
        let tol = 1e-9 * diam;

        let offsets: Vec<f64> = poly.iter().map(|p| dot(*p, across)).collect();
        let lo = offsets.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        for k in 0..P0_CHORDS {
            let offset = lo + (hi - lo) * (k as f64 + 0.5) / P0_CHORDS as f64;
            let intervals = chord_intervals(&poly, e, across, offset);
            if intervals.is_empty() {
                continue;
            }
            let a = intervals[0].0;
            let b = intervals[intervals.len() - 1].1;
            let mid = 0.5 * (a + b);
            for j in 1..=P0_LEVELS {
                // levels run from the extreme a up to the chord center
                let level = a + (mid - a) * j as f64 / P0_LEVELS as f64;
                let cap_line = HalfspaceCap { direction: e, level };
                for &(s0, s1) in &intervals {
                    if s0 > level {
                        break;
                    }
                    let top = s1.min(level);
                    let r0 = cap_line.reflect_coordinate(top);
                    let r1 = cap_line.reflect_coordinate(s0);
                    if !covered(&intervals, r0, r1, tol) {
                        return Ok(P0Report {
                            holds: false,
                            violation: Some(P0Violation { chord_offset: offset, level: level - mid }),
                        });
                    }
                }
            }
        }
        Ok(P0Report { holds: true, violation: None })
    }

    /// Hausdorff distance between the polyline and its mirror image across
    /// the line through the area centroid normal to `direction`, divided by
    /// the diameter.
    pub fn symmetry_defect(&self, direction: Point) -> Result<f64> {
        let e = HalfspaceCap::new(direction, 0.0)?.direction;
        let c = self.centroid();
        let poly = self.sample(SYMMETRY_SAMPLES);
        let mirrored: Vec<Point> = poly
            .iter()
            .map(|p| {
                let t = dot(sub(*p, c), e);
                [p[0] - 2.0 * t * e[0], p[1] - 2.0 * t * e[1]]
            })
            .collect();
        let forward = mirrored.iter().map(|p| distance_to_polyline(*p, &poly)).fold(0.0, f64::max);
        let backward = poly.iter().map(|p| distance_to_polyline(*p, &mirrored)).fold(0.0, f64::max);
        Ok(forward.max(backward) / self.diameter())
    }

    /// Algebraic least-squares circle fit and its normalized max residual.
    pub fn disk_defect(&self) -> DiskFit {
        let pts = self.sample(SYMMETRY_SAMPLES);
        // x² + y² + D x + E y + F = 0 in the least-squares sense
        let mut ata = nalgebra::Matrix3::<f64>::zeros();
        let mut atb = nalgebra::Vector3::<f64>::zeros();
        for p in &pts {
            let row = nalgebra::Vector3::new(p[0], p[1], 1.0);
            let rhs = -(p[0] * p[0] + p[1] * p[1]);
            ata += row * row.transpose();
            atb += row * rhs;
        }
        let sol = ata.lu().solve(&atb).unwrap_or_else(nalgebra::Vector3::zeros);
        let center = [-0.5 * sol[0], -0.5 * sol[1]];
        let radius = (center[0] * center[0] + center[1] * center[1] - sol[2]).max(0.0).sqrt();
        let defect = pts
            .iter()
            .map(|p| (norm(sub(*p, center)) - radius).abs())
            .fold(0.0, f64::max)
            / radius;
        DiskFit { center, radius, defect }
    }
}

const P0_SAMPLES: usize = 4096;
const P0_CHORDS: usize = 256;
const P0_LEVELS: usize = 64;
const SYMMETRY_SAMPLES: usize = 1024;

/// Outcome of the cap-reflection test.
///
/// Each chord of the domain parallel to `e` is centered on its own midpoint
/// (for a domain symmetric about a hyperplane normal to `e` every midpoint
/// lies on that hyperplane). Caps between the extreme point and 64 levels up
/// to the center are reflected across the level and must stay inside.
#[derive(Debug, Clone, PartialEq)]
pub struct P0Report {
    pub holds: bool,
    pub violation: Option<P0Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P0Violation {
    /// offset of the failing chord along the direction orthogonal to `e`
    pub chord_offset: f64,
    /// level relative to the chord center (≤ 0)
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskFit {
    pub center: Point,
    pub radius: f64,
    pub defect: f64,
}

/// Reflection hyperplane {x·e = level} with its upper half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfspaceCap {
    pub direction: Point,
    pub level: f64,
}

impl HalfspaceCap {
    pub fn new(direction: Point, level: f64) -> Result<Self> {
        let len = norm(direction);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::DegenerateDirection(len));
        }
        Ok(Self { direction, level })
    }

    pub fn reflect(&self, p: Point) -> Point {
        let t = dot(p, self.direction) - self.level;
        [p[0] - 2.0 * t * self.direction[0], p[1] - 2.0 * t * self.direction[1]]
    }

    fn reflect_coordinate(&self, s: f64) -> f64 {
        2.0 * self.level - s
    }

    pub fn contains(&self, p: Point) -> bool {
        dot(p, self.direction) >= self.level
    }
}

/// Sorted intervals (along `e`) where the line {x·across = offset} is inside
/// the polygon.
fn chord_intervals(poly: &[Point], e: Point, across: Point, offset: f64) -> Vec<(f64, f64)> {
    let n = poly.len();
    let mut hits = Vec::new();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let (dp, dq) = (dot(p, across) - offset, dot(q, across) - offset);
        if (dp > 0.0) != (dq > 0.0) {
            let w = dp / (dp - dq);
            let x = [p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])];
            hits.push(dot(x, e));
        }
    }
    hits.sort_by(|a, b| a.total_cmp(b));
    hits.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

fn covered(intervals: &[(f64, f64)], lo: f64, hi: f64, tol: f64) -> bool {
    intervals.iter().any(|&(a, b)| a - tol <= lo && hi <= b + tol)
}

fn distance_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

fn distance_to_polyline(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| distance_to_segment(p, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = cross(sub(b, a), sub(c, a));
    let o2 = cross(sub(b, a), sub(d, a));
    let o3 = cross(sub(d, c), sub(a, c));
    let o4 = cross(sub(d, c), sub(b, c));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn check_simple(poly: &[Point]) -> Result<()> {
    let n = poly.len();
    // bounding boxes prune most pairs
    let boxes: Vec<[f64; 4]> = (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            [p[0].min(q[0]), p[0].max(q[0]), p[1].min(q[1]), p[1].max(q[1])]
        })
        .collect();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (bi, bj) = (boxes[i], boxes[j]);
            if bi[1] < bj[0] || bj[1] < bi[0] || bi[3] < bj[2] || bj[3] < bi[2] {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(Error::SelfIntersection { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// Winding-number point-in-polygon test.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut winding = 0i32;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let side = cross(sub(b, a), sub(p, a));
        if a[1] <= p[1] {
            if b[1] > p[1] && side > 0.0 {
                winding += 1;
            }
        } else if b[1] <= p[1] && side < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Geometric data of a curve on the uniform parameter grid.
#[derive(Debug, Clone)]
pub struct Frame {
    pub theta: Vec<f64>,
    pub position: Vec<Point>,
    /// c_θ
    pub tangent: Vec<Point>,
    /// |c_θ|
    pub speed: Vec<f64>,
    /// outward unit normal
    pub normal: Vec<Point>,
    pub curvature: Vec<f64>,
}

impl Frame {
    pub fn nodes(&self) -> usize {
        self.theta.len()
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.nodes() as f64
    }

    /// Trapezoid rule ∮ f ds.
    pub fn integrate(&self, f: &BoundaryScalar) -> f64 {
        debug_assert_eq!(f.len(), self.nodes());
        f.samples.iter().zip(&self.speed).map(|(v, s)| v * s).sum::<f64>() * self.dtheta()
    }

    /// ∮ f g ds.
    pub fn inner(&self, f: &BoundaryScalar, g: &BoundaryScalar) -> f64 {
        f.samples
            .iter()
            .zip(&g.samples)
            .zip(&self.speed)
            .map(|((a, b), s)| a * b * s)
            .sum::<f64>()
            * self.dtheta()
    }

    pub fn length(&self) -> f64 {
        self.speed.iter().sum::<f64>() * self.dtheta()
    }

    pub fn curvature_field(&self) -> BoundaryScalar {
        BoundaryScalar::new(self.curvature.clone())
    }

    /// Checks that a field lives on this grid.
    pub fn check(&self, f: &BoundaryScalar) -> Result<()> {
        if f.len() != self.nodes() {
            return Err(Error::GridMismatch { left: f.len(), right: self.nodes() });
        }
        Ok(())
    }
}

/// Real field sampled at θ_i = 2πi/N on the parameter circle.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScalar {
    pub samples: Vec<f64>,
}

impl BoundaryScalar {
    pub fn new(samples: Vec<f64>) -> Self {
        Self { samples }
    }

    pub fn constant(n: usize, v: f64) -> Self {
        Self { samples: vec![v; n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self { samples: (0..n).map(|i| f(grid_angle(i, n))).collect() }
    }

    /// a_0 + Σ_k a_k cos kθ + b_k sin kθ with coefficients laid out as
    /// [a_0, a_1, b_1, a_2, b_2, ...].
    pub fn from_fourier(n: usize, coeffs: &[f64]) -> Self {
        Self::from_fn(n, |t| {
            let mut v = coeffs.first().copied().unwrap_or(0.0);
            for (j, c) in coeffs.iter().enumerate().skip(1) {
                let k = ((j + 1) / 2) as f64;
                v += if j % 2 == 1 { c * (k * t).cos() } else { c * (k * t).sin() };
            }
            v
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { samples: self.samples.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { samples: self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }
}

/// Polynomial vector field W(x, y) = Σ c_ij x^i y^j per component.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientField {
    /// terms (i, j, coefficient) of each component
    pub terms: [Vec<(u32, u32, f64)>; 2],
}

impl AmbientField {
    pub fn new(x_terms: Vec<(u32, u32, f64)>, y_terms: Vec<(u32, u32, f64)>) -> Self {
        Self { terms: [x_terms, y_terms] }
    }

    /// W(x, y) = (x, y)
    pub fn radial() -> Self {
        Self::new(vec![(1, 0, 1.0)], vec![(0, 1, 1.0)])
    }

    /// W(x, y) = (−y, x)
    pub fn rotation() -> Self {
        Self::new(vec![(0, 1, -1.0)], vec![(1, 0, 1.0)])
    }

    pub fn constant(v: Point) -> Self {
        Self::new(vec![(0, 0, v[0])], vec![(0, 0, v[1])])
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().flatten().map(|&(i, j, _)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, p: Point) -> Point {
        let comp = |terms: &[(u32, u32, f64)]| {
            terms.iter().map(|&(i, j, c)| c * p[0].powi(i as i32) * p[1].powi(j as i32)).sum()
        };
        [comp(&self.terms[0]), comp(&self.terms[1])]
    }

    /// Jacobian rows ∂W_k/∂(x, y).
    pub fn jacobian(&self, p: Point) -> [[f64; 2]; 2] {
        let grad = |terms: &[(u32, u32, f64)]| {
            let mut g = [0.0, 0.0];
            for &(i, j, c) in terms {
                if i > 0 {
                    g[0] += c * i as f64 * p[0].powi(i as i32 - 1) * p[1].powi(j as i32);
                }
                if j > 0 {
                    g[1] += c * j as f64 * p[0].powi(i as i32) * p[1].powi(j as i32 - 1);
                }
            }
            g
        };
        [grad(&self.terms[0]), grad(&self.terms[1])]
    }

    /// Directional derivative D_V W = (DW) V at p.
    pub fn directional(&self, v: &AmbientField, p: Point) -> Point {
        let j = self.jacobian(p);
        let vv = v.eval(p);
        [dot(j[0], vv), dot(j[1], vv)]
    }

    /// Normal component ⟨W, ν⟩ along a frame.
    pub fn normal_component(&self, frame: &Frame) -> BoundaryScalar {
        BoundaryScalar::new(
            frame.position.iter().zip(&frame.normal).map(|(p, n)| dot(self.eval(*p), *n)).collect(),
        )
    }
}

/// Rotates a unit direction by `k` of `count` equal steps over a half turn.
pub fn test_direction(k: usize, count: usize) -> Point {
    let a = PI * k as f64 / count as f64;
    [a.cos(), a.sin()]
}
