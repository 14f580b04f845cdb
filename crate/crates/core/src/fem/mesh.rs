//! Triangulation of the region enclosed by a Fourier curve: boundary nodes
//! equally spaced in arc length, a hexagonal interior lattice and a
//! Bowyer-Watson Delaunay triangulation of the union.

use std::collections::HashMap;

use crate::curve::{point_in_polygon, FourierCurve, Point};
use crate::error::{Error, Result};

pub const MIN_ANGLE_DEGREES: f64 = 15.0;

/// P1 mesh. Vertices `0..boundary_theta.len()` are the boundary nodes in
/// increasing curve parameter; the rest are interior.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_theta: Vec<f64>,
    pub h: f64,
}

impl Mesh {
    pub fn boundary_count(&self) -> usize {
        self.boundary_theta.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_min_angle(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]))
            .fold(180.0, f64::min)
    }

    /// Boundary edge lengths l_i = |x_{i+1} − x_i| (cyclic).
    pub fn boundary_edge_lengths(&self) -> Vec<f64> {
        let nb = self.boundary_count();
        (0..nb)
            .map(|i| {
                let (p, q) = (self.vertices[i], self.vertices[(i + 1) % nb]);
                (q[0] - p[0]).hypot(q[1] - p[1])
            })
            .collect()
    }

    pub fn check_quality(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            if self.signed_area(t) <= 0.0 {
                return Err(Error::MeshFailure(format!("triangle {t} is inverted")));
            }
        }
        let angle = self.min_angle();
        if angle < MIN_ANGLE_DEGREES {
            return Err(Error::MeshFailure(format!(
                "minimum angle {angle:.2} degrees is below {MIN_ANGLE_DEGREES}"
            )));
        }
        Ok(())
    }
}

fn triangle_min_angle(a: Point, b: Point, c: Point) -> f64 {
    let la = (b[0] - c[0]).hypot(b[1] - c[1]);
    let lb = (a[0] - c[0]).hypot(a[1] - c[1]);
    let lc = (a[0] - b[0]).hypot(a[1] - b[1]);
    let angle = |opp: f64, s1: f64, s2: f64| {
        ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0).acos()
    };
    angle(la, lb, lc).min(angle(lb, la, lc)).min(angle(lc, la, lb)).to_degrees()
}

/// Parameter values splitting the curve into `n` arcs of equal length.
pub fn arc_length_parameters(curve: &FourierCurve, n: usize) -> Vec<f64> {
    let dense = 8192;
    let dt = std::f64::consts::TAU / dense as f64;
    let speed = |t: f64| {
        let d = curve.derivative(t, 1);
        d[0].hypot(d[1])
    };
    let mut cumulative = vec![0.0; dense + 1];
    for i in 0..dense {
        let (t0, t1) = (i as f64 * dt, (i + 1) as f64 * dt);
        // Simpson on each panel
        cumulative[i + 1] = cumulative[i] + dt / 6.0 * (speed(t0) + 4.0 * speed(0.5 * (t0 + t1)) + speed(t1));
    }
    let total = cumulative[dense];
    let mut out = Vec::with_capacity(n);
    let mut panel = 0;
    for k in 0..n {
        let target = total * k as f64 / n as f64;
        while panel + 1 < dense && cumulative[panel + 1] < target {
            panel += 1;
        }
        let (s0, s1) = (cumulative[panel], cumulative[panel + 1]);
        let mut t = (panel as f64 + (target - s0) / (s1 - s0)) * dt;
        // Newton on s(t) = target inside the panel
        for _ in 0..3 {
            let t0 = panel as f64 * dt;
            let mid = 0.5 * (t0 + t);
            let s = s0 + (t - t0) / 6.0 * (speed(t0) + 4.0 * speed(mid) + speed(t));
            t -= (s - target) / speed(t);
        }
        out.push(t);
    }
    out
}

fn distance_to_polygon(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let ab = [b[0] - a[0], b[1] - a[1]];
        let ap = [p[0] - a[0], p[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
        let d = (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1]);
        best = best.min(d);
    }
    best
}

/// Meshes the interior of `curve` with target edge length `h`.
pub fn triangulate(curve: &FourierCurve, h: f64) -> Result<Mesh> {
    let diameter = curve.diameter();
    if !(h > 0.0) || h >= diameter / 4.0 {
        return Err(Error::MeshFailure(format!(
            "mesh size {h} must lie in (0, diameter/4 = {})",
            diameter / 4.0
        )));
    }
    let length = curve.perimeter();
    let nb = ((length / h).ceil() as usize).max(8);
    let boundary_theta = arc_length_parameters(curve, nb);
    let boundary: Vec<Point> = boundary_theta.iter().map(|&t| curve.eval(t)).collect();

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &boundary {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let row_gap = h * 3f64.sqrt() / 2.0;
    let mut interior = Vec::new();
    let rows = ((hi[1] - lo[1]) / row_gap).ceil() as usize + 1;
    let cols = ((hi[0] - lo[0]) / h).ceil() as usize + 2;
    let y_start = 0.5 * (lo[1] + hi[1]) - 0.5 * (rows - 1) as f64 * row_gap;
    let x_start = 0.5 * (lo[0] + hi[0]) - 0.5 * (cols - 1) as f64 * h;
    for j in 0..rows {
        let y = y_start + j as f64 * row_gap;
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        let mut row: Vec<Point> = Vec::new();
        for i in 0..cols {
            let p = [x_start + shift + i as f64 * h, y];
            if point_in_polygon(p, &boundary) && distance_to_polygon(p, &boundary) >= 0.55 * h {
                row.push(p);
            }
        }
        // serpentine order keeps consecutive insertions close together
        if j % 2 == 1 {
            row.reverse();
        }
        interior.extend(row);
    }

    let mut vertices = boundary.clone();
    vertices.extend(interior);
    let mut triangles = delaunay(&vertices)?;
    triangles.retain(|t| {
        let c = [
            (vertices[t[0]][0] + vertices[t[1]][0] + vertices[t[2]][0]) / 3.0,
            (vertices[t[0]][1] + vertices[t[1]][1] + vertices[t[2]][1]) / 3.0,
        ];
        point_in_polygon(c, &boundary)
    });

    let mut mesh = Mesh { vertices, triangles, boundary_theta, h };
    drop_orphans(&mut mesh)?;
    check_boundary_edges(&mesh)?;
    smooth(&mut mesh, 6);
    mesh.check_quality()?;
    Ok(mesh)
}

fn drop_orphans(mesh: &mut Mesh) -> Result<()> {
    let n = mesh.vertex_count();
    let nb = mesh.boundary_count();
    let mut used = vec![false; n];
    for t in &mesh.triangles {
        for &v in t {
            used[v] = true;
        }
    }
    if used[..nb].iter().any(|u| !u) {
        return Err(Error::MeshFailure("a boundary node belongs to no triangle".into()));
    }
    let mut map = vec![usize::MAX; n];
    let mut vertices = Vec::with_capacity(n);
    for v in 0..n {
        if used[v] {
            map[v] = vertices.len();
            vertices.push(mesh.vertices[v]);
        }
    }
    for t in &mut mesh.triangles {
        for v in t.iter_mut() {
            *v = map[*v];
        }
    }
    mesh.vertices = vertices;
    Ok(())
}

fn check_boundary_edges(mesh: &Mesh) -> Result<()> {
    let nb = mesh.boundary_count();
    let mut directed = std::collections::HashSet::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]));
        }
    }
    for i in 0..nb {
        if !directed.contains(&(i, (i + 1) % nb)) {
            return Err(Error::MeshFailure(format!("boundary edge ({i}, {}) is missing", (i + 1) % nb)));
        }
    }
    Ok(())
}

/// Laplacian smoothing of interior nodes, rejecting moves that would invert
/// or sharpen an adjacent triangle.
fn smooth(mesh: &mut Mesh, passes: usize) {
    let n = mesh.vertex_count();
    let nb = mesh.boundary_count();
    let mut neighbors = vec![Vec::new(); n];
    let mut incident = vec![Vec::new(); n];
    for (ti, t) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            neighbors[a].push(b);
            neighbors[b].push(a);
            incident[t[k]].push(ti);
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    let local_min = |mesh: &Mesh, v: usize| -> f64 {
        incident[v]
            .iter()
            .map(|&t| {
                let tri = mesh.triangles[t];
                if mesh.signed_area(t) <= 0.0 {
                    return -1.0;
                }
                triangle_min_angle(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]])
            })
            .fold(180.0, f64::min)
    };
    for _ in 0..passes {
        for v in nb..n {
            let k = neighbors[v].len() as f64;
            let mut avg = [0.0, 0.0];
            for &w in &neighbors[v] {
                avg[0] += mesh.vertices[w][0] / k;
                avg[1] += mesh.vertices[w][1] / k;
            }
            let before = local_min(mesh, v);
            let old = mesh.vertices[v];
            mesh.vertices[v] = avg;
            if local_min(mesh, v) < before.min(30.0) {
                mesh.vertices[v] = old;
            }
        }
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

const NONE: usize = usize::MAX;

struct Tri {
    v: [usize; 3],
    /// neighbor across the edge opposite v[k]
    nbr: [usize; 3],
    alive: bool,
}

/// Bowyer-Watson Delaunay triangulation; returns counterclockwise triangles.
pub fn delaunay(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::MeshFailure("fewer than three points".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let mut pts = points.to_vec();
    pts.push([mid[0] - 20.0 * span, mid[1] - 10.0 * span]);
    pts.push([mid[0] + 20.0 * span, mid[1] - 10.0 * span]);
    pts.push([mid[0], mid[1] + 20.0 * span]);

    let mut tris = vec![Tri { v: [n, n + 1, n + 2], nbr: [NONE; 3], alive: true }];
    let mut last = 0;
    let mut in_cavity: Vec<bool> = vec![false];
    for p_idx in 0..n {
        let p = pts[p_idx];
        let start = locate(&tris, &pts, p, last);
        // grow the cavity of triangles whose circumcircle contains p
        let mut cavity = vec![start];
        in_cavity[start] = true;
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            for k in 0..3 {
                let nb = tris[t].nbr[k];
                if nb == NONE || in_cavity[nb] {
                    continue;
                }
                let [a, b, c] = tris[nb].v;
                if in_circle(pts[a], pts[b], pts[c], p) > 0.0 {
                    in_cavity[nb] = true;
                    cavity.push(nb);
                    stack.push(nb);
                }
            }
        }
        // boundary edges of the cavity, each becoming a new triangle with p
        let mut created = Vec::new();
        let mut by_first: HashMap<usize, usize> = HashMap::new();
        let mut by_second: HashMap<usize, usize> = HashMap::new();
        for &t in &cavity {
            for k in 0..3 {
                let outside = tris[t].nbr[k];
                if outside != NONE && in_cavity[outside] {
                    continue;
                }
                let a = tris[t].v[(k + 1) % 3];
                let b = tris[t].v[(k + 2) % 3];
                if orient(pts[a], pts[b], p) <= 0.0 {
                    // cavity not star-shaped from p; skip degenerate insertion
                    for &c in &cavity {
                        in_cavity[c] = false;
                    }
                    return Err(Error::MeshFailure(format!("degenerate insertion of point {p_idx}")));
                }
                let id = tris.len();
                tris.push(Tri { v: [a, b, p_idx], nbr: [NONE, NONE, outside], alive: true });
                in_cavity.push(false);
                if outside != NONE {
                    let o = &mut tris[outside];
                    for j in 0..3 {
                        if o.nbr[j] == t {
                            o.nbr[j] = id;
                        }
                    }
                }
                by_first.insert(a, id);
                by_second.insert(b, id);
                created.push(id);
            }
        }
        for &id in &created {
            let [a, b, _] = tris[id].v;
            // edge b→p is shared with the triangle starting at b
            tris[id].nbr[0] = by_first[&b];
            // edge p→a is shared with the triangle ending at a
            tris[id].nbr[1] = by_second[&a];
        }
        for &t in &cavity {
            tris[t].alive = false;
            in_cavity[t] = false;
        }
        last = *created.last().expect("cavity has a boundary");
    }
    Ok(tris
        .into_iter()
        .filter(|t| t.alive && t.v.iter().all(|&v| v < n))
        .map(|t| t.v)
        .collect())
}

fn locate(tris: &[Tri], pts: &[Point], p: Point, start: usize) -> usize {
    let mut t = start;
    let mut steps = 0;
    'walk: loop {
        steps += 1;
        if steps > tris.len() + 10 {
            break;
        }
        let v = tris[t].v;
        for k in 0..3 {
            let (a, b) = (pts[v[(k + 1) % 3]], pts[v[(k + 2) % 3]]);
            if orient(a, b, p) < 0.0 && tris[t].nbr[k] != NONE {
                t = tris[t].nbr[k];
                continue 'walk;
            }
        }
        return t;
    }
    // walking cycled: fall back to a linear scan
    tris.iter()
        .position(|tri| {
            tri.alive && (0..3).all(|k| orient(pts[tri.v[(k + 1) % 3]], pts[tri.v[(k + 2) % 3]], p) >= 0.0)
        })
        .expect("point lies inside the super triangle")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn delaunay_of_square_with_center() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.4]];
        let tris = delaunay(&pts).unwrap();
        assert_eq!(tris.len(), 4);
        let area: f64 = tris.iter().map(|t| 0.5 * orient(pts[t[0]], pts[t[1]], pts[t[2]])).sum();
        assert!((area - 1.0).abs() < 1e-14);
    }

    #[test]
    fn delaunay_empty_circumcircles() {
        let pts: Vec<Point> = (0..200)
            .map(|i| {
                let x = (i as f64 * 0.618_033_988_7).fract();
                let y = (i as f64 * 0.754_877_666_2).fract();
                [x, y]
            })
            .collect();
        let tris = delaunay(&pts).unwrap();
        for t in &tris {
            assert!(orient(pts[t[0]], pts[t[1]], pts[t[2]]) > 0.0);
            for (j, q) in pts.iter().enumerate() {
                if t.contains(&j) {
                    continue;
                }
                assert!(in_circle(pts[t[0]], pts[t[1]], pts[t[2]], *q) <= 1e-12);
            }
        }
    }

    #[test]
    fn disk_mesh_size_and_quality() {
        let disk = FourierCurve::circle([0.0, 0.0], 1.0);
        let mesh = triangulate(&disk, 0.1).unwrap();
        let estimate = PI / (3f64.sqrt() / 4.0 * 0.01);
        let count = mesh.triangles.len() as f64;
        assert!((count - estimate).abs() < 0.4 * estimate, "{count} vs {estimate}");
        assert!(mesh.min_angle() >= MIN_ANGLE_DEGREES);
        for w in mesh.boundary_theta.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn ellipse_boundary_refinement() {
        let e = FourierCurve::ellipse([0.0, 0.0], 2.0, 1.0);
        let mesh = triangulate(&e, 0.1).unwrap();
        assert!(mesh.boundary_count() as f64 >= e.perimeter() / 0.1);
        let lengths = mesh.boundary_edge_lengths();
        assert!(lengths.iter().all(|&l| l <= 0.1 + 1e-12));
    }

    #[test]
    fn oversized_h_is_rejected() {
        let disk = FourierCurve::circle([0.0, 0.0], 1.0);
        assert!(matches!(triangulate(&disk, 2.0), Err(Error::MeshFailure(_))));
    }

    #[test]
    fn kidney_meshes() {
        let mesh = triangulate(&FourierCurve::kidney(), 0.08).unwrap();
        let area = FourierCurve::kidney().area();
        assert!((mesh.area() - area).abs() < 0.01 * area);
    }
}
