//! Conforming triangulations of the planar domains used by the solver.
//!
//! Rectangles are structured grids. Disks, Wulff balls and Wulff annuli are
//! built from one polar template (ring `i` of `N` carries `6i` vertices)
//! mapped radially onto the boundary curve, so every vertex of the outer
//! ring lies exactly on `∂B^{H°}_R`.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::finsler::{boundary_radius, FinslerNorm, NormSide};

const MAX_RINGS: usize = 4000;

#[derive(Debug, Clone)]
pub enum Domain {
    /// `[0, a] × [0, b]`
    Rectangle { a: f64, b: f64 },
    /// Euclidean disk of radius `radius` at the origin.
    Disk { radius: f64 },
    /// `B^{H°}_R(0)`
    WulffBall { norm: FinslerNorm, radius: f64 },
    /// `B^{H°}_R(0) ∖ B̄^{H°}_{R/2}(0)`
    AnnulusWulff { norm: FinslerNorm, radius: f64 },
}

impl Domain {
    pub fn center(&self) -> [f64; 2] {
        match self {
            Domain::Rectangle { a, b } => [0.5 * a, 0.5 * b],
            _ => [0.0, 0.0],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain::Rectangle { a, b } => *a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite(),
            Domain::Disk { radius }
            | Domain::WulffBall { radius, .. }
            | Domain::AnnulusWulff { radius, .. } => *radius > 0.0 && radius.is_finite(),
        };
        if !ok {
            return Err(Error::invalid(format!("degenerate domain {self:?}")));
        }
        if let Domain::WulffBall { norm, .. } | Domain::AnnulusWulff { norm, .. } = self {
            if norm.dim() != 2 {
                return Err(Error::invalid("Wulff domains need a planar norm"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Mesh2D {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_vertices: Vec<usize>,
    boundary_normals: Vec<[f64; 2]>,
    boundary_slot: Vec<Option<usize>>,
    vertex_triangles: Vec<Vec<usize>>,
    h: f64,
    center: [f64; 2],
}

impl Mesh2D {
    /// Assembles a mesh; boundary vertices are those on edges used by a
    /// single triangle, and `normal` supplies their inner unit normals.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        center: [f64; 2],
        normal: impl Fn(usize, [f64; 2]) -> [f64; 2],
    ) -> Result<Self> {
        let nv = vertices.len();
        let mut vertex_triangles = vec![Vec::new(); nv];
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        let mut h = 0.0f64;
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::invalid(format!(
                        "triangle {t} references vertex {v}"
                    )));
                }
                vertex_triangles[v].push(t);
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::invalid(format!(
                    "triangle {t} has nonpositive area {area}"
                )));
            }
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                let (pa, pb) = (vertices[a], vertices[b]);
                h = h.max((pa[0] - pb[0]).hypot(pa[1] - pb[1]));
            }
        }
        if let Some(v) = vertex_triangles.iter().position(|t| t.is_empty()) {
            return Err(Error::invalid(format!("orphan vertex {v}")));
        }
        let mut on_boundary = vec![false; nv];
        for (&(a, b), &count) in &edges {
            if count == 1 {
                on_boundary[a] = true;
                on_boundary[b] = true;
            }
        }
        let boundary_vertices: Vec<usize> = (0..nv).filter(|&v| on_boundary[v]).collect();
        let mut boundary_slot = vec![None; nv];
        let mut boundary_normals = Vec::with_capacity(boundary_vertices.len());
        for (slot, &v) in boundary_vertices.iter().enumerate() {
            boundary_slot[v] = Some(slot);
            let n = normal(v, vertices[v]);
            let len = n[0].hypot(n[1]);
            if !(len > 0.0) {
                return Err(Error::invalid(format!("no normal at boundary vertex {v}")));
            }
            boundary_normals.push([n[0] / len, n[1] / len]);
        }
        Ok(Mesh2D {
            vertices,
            triangles,
            boundary_vertices,
            boundary_normals,
            boundary_slot,
            vertex_triangles,
            h,
            center,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    /// Inner unit normals, parallel to [`Mesh2D::boundary_vertices`].
    pub fn boundary_normals(&self) -> &[[f64; 2]] {
        &self.boundary_normals
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_slot[v].is_some()
    }

    /// Position of `v` within the boundary list.
    pub fn boundary_slot(&self, v: usize) -> Option<usize> {
        self.boundary_slot[v]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    /// Maximum edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Gradients of the three hat functions on triangle `t`.
    pub fn shape_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let (p0, p1, p2) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let twice = 2.0 * self.area(t);
        [
            [(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice],
            [(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice],
            [(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice],
        ]
    }

    /// Radius of the inscribed circle of triangle `t`.
    pub fn inradius(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let d = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        2.0 * self.area(t) / (d(pa, pb) + d(pb, pc) + d(pc, pa))
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        self.vertices.iter().fold(
            ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
            |(lo, hi), p| {
                (
                    [lo[0].min(p[0]), lo[1].min(p[1])],
                    [hi[0].max(p[0]), hi[1].max(p[1])],
                )
            },
        )
    }

    /// Triangle containing `p`, if any.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        (0..self.num_triangles()).find(|&t| {
            let [a, b, c] = self.triangles[t];
            let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let tol = -1e-12 * self.area(t);
            signed_area(pa, pb, p) >= tol
                && signed_area(pb, pc, p) >= tol
                && signed_area(pc, pa, p) >= tol
        })
    }

    /// Edges on the boundary, as vertex pairs.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut out: Vec<_> = count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(e, _)| e)
            .collect();
        out.sort_unstable();
        out
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Triangulates `domain` with maximum edge length at most `h_target`.
pub fn build_domain(domain: &Domain, h_target: f64) -> Result<Mesh2D> {
    if !(h_target > 0.0) || !h_target.is_finite() {
        return Err(Error::invalid(format!(
            "h must be positive, got {h_target}"
        )));
    }
    domain.validate()?;
    match domain {
        Domain::Rectangle { a, b } => rectangle(*a, *b, h_target),
        Domain::Disk { radius } => {
            let r = *radius;
            polar_domain(|_| Ok(r), false, h_target, |_, x| [-x[0], -x[1]], r)
        }
        Domain::WulffBall { norm, radius } | Domain::AnnulusWulff { norm, radius } => {
            let annulus = matches!(domain, Domain::AnnulusWulff { .. });
            let r = *radius;
            let normal = |_: usize, x: [f64; 2]| {
                let g = norm.dual_gradient(&x).unwrap_or_else(|_| vec![x[0], x[1]]);
                let inner_loop = annulus && norm.dual(&x).map(|d| d < 0.75 * r).unwrap_or(false);
                if inner_loop {
                    [g[0], g[1]]
                } else {
                    [-g[0], -g[1]]
                }
            };
            let rmax = (0..64)
                .map(|j| boundary_radius(norm, NormSide::Dual, 2.0 * PI * j as f64 / 64.0))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0f64, f64::max)
                * r;
            polar_domain(
                |t| Ok(r * boundary_radius(norm, NormSide::Dual, t)?),
                annulus,
                h_target,
                normal,
                rmax,
            )
        }
    }
}

fn rectangle(a: f64, b: f64, h: f64) -> Result<Mesh2D> {
    // the diagonal is the longest edge
    let cell = h / 2f64.sqrt();
    let nx = (a / cell).ceil().max(1.0) as usize;
    let ny = (b / cell).ceil().max(1.0) as usize;
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([a * i as f64 / nx as f64, b * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let tol = 1e-12 * a.max(b);
    Mesh2D::from_parts(vertices, triangles, [0.5 * a, 0.5 * b], |_, x| {
        let mut n = [0.0, 0.0];
        if x[0].abs() <= tol {
            n[0] += 1.0;
        }
        if (x[0] - a).abs() <= tol {
            n[0] -= 1.0;
        }
        if x[1].abs() <= tol {
            n[1] += 1.0;
        }
        if (x[1] - b).abs() <= tol {
            n[1] -= 1.0;
        }
        n
    })
}

fn polar_domain(
    radius_at: impl Fn(f64) -> Result<f64>,
    annulus: bool,
    h_target: f64,
    normal: impl Fn(usize, [f64; 2]) -> [f64; 2],
    rmax: f64,
) -> Result<Mesh2D> {
    let mut n = (rmax / h_target).ceil().max(2.0) as usize;
    loop {
        if annulus && n % 2 == 1 {
            n += 1;
        }
        if n > MAX_RINGS {
            return Err(Error::invalid(format!(
                "h = {h_target} needs more than {MAX_RINGS} rings"
            )));
        }
        let (vertices, triangles) = polar_template(&radius_at, if annulus { n / 2 } else { 0 }, n)?;
        let h = max_edge(&vertices, &triangles);
        if h <= h_target {
            return Mesh2D::from_parts(vertices, triangles, [0.0, 0.0], &normal);
        }
        n += 1;
    }
}

fn max_edge(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .flat_map(|t| (0..3).map(move |e| (t[e], t[(e + 1) % 3])))
        .map(|(a, b)| (vertices[a][0] - vertices[b][0]).hypot(vertices[a][1] - vertices[b][1]))
        .fold(0.0, f64::max)
}

/// Rings `first..=n`; ring `i` sits at fraction `i/n` of the boundary radius
/// and carries `6i` equally spaced angles (ring 0 is the center).
fn polar_template(
    radius_at: &impl Fn(f64) -> Result<f64>,
    first: usize,
    n: usize,
) -> Result<(Vec<[f64; 2]>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut rings: Vec<(usize, usize)> = Vec::new(); // (offset, count)
    let mut cache: HashMap<u64, f64> = HashMap::new();
    for i in first..=n {
        let count = if i == 0 { 1 } else { 6 * i };
        rings.push((vertices.len(), count));
        if i == 0 {
            vertices.push([0.0, 0.0]);
            continue;
        }
        let s = i as f64 / n as f64;
        for j in 0..count {
            let t = 2.0 * PI * j as f64 / count as f64;
            let key = t.to_bits();
            let rb = match cache.get(&key) {
                Some(r) => *r,
                None => {
                    let r = radius_at(t)?;
                    cache.insert(key, r);
                    r
                }
            };
            vertices.push([s * rb * t.cos(), s * rb * t.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for w in rings.windows(2) {
        let ((ia, na), (ib, nb)) = (w[0], w[1]);
        if na == 1 {
            for j in 0..nb {
                triangles.push([ia, ib + j, ib + (j + 1) % nb]);
            }
            continue;
        }
        // zip two rings by angle
        let (mut a, mut b) = (0usize, 0usize);
        while a < na || b < nb {
            let next_a = 2.0 * PI * (a + 1) as f64 / na as f64;
            let next_b = 2.0 * PI * (b + 1) as f64 / nb as f64;
            if b >= nb || (a < na && next_a < next_b) {
                triangles.push([ia + a % na, ib + b % nb, ia + (a + 1) % na]);
                a += 1;
            } else {
                triangles.push([ia + a % na, ib + b % nb, ib + (b + 1) % nb]);
                b += 1;
            }
        }
    }
    Ok((vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_rectangle() {
        let m = build_domain(&Domain::Rectangle { a: 1.0, b: 1.0 }, 0.5).unwrap();
        assert!(m.num_triangles() >= 8);
        for corner in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            assert!(m.vertices().contains(&corner));
        }
        assert!(m.h() <= 0.5);
        assert!((m.total_area() - 1.0).abs() < 1e-14);
        // corners get the diagonal inner normal
        let s = m.boundary_slot(0).unwrap();
        let n = m.boundary_normals()[s];
        assert!((n[0] - 0.5f64.sqrt()).abs() < 1e-15 && (n[1] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn disk_boundary_and_normals() {
        let m = build_domain(&Domain::Disk { radius: 1.0 }, 0.1).unwrap();
        assert!(m.h() <= 0.1);
        for (&v, n) in m.boundary_vertices().iter().zip(m.boundary_normals()) {
            let x = m.vertices()[v];
            let r = x[0].hypot(x[1]);
            // sagitta bound h²/8
            assert!((r - 1.0).abs() <= 1e-3);
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
            assert!(n[0] * x[0] + n[1] * x[1] < 0.0);
        }
        let area = m.total_area();
        assert!(area < PI && PI - area < 0.01 * PI);
    }

    #[test]
    fn round_annulus_has_two_loops() {
        let e = FinslerNorm::euclidean(2).unwrap();
        let m = build_domain(
            &Domain::AnnulusWulff {
                norm: e,
                radius: 1.0,
            },
            0.1,
        )
        .unwrap();
        let mut radii: Vec<f64> = m
            .boundary_vertices()
            .iter()
            .map(|&v| m.vertices()[v][0].hypot(m.vertices()[v][1]))
            .collect();
        radii.sort_by(f64::total_cmp);
        assert!((radii[0] - 0.5).abs() < 1e-12);
        assert!((radii[radii.len() - 1] - 1.0).abs() < 1e-12);
        assert!(radii
            .iter()
            .all(|r| (r - 0.5).abs() < 1e-12 || (r - 1.0).abs() < 1e-12));
        // inner loop normals point away from the center
        for (&v, n) in m.boundary_vertices().iter().zip(m.boundary_normals()) {
            let x = m.vertices()[v];
            let r = x[0].hypot(x[1]);
            let radial = (n[0] * x[0] + n[1] * x[1]) / r;
            if r < 0.75 {
                assert!((radial - 1.0).abs() < 1e-12);
            } else {
                assert!((radial + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wulff_ball_vertices_on_shape() {
        let a = FinslerNorm::diagonal(&[4.0, 1.0]).unwrap();
        let m = build_domain(
            &Domain::WulffBall {
                norm: a.clone(),
                radius: 1.0,
            },
            0.1,
        )
        .unwrap();
        assert!(m.h() <= 0.1);
        for &v in m.boundary_vertices() {
            let d = a.dual(&m.vertices()[v]).unwrap();
            assert!((d - 1.0).abs() < 1e-12);
        }
        // ellipse with semi-axes 2 and 1
        assert!((m.total_area() - 2.0 * PI).abs() < 0.02 * 2.0 * PI);
    }

    #[test]
    fn degenerate_specs_rejected() {
        assert!(build_domain(&Domain::Disk { radius: 0.0 }, 0.1).is_err());
        assert!(build_domain(&Domain::Disk { radius: 1.0 }, -0.1).is_err());
        assert!(build_domain(&Domain::Rectangle { a: 1.0, b: -1.0 }, 0.1).is_err());
    }

    #[test]
    fn shape_gradients_reproduce_affine() {
        let m = build_domain(&Domain::Disk { radius: 1.0 }, 0.3).unwrap();
        for t in 0..m.num_triangles() {
            let g = m.shape_gradients(t);
            let tri = m.triangles()[t];
            let mut gx = [0.0, 0.0];
            for k in 0..3 {
                let x = m.vertices()[tri[k]];
                let u = 2.0 * x[0] - 3.0 * x[1];
                gx[0] += u * g[k][0];
                gx[1] += u * g[k][1];
            }
            assert!((gx[0] - 2.0).abs() < 1e-12 && (gx[1] + 3.0).abs() < 1e-12);
        }
    }
}
