//! Gradient and Hessian reconstruction for P1 fields.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::ScalarField;

/// Per-vertex recovered Hessians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianRecovery {
    pub hessians: Vec<[[f64; 2]; 2]>,
    /// Vertices whose patch was too small or degenerate for a fit; their
    /// Hessian is the mean of the fitted neighbours.
    pub fallback: Vec<usize>,
}

impl HessianRecovery {
    /// Mean of the three vertex Hessians of triangle `t`.
    pub fn at_triangle(&self, u: &ScalarField, t: usize) -> [[f64; 2]; 2] {
        let tri = u.mesh().triangles()[t];
        let mut m = [[0.0; 2]; 2];
        for v in tri {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += self.hessians[v][i][j] / 3.0;
                }
            }
        }
        m
    }
}

/// Constant gradient of each triangle (exact for P1).
pub fn recover_gradient(u: &ScalarField) -> Vec<[f64; 2]> {
    (0..u.mesh().num_triangles())
        .map(|t| u.triangle_gradient(t))
        .collect()
}

/// Area-weighted mean of the triangle gradients around each vertex.
pub fn nodal_gradient(u: &ScalarField) -> Vec<[f64; 2]> {
    let mesh = u.mesh();
    let grads = recover_gradient(u);
    (0..mesh.num_vertices())
        .map(|v| {
            let mut g = [0.0, 0.0];
            let mut area = 0.0;
            for &t in mesh.vertex_triangles(v) {
                let a = mesh.area(t);
                g[0] += a * grads[t][0];
                g[1] += a * grads[t][1];
                area += a;
            }
            [g[0] / area, g[1] / area]
        })
        .collect()
}

/// Fits `g(x) = c + G(x − x_v)`, `G` symmetric, to the P1 gradient over the
/// patch around `v`. The samples are the tangential components along every
/// patch edge, `⟨g(m_e), t_e⟩ = (u_b − u_a)/|b − a|` at the edge midpoint
/// `m_e`, which holds exactly when `u` is quadratic.
fn fit_patch(u: &ScalarField, v: usize) -> Option<[[f64; 2]; 2]> {
    let mesh = u.mesh();
    let patch = mesh.vertex_triangles(v);
    if patch.len() < 3 {
        return None;
    }
    let xs = mesh.vertices();
    let vals = u.values();
    let xv = xs[v];
    let scale = mesh.h();
    let mut edges: Vec<(usize, usize)> = patch
        .iter()
        .flat_map(|&t| {
            let [a, b, c] = mesh.triangles()[t];
            [(a, b), (b, c), (c, a)]
        })
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let mut ata = Matrix5::<f64>::zeros();
    let mut atb = Vector5::<f64>::zeros();
    for (a, b) in edges {
        let e = [xs[b][0] - xs[a][0], xs[b][1] - xs[a][1]];
        let len = e[0].hypot(e[1]);
        let t = [e[0] / len, e[1] / len];
        // scaled offsets keep the normal matrix well conditioned
        let d = [
            (0.5 * (xs[a][0] + xs[b][0]) - xv[0]) / scale,
            (0.5 * (xs[a][1] + xs[b][1]) - xv[1]) / scale,
        ];
        let row = Vector5::new(
            t[0],
            t[1],
            d[0] * t[0],
            d[0] * t[1] + d[1] * t[0],
            d[1] * t[1],
        );
        ata += row * row.transpose();
        atb += row * ((vals[b] - vals[a]) / len);
    }
    let eig = ata.symmetric_eigenvalues();
    if eig.min() <= 1e-8 * eig.max() {
        return None;
    }
    let z = ata.cholesky()?.solve(&atb);
    Some([[z[2] / scale, z[3] / scale], [z[3] / scale, z[4] / scale]])
}

/// Patch least-squares Hessian recovery at every vertex.
pub fn recover_hessian(u: &ScalarField) -> HessianRecovery {
    let mesh = u.mesh();
    let fitted: Vec<Option<[[f64; 2]; 2]>> =
        (0..mesh.num_vertices()).map(|v| fit_patch(u, v)).collect();
    let mut fallback = Vec::new();
    let hessians = fitted
        .iter()
        .enumerate()
        .map(|(v, h)| match h {
            Some(h) => *h,
            None => {
                fallback.push(v);
                let mut sum = [[0.0; 2]; 2];
                let mut count = 0usize;
                let mut seen = Vec::new();
                for &t in mesh.vertex_triangles(v) {
                    for w in mesh.triangles()[t] {
                        if w == v || seen.contains(&w) {
                            continue;
                        }
                        seen.push(w);
                        if let Some(hw) = fitted[w] {
                            count += 1;
                            for i in 0..2 {
                                for j in 0..2 {
                                    sum[i][j] += hw[i][j];
                                }
                            }
                        }
                    }
                }
                if count > 0 {
                    for row in sum.iter_mut() {
                        for e in row.iter_mut() {
                            *e /= count as f64;
                        }
                    }
                }
                sum
            }
        })
        .collect();
    HessianRecovery { hessians, fallback }
}

/// `⟨∇u|_T, ν(v)⟩` averaged over the triangles touching boundary vertex `v`,
/// with `ν` the inner normal.
pub fn boundary_normal_derivative(u: &ScalarField, v: usize) -> Result<f64> {
    let mesh = u.mesh();
    let slot = mesh
        .boundary_slot(v)
        .ok_or_else(|| Error::invalid(format!("vertex {v} is not on the boundary")))?;
    let nu = mesh.boundary_normals()[slot];
    let patch = mesh.vertex_triangles(v);
    let sum: f64 = patch
        .iter()
        .map(|&t| {
            let g = u.triangle_gradient(t);
            g[0] * nu[0] + g[1] * nu[1]
        })
        .sum();
    Ok(sum / patch.len() as f64)
}
