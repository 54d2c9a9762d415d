//! Small dense helpers and a CSR matrix with a diagonally preconditioned
//! conjugate gradient solver.

use nalgebra::DMatrix;

/// `a ⊗ b`, acting as `(a ⊗ b) v = ⟨b, v⟩ a`.
pub fn outer(a: &[f64], b: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigenvalues `(min, max)` of a symmetric 2x2 matrix.
pub fn sym2_eigenvalues(m: [[f64; 2]; 2]) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let diff = 0.5 * (m[0][0] - m[1][1]);
    let r = (diff * diff + m[0][1] * m[1][0]).max(0.0).sqrt();
    (0.5 * tr - r, 0.5 * tr + r)
}

/// Raise the spectrum of a symmetric 2x2 matrix to at least `floor`.
pub fn sym2_floor(m: [[f64; 2]; 2], floor: f64) -> [[f64; 2]; 2] {
    let a = m[0][0];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let d = m[1][1];
    let sym = [[a, b], [b, d]];
    let (lo, hi) = sym2_eigenvalues(sym);
    if lo >= floor {
        return sym;
    }
    if b.abs() < 1e-300 {
        return [[a.max(floor), 0.0], [0.0, d.max(floor)]];
    }
    // eigenvector of the smaller eigenvalue
    let (vx, vy) = if (a - lo).abs() > (d - lo).abs() {
        (-b, a - lo)
    } else {
        (d - lo, -b)
    };
    let n = (vx * vx + vy * vy).sqrt();
    let (ex, ey) = (vx / n, vy / n);
    let hi = hi.max(floor);
    let lo = floor;
    // reassemble lo e e^T + hi e_perp e_perp^T
    let (px, py) = (-ey, ex);
    [
        [lo * ex * ex + hi * px * px, lo * ex * ey + hi * px * py],
        [lo * ex * ey + hi * px * py, lo * ey * ey + hi * py * py],
    ]
}

/// Compressed sparse row matrix with a fixed pattern.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Pattern from per-row sorted, deduplicated column lists.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` to entry `(i, j)`, which must be part of the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        let k = row
            .binary_search(&j)
            .expect("entry outside sparsity pattern");
        self.values[self.row_ptr[i] + k] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
                row.binary_search(&i)
                    .map(|k| self.values[self.row_ptr[i] + k])
                    .unwrap_or(0.0)
            })
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned CG for an SPD system; `x` holds the initial guess.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> CgOutcome {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm2(&r) / b_norm;
    let mut it = 0;
    while it < max_iter && rel > rel_tol {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = norm2(&r) / b_norm;
        it += 1;
    }
    CgOutcome {
        iterations: it,
        relative_residual: rel,
        converged: rel <= rel_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_identity() {
        // <(a⊗b) v, w> = <b, v><a, w>
        let a = [0.3, -1.2, 2.0];
        let b = [1.5, 0.25, -0.7];
        let v = [-0.4, 0.9, 1.1];
        let w = [2.2, -0.6, 0.05];
        let m = outer(&a, &b);
        let mv = &m * nalgebra::DVector::from_column_slice(&v);
        let lhs = dot(mv.as_slice(), &w);
        let rhs = dot(&b, &v) * dot(&a, &w);
        assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1.0));
    }

    #[test]
    fn floor_lifts_smallest_eigenvalue() {
        let m = [[2.0, 1.0], [1.0, 0.5]];
        let f = sym2_floor(m, 0.1);
        let (lo, hi) = sym2_eigenvalues(f);
        assert!((lo - 0.1).abs() < 1e-12);
        assert!((hi - 2.5).abs() < 1e-12);
        let same = sym2_floor([[3.0, 0.0], [0.0, 1.0]], 0.5);
        assert_eq!(same, [[3.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn pcg_solves_1d_laplacian() {
        let n = 50;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![i];
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let mut a = CsrMatrix::from_pattern(rows);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&exact, &mut b);
        let mut x = vec![0.0; n];
        let out = pcg(&a, &b, &mut x, 1e-13, 500);
        assert!(out.converged);
        for (x, e) in x.iter().zip(&exact) {
            assert!((x - e).abs() < 1e-10);
        }
    }
}
