//! Finsler norms `H`, their derivatives and duals, Wulff shapes and
//! ellipticity diagnostics.
//!
//! A Finsler norm here is an even, positively 1-homogeneous function that
//! is positive away from the origin and smooth on `ℝⁿ∖{0}`. Euclidean,
//! ellipsoidal (`sqrt(ξᵀAξ)`) and `ℓ^q` norms have closed forms for all of
//! value, gradient, Hessian and dual. A custom norm is supplied as a closure;
//! its derivatives come from central differences and its dual (in 2D) from
//! an angular scan of the unit sphere `{H = 1}`.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};

/// Residual target for points emitted by [`wulff_boundary`].
pub const TOL_SHAPE: f64 = 1e-10;
/// Accuracy of the numerically computed dual of custom norms.
pub const TOL_DUAL: f64 = 1e-6;

const FD_STEP: f64 = 1e-5;
const DUAL_SCAN_ANGLES: usize = 4096;
const DUAL_REFINEMENTS: usize = 50;

type NormFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// User supplied 1-homogeneous map.
#[derive(Clone)]
pub struct CustomNorm(Arc<NormFn>);

impl fmt::Debug for CustomNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomNorm(<fn>)")
    }
}

#[derive(Debug, Clone)]
pub enum NormKind {
    Euclidean,
    Ellipsoidal {
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
    },
    Lp {
        q: f64,
    },
    Custom(CustomNorm),
}

#[derive(Debug, Clone)]
pub struct FinslerNorm {
    kind: NormKind,
    dim: usize,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::invalid(format!(
            "dimension must be at least 2, got {dim}"
        )));
    }
    Ok(())
}

impl FinslerNorm {
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(FinslerNorm {
            kind: NormKind::Euclidean,
            dim,
        })
    }

    /// `H(ξ) = sqrt(ξᵀAξ)` for a symmetric positive definite `A`.
    pub fn ellipsoidal(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        check_dim(dim)?;
        if matrix.ncols() != dim {
            return Err(Error::invalid("ellipsoidal norm needs a square matrix"));
        }
        let scale = matrix.amax().max(1.0);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::hypothesis(
                "(iv)",
                "ellipsoidal matrix is not symmetric",
            ));
        }
        let chol = matrix.clone().cholesky().ok_or_else(|| {
            Error::hypothesis("(iv)", "ellipsoidal matrix is not positive definite")
        })?;
        let inverse = chol.inverse();
        Ok(FinslerNorm {
            kind: NormKind::Ellipsoidal { matrix, inverse },
            dim,
        })
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::ellipsoidal(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    /// `H(ξ) = (Σ|ξ_i|^q)^{1/q}`, `q > 1`.
    ///
    /// For `q < 2` the Hessian is unbounded on the coordinate axes; for
    /// `q > 2` the unit ball has flat points there. Both are documented
    /// degenerations, not errors.
    pub fn lp(dim: usize, q: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::invalid(format!(
                "lp exponent must be finite and > 1, got {q}"
            )));
        }
        Ok(FinslerNorm {
            kind: NormKind::Lp { q },
            dim,
        })
    }

    pub fn custom<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        Ok(FinslerNorm {
            kind: NormKind::Custom(CustomNorm(Arc::new(f))),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, NormKind::Custom(_))
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            NormKind::Euclidean => format!("euclidean(n={})", self.dim),
            NormKind::Ellipsoidal { matrix, .. } => {
                let rows: Vec<String> = (0..self.dim)
                    .map(|i| {
                        let r: Vec<String> = (0..self.dim)
                            .map(|j| format!("{}", matrix[(i, j)]))
                            .collect();
                        format!("[{}]", r.join(","))
                    })
                    .collect();
                format!("ellipsoidal([{}])", rows.join(","))
            }
            NormKind::Lp { q } => format!("lp(q={q},n={})", self.dim),
            NormKind::Custom(_) => format!("custom(n={})", self.dim),
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: norm has n={}, vector has length {}",
                self.dim,
                v.len()
            )));
        }
        Ok(())
    }

    /// `H(ξ)`.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.check_len(xi)?;
        Ok(self.eval_unchecked(xi))
    }

    pub(crate) fn eval_unchecked(&self, xi: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Euclidean => norm2(xi),
            NormKind::Ellipsoidal { matrix, .. } => quad_form(matrix, xi).max(0.0).sqrt(),
            NormKind::Lp { q } => lp_value(xi, *q),
            NormKind::Custom(CustomNorm(f)) => f(xi),
        }
    }

    /// `∇H(ξ)`, defined for `ξ ≠ 0`.
    pub fn gradient(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi)?;
        let r = norm2(xi);
        if r == 0.0 {
            return Err(Error::Domain("gradient of a norm at the origin".into()));
        }
        Ok(match &self.kind {
            NormKind::Euclidean => xi.iter().map(|x| x / r).collect(),
            NormKind::Ellipsoidal { matrix, .. } => {
                let h = quad_form(matrix, xi).sqrt();
                mat_vec(matrix, xi).into_iter().map(|v| v / h).collect()
            }
            NormKind::Lp { q } => lp_gradient(xi, *q),
            NormKind::Custom(CustomNorm(f)) => fd_gradient(f.as_ref(), xi, FD_STEP * r),
        })
    }

    /// `D²H(ξ)`, defined for `ξ ≠ 0`.
    pub fn hessian(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(xi)?;
        let n = self.dim;
        let r = norm2(xi);
        if r == 0.0 {
            return Err(Error::Domain("Hessian of a norm at the origin".into()));
        }
        Ok(match &self.kind {
            NormKind::Euclidean => DMatrix::from_fn(n, n, |i, j| {
                let d = if i == j { 1.0 } else { 0.0 };
                (d - xi[i] * xi[j] / (r * r)) / r
            }),
            NormKind::Ellipsoidal { matrix, .. } => {
                let h2 = quad_form(matrix, xi);
                let h = h2.sqrt();
                let ax = mat_vec(matrix, xi);
                DMatrix::from_fn(n, n, |i, j| (matrix[(i, j)] - ax[i] * ax[j] / h2) / h)
            }
            NormKind::Lp { q } => lp_hessian(xi, *q),
            NormKind::Custom(CustomNorm(f)) => fd_hessian(f.as_ref(), xi, FD_STEP * r),
        })
    }

    /// The closed-form dual norm, when one exists.
    pub fn dual_norm(&self) -> Option<FinslerNorm> {
        let kind = match &self.kind {
            NormKind::Euclidean => NormKind::Euclidean,
            NormKind::Ellipsoidal { matrix, inverse } => NormKind::Ellipsoidal {
                matrix: inverse.clone(),
                inverse: matrix.clone(),
            },
            NormKind::Lp { q } => NormKind::Lp { q: q / (q - 1.0) },
            NormKind::Custom(_) => return None,
        };
        Some(FinslerNorm {
            kind,
            dim: self.dim,
        })
    }

    /// `H°(x) = sup{⟨ξ,x⟩ : H(ξ) ≤ 1}`.
    pub fn dual(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        if let Some(d) = self.dual_norm() {
            return Ok(d.eval_unchecked(x));
        }
        if norm2(x) == 0.0 {
            return Ok(0.0);
        }
        Ok(self.custom_dual_argmax(x)?.1)
    }

    /// `∇H°(x)` for `x ≠ 0`. For custom norms this is the maximizer in the
    /// definition of `H°`, which lies on `{H = 1}`.
    pub fn dual_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        if let Some(d) = self.dual_norm() {
            return d.gradient(x);
        }
        if norm2(x) == 0.0 {
            return Err(Error::Domain(
                "gradient of a dual norm at the origin".into(),
            ));
        }
        Ok(self.custom_dual_argmax(x)?.0)
    }

    pub fn dual_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(x)?;
        match self.dual_norm() {
            Some(d) => d.hessian(x),
            None => {
                let r = norm2(x);
                if r == 0.0 {
                    return Err(Error::Domain("Hessian of a dual norm at the origin".into()));
                }
                let this = self.clone();
                let f = move |y: &[f64]| this.dual(y).unwrap_or(f64::NAN);
                Ok(fd_hessian(&f, x, 1e-3 * r))
            }
        }
    }

    /// Point on `{H = 1}` in Euclidean direction `theta` (2D only).
    fn unit_sphere_point(&self, theta: f64) -> [f64; 2] {
        let e = [theta.cos(), theta.sin()];
        let h = self.eval_unchecked(&e);
        [e[0] / h, e[1] / h]
    }

    fn custom_dual_argmax(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        if self.dim != 2 {
            return Err(Error::invalid(
                "numerical dual of a custom norm is only available for n = 2",
            ));
        }
        let objective = |theta: f64| {
            let p = self.unit_sphere_point(theta);
            p[0] * x[0] + p[1] * x[1]
        };
        let step = 2.0 * PI / DUAL_SCAN_ANGLES as f64;
        let (mut best_t, mut best_v) = (0.0, f64::NEG_INFINITY);
        for j in 0..DUAL_SCAN_ANGLES {
            let t = j as f64 * step;
            let v = objective(t);
            if v > best_v {
                best_v = v;
                best_t = t;
            }
        }
        // golden-section refinement on the bracketing cell pair
        let (mut a, mut b) = (best_t - step, best_t + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (objective(c), objective(d));
        for _ in 0..DUAL_REFINEMENTS {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = objective(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = objective(d);
            }
        }
        let t = 0.5 * (a + b);
        let v = objective(t);
        if !v.is_finite() || v < best_v - TOL_DUAL * best_v.abs().max(1.0) {
            return Err(Error::numeric(
                "dual norm maximization did not converge",
                Some((v - best_v).abs()),
            ));
        }
        let p = self.unit_sphere_point(t);
        Ok((p.to_vec(), v.max(best_v)))
    }
}

fn quad_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += x[i] * a[(i, j)] * x[j];
        }
    }
    s
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| (0..x.len()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

fn lp_value(xi: &[f64], q: f64) -> f64 {
    let m = xi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    // scaled to avoid overflow for large q
    m * xi
        .iter()
        .map(|x| (x.abs() / m).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

fn lp_gradient(xi: &[f64], q: f64) -> Vec<f64> {
    let h = lp_value(xi, q);
    xi.iter()
        .map(|x| x.signum() * (x.abs() / h).powf(q - 1.0))
        .map(|v| if v.is_nan() { 0.0 } else { v })
        .collect()
}

fn lp_hessian(xi: &[f64], q: f64) -> DMatrix<f64> {
    let n = xi.len();
    let h = lp_value(xi, q);
    let g = lp_gradient(xi, q);
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j {
            (xi[i].abs() / h).powf(q - 2.0) / h
        } else {
            0.0
        };
        (q - 1.0) * (diag - g[i] * g[j] / h)
    })
}

fn fd_gradient(f: &NormFn, xi: &[f64], step: f64) -> Vec<f64> {
    let mut y = xi.to_vec();
    (0..xi.len())
        .map(|i| {
            y[i] = xi[i] + step;
            let fp = f(&y);
            y[i] = xi[i] - step;
            let fm = f(&y);
            y[i] = xi[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

fn fd_hessian(f: &NormFn, xi: &[f64], step: f64) -> DMatrix<f64> {
    let n = xi.len();
    let mut y = xi.to_vec();
    let mut eval = |di: (usize, f64), dj: (usize, f64)| {
        y.copy_from_slice(xi);
        y[di.0] += di.1;
        y[dj.0] += dj.1;
        f(&y)
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = (eval((i, step), (j, step))
                - eval((i, step), (j, -step))
                - eval((i, -step), (j, step))
                + eval((i, -step), (j, -step)))
                / (4.0 * step * step);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `H(ξ)`; see [`FinslerNorm::eval`].
pub fn eval_norm(h: &FinslerNorm, xi: &[f64]) -> Result<f64> {
    h.eval(xi)
}

pub fn grad_norm(h: &FinslerNorm, xi: &[f64]) -> Result<Vec<f64>> {
    h.gradient(xi)
}

pub fn hess_norm(h: &FinslerNorm, xi: &[f64]) -> Result<DMatrix<f64>> {
    h.hessian(xi)
}

pub fn dual_norm(h: &FinslerNorm, x: &[f64]) -> Result<f64> {
    h.dual(x)
}

/// Max over samples of `|H(∇H°(x)) − 1|` and `|H°(∇H(x)) − 1|`.
pub fn verify_duality_identities(h: &FinslerNorm, samples: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in samples {
        let a = h.eval(&h.dual_gradient(x)?)?;
        let b = h.dual(&h.gradient(x)?)?;
        worst = worst.max((a - 1.0).abs()).max((b - 1.0).abs());
    }
    Ok(worst)
}

/// Deterministic nonzero sample vectors: uniform directions with
/// log-uniform radii in `[1e-4, 1e2]`.
pub fn sample_vectors(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir = random_direction(&mut rng, dim);
            let r = 10f64.powf(rng.random_range(-4.0..2.0));
            dir.into_iter().map(|d| d * r).collect()
        })
        .collect()
}

pub(crate) fn random_direction(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    if dim == 2 {
        let t = rng.random_range(0.0..2.0 * PI);
        return vec![t.cos(), t.sin()];
    }
    loop {
        // Box-Muller Gaussians normalized onto the sphere
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            })
            .collect();
        let r = norm2(&v);
        if r > 1e-8 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Euclidean unit directions used for sphere sweeps: an angular sweep
/// offset by half a step (so coordinate axes are never hit) in 2D, seeded
/// random directions otherwise.
pub fn sphere_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 2 {
        (0..count)
            .map(|j| {
                let t = 2.0 * PI * (j as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| random_direction(&mut rng, dim))
            .collect()
    }
}

/// `(λ₁, λ₂)` with `λ₁|ξ| ≤ H(ξ) ≤ λ₂|ξ|`, estimated on a sphere sweep.
pub fn equivalence_constants(h: &FinslerNorm, count: usize) -> (f64, f64) {
    sphere_directions(h.dim(), count, 0)
        .iter()
        .map(|e| h.eval_unchecked(e))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// Estimated `sup |∇H|` (finite since `∇H` is 0-homogeneous).
pub fn gradient_bound(h: &FinslerNorm, count: usize) -> Result<f64> {
    let mut m = 0.0f64;
    for e in sphere_directions(h.dim(), count, 0) {
        m = m.max(norm2(&h.gradient(&e)?));
    }
    Ok(m)
}

/// Orthonormal basis of the complement of `g`.
fn tangent_basis(g: &[f64]) -> Vec<Vec<f64>> {
    let n = g.len();
    let gn = norm2(g);
    let ghat: Vec<f64> = g.iter().map(|x| x / gn).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        let c = dot(&v, &ghat);
        v.iter_mut().zip(&ghat).for_each(|(x, g)| *x -= c * g);
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, b)| *x -= c * b);
        }
        let r = norm2(&v);
        if r > 1e-6 {
            basis.push(v.into_iter().map(|x| x / r).collect());
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

/// Uniform-ellipticity constant: min over sampled `ξ ∈ ∂B^H_1` of
/// `⟨D²H(ξ)v, v⟩` with `v` a unit vector orthogonal to `∇H(ξ)`.
///
/// In 2D `samples` angles are swept; in higher dimension `samples` seeded
/// random directions are used. Positivity is only certified at the sample
/// resolution. A nonpositive constant rejects the norm.
pub fn ellipticity_constant(h: &FinslerNorm, samples: usize) -> Result<f64> {
    let mut lambda = f64::INFINITY;
    for e in sphere_directions(h.dim(), samples, 0) {
        let s = h.eval_unchecked(&e);
        let xi: Vec<f64> = e.iter().map(|x| x / s).collect();
        let g = h.gradient(&xi)?;
        let d2 = h.hessian(&xi)?;
        let basis = tangent_basis(&g);
        let k = basis.len();
        let p = DMatrix::from_fn(h.dim(), k, |i, j| basis[j][i]);
        let restricted = p.transpose() * d2 * &p;
        let sym = 0.5 * (&restricted + restricted.transpose());
        let min_eig = if k == 1 {
            sym[(0, 0)]
        } else {
            SymmetricEigen::new(sym).eigenvalues.min()
        };
        if min_eig.is_finite() {
            lambda = lambda.min(min_eig);
        }
    }
    if !(lambda > 0.0) {
        return Err(Error::hypothesis(
            "(vi)",
            format!(
                "{} is not uniformly elliptic at sample resolution (λ = {lambda:e})",
                h.describe()
            ),
        ));
    }
    Ok(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSide {
    /// Frank diagram `B^H_r`.
    Primal,
    /// Wulff shape `B^{H°}_r`.
    Dual,
}

/// Sampled boundary of a 2D Wulff shape or Frank diagram.
#[derive(Debug, Clone)]
pub struct WulffShape {
    pub center: [f64; 2],
    pub radius: f64,
    pub side: NormSide,
    pub thetas: Vec<f64>,
    pub boundary: Vec<[f64; 2]>,
}

impl WulffShape {
    /// Max of `|H°(x − center) − radius|` (or `H` for the Frank diagram).
    pub fn max_residual(&self, h: &FinslerNorm) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in &self.boundary {
            let d = [x[0] - self.center[0], x[1] - self.center[1]];
            let v = match self.side {
                NormSide::Dual => h.dual(&d)?,
                NormSide::Primal => h.eval(&d)?,
            };
            worst = worst.max((v - self.radius).abs());
        }
        Ok(worst)
    }

    /// Convexity of the closed boundary polyline (constant turning sign).
    pub fn is_convex(&self) -> bool {
        let m = self.boundary.len();
        (0..m).all(|i| {
            let a = self.boundary[i];
            let b = self.boundary[(i + 1) % m];
            let c = self.boundary[(i + 2) % m];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            cross > -1e-14 * self.radius * self.radius
        })
    }

    /// CSV `theta,x,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "theta,x,y")?;
        for (t, x) in self.thetas.iter().zip(&self.boundary) {
            writeln!(
                w,
                "{},{},{}",
                crate::io::fmt17(*t),
                crate::io::fmt17(x[0]),
                crate::io::fmt17(x[1])
            )?;
        }
        Ok(())
    }
}

/// Euclidean distance from the center to the boundary of `B_1` (of `H°` or
/// `H`) in direction `theta`.
pub fn boundary_radius(h: &FinslerNorm, side: NormSide, theta: f64) -> Result<f64> {
    let e = [theta.cos(), theta.sin()];
    let v = match side {
        NormSide::Dual => h.dual(&e)?,
        NormSide::Primal => h.eval(&e)?,
    };
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::numeric(
            format!("unit-ball radius undefined at angle {theta}"),
            None,
        ));
    }
    Ok(1.0 / v)
}

/// `m` boundary points of `B_radius(center)` at angles `2πj/m`.
pub fn wulff_boundary(
    h: &FinslerNorm,
    center: [f64; 2],
    radius: f64,
    m: usize,
    side: NormSide,
) -> Result<WulffShape> {
    if h.dim() != 2 {
        return Err(Error::invalid(
            "Wulff boundaries are only sampled for n = 2",
        ));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if m < 4 {
        return Err(Error::invalid(format!(
            "need at least 4 boundary samples, got {m}"
        )));
    }
    let mut thetas = Vec::with_capacity(m);
    let mut boundary = Vec::with_capacity(m);
    for j in 0..m {
        let t = 2.0 * PI * j as f64 / m as f64;
        // 1-homogeneity makes t ↦ H°(t e) linear, so the root is explicit
        let r = radius * boundary_radius(h, side, t)?;
        thetas.push(t);
        boundary.push([center[0] + r * t.cos(), center[1] + r * t.sin()]);
    }
    let shape = WulffShape {
        center,
        radius,
        side,
        thetas,
        boundary,
    };
    let res = shape.max_residual(h)?;
    let tol = if h.has_closed_form() {
        TOL_SHAPE * radius.max(1.0)
    } else {
        TOL_DUAL * radius.max(1.0)
    };
    if res > tol {
        return Err(Error::numeric(
            "Wulff boundary residual above tolerance",
            Some(res),
        ));
    }
    Ok(shape)
}
