//! Finsler-radial reduction: one-dimensional profiles `w` with
//! `(Φ(w')q)' = ±s(w)q`, solved by shooting, and their lifts
//! `v(x) = w(ρ(H°(x − x̄)))` to planar meshes.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finsler::{sphere_directions, FinslerNorm};
use crate::io::csv_row;
use crate::material::{MaterialProfile, ScalarFn};
use crate::mesh::Mesh2D;
use crate::solver::ScalarField;

pub const RK_STEPS: usize = 4096;
const BISECTIONS: usize = 80;
const SLOPE_MIN: f64 = 1e-12;
const SLOPE_MAX: f64 = 1e6;
/// Ball-mode integration starts at `START_FRACTION · R`.
const START_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialMode {
    /// Annulus coordinate `ρ ∈ [0, R/2]`, geometric radius `R − ρ`,
    /// weight `(R − ρ)^{n−1}`, `w(0) = 0`, `w(R/2) = m`.
    Barrier { radius: f64, m: f64 },
    /// `ρ ∈ [0, R]`, weight `ρ^{n−1}`, `w'(0) = 0`, `w(R) = boundary_value`.
    Ball {
        radius: f64,
        #[serde(default)]
        boundary_value: f64,
    },
}

impl RadialMode {
    pub fn radius(&self) -> f64 {
        match *self {
            RadialMode::Barrier { radius, .. } | RadialMode::Ball { radius, .. } => radius,
        }
    }

    /// Value the shot must hit at the far end.
    pub fn target(&self) -> f64 {
        match *self {
            RadialMode::Barrier { m, .. } => m,
            RadialMode::Ball { boundary_value, .. } => boundary_value,
        }
    }
}

/// Barrier mode uses `source` as `g`, ball mode as `f`.
#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub material: MaterialProfile,
    pub n: usize,
    pub mode: RadialMode,
    pub source: ScalarFn,
}

impl RadialProblem {
    pub fn new(
        material: MaterialProfile,
        n: usize,
        mode: RadialMode,
        source: ScalarFn,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "dimension must be at least 2, got {n}"
            )));
        }
        let r = mode.radius();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        match mode {
            RadialMode::Barrier { m, .. } if !(m > 0.0) || !m.is_finite() => {
                return Err(Error::invalid(format!(
                    "barrier height m must be positive, got {m}"
                )))
            }
            RadialMode::Ball { boundary_value, .. } if !boundary_value.is_finite() => {
                return Err(Error::invalid("ball boundary value must be finite"))
            }
            _ => {}
        }
        Ok(RadialProblem {
            material,
            n,
            mode,
            source,
        })
    }

    fn weight(&self, rho: f64) -> f64 {
        let e = (self.n - 1) as i32;
        match self.mode {
            RadialMode::Barrier { radius, .. } => (radius - rho).powi(e),
            RadialMode::Ball { .. } => rho.powi(e),
        }
    }

    fn span(&self) -> (f64, f64) {
        match self.mode {
            RadialMode::Barrier { radius, .. } => (0.0, 0.5 * radius),
            RadialMode::Ball { radius, .. } => (START_FRACTION * radius, radius),
        }
    }

    fn sign(&self) -> f64 {
        match self.mode {
            RadialMode::Barrier { .. } => 1.0,
            RadialMode::Ball { .. } => -1.0,
        }
    }

    fn rhs(&self, rho: f64, w: f64, psi: f64) -> Result<(f64, f64)> {
        let q = self.weight(rho);
        let dw = self.material.phi_inverse(psi / q)?;
        Ok((dw, self.sign() * self.source.eval(w) * q))
    }

    /// Initial `(ρ, w, Ψ, w')` for shooting parameter `s` (slope in barrier
    /// mode, central value in ball mode).
    fn initial(&self, s: f64) -> Result<(f64, f64, f64, f64)> {
        let (a, _) = self.span();
        match self.mode {
            RadialMode::Barrier { .. } => Ok((a, 0.0, self.material.phi(s) * self.weight(a), s)),
            RadialMode::Ball { .. } => {
                let p = self.material.p();
                let flux = -self.source.eval(s) * a / self.n as f64;
                let dw = self.material.phi_inverse(flux)?;
                let w0 = s + dw * a * (p - 1.0) / p;
                Ok((a, w0, flux * self.weight(a), dw))
            }
        }
    }

    /// Classical RK4 in `(w, Ψ)`; returns the grid, `w` and `w'`.
    fn integrate(&self, s: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (a, b) = self.span();
        let step = (b - a) / RK_STEPS as f64;
        let (rho0, mut w, mut psi, dw0) = self.initial(s)?;
        let mut grid = Vec::with_capacity(RK_STEPS + 2);
        let mut ws = Vec::with_capacity(RK_STEPS + 2);
        let mut dws = Vec::with_capacity(RK_STEPS + 2);
        if let RadialMode::Ball { .. } = self.mode {
            grid.push(0.0);
            ws.push(s);
            dws.push(0.0);
        }
        grid.push(rho0);
        ws.push(w);
        dws.push(dw0);
        for i in 0..RK_STEPS {
            let r = a + i as f64 * step;
            let k1 = self.rhs(r, w, psi)?;
            let k2 = self.rhs(
                r + 0.5 * step,
                w + 0.5 * step * k1.0,
                psi + 0.5 * step * k1.1,
            )?;
            let k3 = self.rhs(
                r + 0.5 * step,
                w + 0.5 * step * k2.0,
                psi + 0.5 * step * k2.1,
            )?;
            let k4 = self.rhs(r + step, w + step * k3.0, psi + step * k3.1)?;
            w += step / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            psi += step / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            let r_next = if i + 1 == RK_STEPS {
                b
            } else {
                a + (i + 1) as f64 * step
            };
            if !w.is_finite() || !psi.is_finite() {
                return Err(Error::numeric(
                    format!(
                        "radial integration diverged at ρ = {r_next} for shooting parameter {s}"
                    ),
                    None,
                ));
            }
            grid.push(r_next);
            ws.push(w);
            dws.push(self.material.phi_inverse(psi / self.weight(r_next))?);
        }
        Ok((grid, ws, dws))
    }

    fn hit(&self, s: f64) -> Result<f64> {
        Ok(*self.integrate(s)?.1.last().expect("nonempty grid"))
    }
}

/// A solved radial profile on its integration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierProfile {
    pub grid: Vec<f64>,
    pub w: Vec<f64>,
    pub w_prime: Vec<f64>,
    /// `w'(0)`; zero in ball mode.
    pub shoot_slope: f64,
    /// `w(0)`: zero in barrier mode, the shot central value in ball mode.
    pub center_value: f64,
    pub mode: RadialMode,
    pub n: usize,
}

impl BarrierProfile {
    /// A constant profile `w ≡ c` over the ball-mode range `[0, R]`.
    pub fn constant(c: f64, radius: f64, n: usize) -> Self {
        let grid: Vec<f64> = (0..=RK_STEPS)
            .map(|i| radius * i as f64 / RK_STEPS as f64)
            .collect();
        BarrierProfile {
            w: vec![c; grid.len()],
            w_prime: vec![0.0; grid.len()],
            grid,
            shoot_slope: 0.0,
            center_value: c,
            mode: RadialMode::Ball {
                radius,
                boundary_value: c,
            },
            n,
        }
    }

    /// `Φ(w')q` along the grid.
    pub fn flux(&self, material: &MaterialProfile) -> Vec<f64> {
        let e = (self.n - 1) as i32;
        self.grid
            .iter()
            .zip(&self.w_prime)
            .map(|(&r, &d)| {
                let q = match self.mode {
                    RadialMode::Barrier { radius, .. } => (radius - r).powi(e),
                    RadialMode::Ball { .. } => r.powi(e),
                };
                material.phi(d) * q
            })
            .collect()
    }

    /// Monotone cubic Hermite interpolation of `w` (Fritsch–Carlson limited
    /// slopes). `None` outside the grid.
    pub fn eval(&self, rho: f64) -> Option<f64> {
        let first = self.grid[0];
        let last = *self.grid.last()?;
        if rho < first || rho > last {
            return None;
        }
        let i = self
            .grid
            .partition_point(|&g| g <= rho)
            .clamp(1, self.grid.len() - 1)
            - 1;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let (y0, y1) = (self.w[i], self.w[i + 1]);
        let dx = x1 - x0;
        let delta = (y1 - y0) / dx;
        if delta == 0.0 {
            return Some(y0);
        }
        let (mut d0, mut d1) = (self.w_prime[i], self.w_prime[i + 1]);
        if d0 * delta < 0.0 {
            d0 = 0.0;
        }
        if d1 * delta < 0.0 {
            d1 = 0.0;
        }
        let r = (d0 / delta).hypot(d1 / delta);
        if r > 3.0 {
            d0 *= 3.0 / r;
            d1 *= 3.0 / r;
        }
        let t = (rho - x0) / dx;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(h00 * y0 + h10 * dx * d0 + h01 * y1 + h11 * dx * d1)
    }

    /// Maps a dual-norm distance `H°(x − x̄)` to the profile coordinate.
    pub fn coordinate(&self, dual_distance: f64) -> f64 {
        match self.mode {
            RadialMode::Barrier { radius, .. } => radius - dual_distance,
            RadialMode::Ball { .. } => dual_distance,
        }
    }

    /// `rho,w,w_prime` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rho,w,w_prime")?;
        for i in 0..self.grid.len() {
            writeln!(
                out,
                "{}",
                csv_row(&[self.grid[i], self.w[i], self.w_prime[i]])
            )?;
        }
        Ok(())
    }
}

/// Shoots on `w'(0)` (barrier) or `w(0)` (ball) until the far-end value
/// matches the mode's target within `tol`.
pub fn shoot(problem: &RadialProblem, tol: f64) -> Result<BarrierProfile> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "shooting tolerance must be positive, got {tol}"
        )));
    }
    let target = problem.mode.target();
    let (mut lo, mut hi) = (1e-6, 1.0);
    while problem.hit(lo)? > target {
        lo *= 0.1;
        if lo < SLOPE_MIN {
            return Err(Error::numeric(
                format!("no shooting parameter in [{SLOPE_MIN:e}, {SLOPE_MAX:e}] reaches {target}"),
                None,
            ));
        }
    }
    while problem.hit(hi)? < target {
        hi *= 10.0;
        if hi > SLOPE_MAX {
            return Err(Error::numeric(
                format!("no shooting parameter in [{SLOPE_MIN:e}, {SLOPE_MAX:e}] reaches {target}"),
                None,
            ));
        }
    }
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if problem.hit(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if (problem.hit(lo)? - target).abs() <= (problem.hit(hi)? - target).abs() {
        lo
    } else {
        hi
    };
    let (grid, w, w_prime) = problem.integrate(s)?;
    let miss = w.last().expect("nonempty grid") - target;
    if miss.abs() > tol {
        return Err(Error::numeric(
            format!("shooting missed the target by {miss:e} (tolerance {tol:e})"),
            Some(miss.abs()),
        ));
    }
    if let RadialMode::Barrier { .. } = problem.mode {
        if let Some(i) = (1..w_prime.len() - 1).find(|&i| !(w_prime[i] > 0.0)) {
            return Err(Error::numeric(
                format!(
                    "barrier profile lost monotonicity at ρ = {} (w' = {})",
                    grid[i], w_prime[i]
                ),
                None,
            ));
        }
    }
    let (shoot_slope, center_value) = match problem.mode {
        RadialMode::Barrier { .. } => (s, 0.0),
        RadialMode::Ball { .. } => (0.0, s),
    };
    Ok(BarrierProfile {
        grid,
        w,
        w_prime,
        shoot_slope,
        center_value,
        mode: problem.mode,
        n: problem.n,
    })
}

/// Nodal values `w(ρ(H°(x − center)))`. Nodes farther than `1e-9·R`
/// outside the profile's range are rejected.
pub fn lift(
    h: &FinslerNorm,
    center: [f64; 2],
    profile: &BarrierProfile,
    mesh: Arc<Mesh2D>,
) -> Result<ScalarField> {
    if h.dim() != 2 {
        return Err(Error::invalid("lift needs a norm on ℝ²"));
    }
    let slack = 1e-9 * profile.mode.radius();
    let (lo, hi) = (
        profile.grid[0],
        *profile.grid.last().expect("nonempty grid"),
    );
    let mut values = Vec::with_capacity(mesh.num_vertices());
    for (i, x) in mesh.vertices().iter().enumerate() {
        let d = h.dual(&[x[0] - center[0], x[1] - center[1]])?;
        let rho = profile.coordinate(d);
        if rho < lo - slack || rho > hi + slack {
            return Err(Error::invalid(format!(
                "node {i} at ({}, {}) lies outside the profile range (coordinate {rho}, range [{lo}, {hi}])",
                x[0], x[1]
            )));
        }
        values.push(profile.eval(rho.clamp(lo, hi)).expect("clamped into range"));
    }
    ScalarField::new(mesh, values)
}

/// Lower bound for the inner normal derivative of the lifted barrier on the
/// outer Wulff sphere: `w'(0) · min |∇H°|` over boundary directions.
pub fn hopf_margin(h: &FinslerNorm, profile: &BarrierProfile) -> Result<f64> {
    if !matches!(profile.mode, RadialMode::Barrier { .. }) {
        return Err(Error::invalid(
            "hopf margin is defined for barrier profiles",
        ));
    }
    let mut factor = f64::INFINITY;
    for e in sphere_directions(h.dim(), 4096, 0) {
        let g = h.dual_gradient(&e)?;
        factor = factor.min(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let margin = profile.shoot_slope * factor;
    if !(margin > 0.0) {
        return Err(Error::numeric(
            format!("nonpositive barrier margin {margin}"),
            None,
        ));
    }
    Ok(margin)
}

/// Surface measure of the Euclidean unit sphere in ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    // Γ(n/2) by the half-integer recursion
    let mut gamma = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}
