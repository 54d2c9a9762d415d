//! Diagnostics on solved fields: weighted second-derivative integrals,
//! inverse-weight integrals, critical-set measure, boundary behaviour
//! against a radial barrier, and `|D²u|^q` integrability.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finsler::FinslerNorm;
use crate::io::csv_row;
use crate::material::{MaterialProfile, SourceTerm};
use crate::mesh::{build_domain, Domain, Mesh2D};
use crate::radial::{hopf_margin, shoot, sphere_area, BarrierProfile, RadialMode, RadialProblem};
use crate::recovery::{boundary_normal_derivative, recover_hessian, HessianRecovery};
use crate::solver::{solve, zero_dirichlet, ScalarField, SolveOptions, SolveReport};

/// Number of `y` points used for suprema.
pub const Y_SAMPLES: usize = 25;

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// The domain center (when inside) followed by Halton points of the
/// bounding box that fall inside the mesh, `count` points in total.
pub fn y_samples(mesh: &Mesh2D, count: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let c = mesh.center();
    if mesh.locate(c).is_some() {
        out.push(c);
    }
    let (lo, hi) = mesh.bounding_box();
    let mut i = 1u64;
    while out.len() < count && i < 100_000 {
        let p = [
            lo[0] + (hi[0] - lo[0]) * radical_inverse(i, 2),
            lo[1] + (hi[1] - lo[1]) * radical_inverse(i, 3),
        ];
        if mesh.locate(p).is_some() {
            out.push(p);
        }
        i += 1;
    }
    out
}

fn frobenius2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[0][0] + m[1][1] * m[1][1] + 2.0 * m[0][1] * m[0][1]
}

/// `max_y Σ_T |T| e_T / |x_T − y|^γ`; for the triangle containing `y` the
/// distance is floored at a third of its inradius.
fn kernel_sup(mesh: &Mesh2D, values: &[f64], gamma: f64, ys: &[[f64; 2]]) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::invalid("at least one y sample is required"));
    }
    let mut best = f64::NEG_INFINITY;
    for &y in ys {
        let host = if gamma > 0.0 { mesh.locate(y) } else { None };
        let mut s = 0.0;
        for (t, e) in values.iter().enumerate() {
            let k = if gamma == 0.0 {
                1.0
            } else {
                let c = mesh.barycenter(t);
                let mut d = (c[0] - y[0]).hypot(c[1] - y[1]);
                if host == Some(t) {
                    d = d.max(mesh.inradius(t) / 3.0);
                }
                d.powf(-gamma)
            };
            s += mesh.area(t) * e * k;
        }
        best = best.max(s);
    }
    Ok(best)
}

fn check_planar_gamma(gamma: f64) -> Result<()> {
    if gamma != 0.0 {
        return Err(Error::invalid(format!(
            "in two dimensions the distance exponent must be 0, got {gamma}"
        )));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("β must lie in [0, 1), got {beta}")));
    }
    Ok(())
}

fn check_t(material: &MaterialProfile, t: f64) -> Result<()> {
    if !(t >= 0.0 && t < material.p() - 1.0) {
        return Err(Error::invalid(format!(
            "t must lie in [0, p − 1) = [0, {}), got {t}",
            material.p() - 1.0
        )));
    }
    Ok(())
}

/// `sup_y Σ_T |T| (k+|∇u|)^{p−2−β} |D²u|² / |x_T − y|^γ`, with `D²u` the
/// recovered Hessian averaged to barycenters.
pub fn weighted_hessian_integral(
    u: &ScalarField,
    material: &MaterialProfile,
    beta: f64,
    gamma: f64,
    ys: &[[f64; 2]],
) -> Result<f64> {
    check_beta(beta)?;
    check_planar_gamma(gamma)?;
    let rec = recover_hessian(u);
    weighted_hessian_with(u, &rec, material, beta, gamma, ys)
}

fn weighted_hessian_with(
    u: &ScalarField,
    rec: &HessianRecovery,
    material: &MaterialProfile,
    beta: f64,
    gamma: f64,
    ys: &[[f64; 2]],
) -> Result<f64> {
    let mesh = u.mesh();
    let e = material.p() - 2.0 - beta;
    let values: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| {
            let g = u.triangle_gradient(t);
            let w = (material.k() + g[0].hypot(g[1])).powf(e);
            w * frobenius2(&rec.at_triangle(u, t))
        })
        .collect();
    kernel_sup(mesh, &values, gamma, ys)
}

/// `sup_y Σ_T |T| / ((k+|∇u|)^t |x_T − y|^γ)`.
pub fn weight_integral(
    u: &ScalarField,
    material: &MaterialProfile,
    t: f64,
    gamma: f64,
    ys: &[[f64; 2]],
) -> Result<f64> {
    check_t(material, t)?;
    check_planar_gamma(gamma)?;
    let mesh = u.mesh();
    let values: Vec<f64> = (0..mesh.num_triangles())
        .map(|tri| {
            let g = u.triangle_gradient(tri);
            (material.k() + g[0].hypot(g[1])).powf(-t)
        })
        .collect();
    kernel_sup(mesh, &values, gamma, ys)
}

/// Area fraction of triangles with `|∇u| < eps_grad`.
pub fn critical_set_fraction(u: &ScalarField, eps_grad: f64) -> f64 {
    let mesh = u.mesh();
    let crit: f64 = (0..mesh.num_triangles())
        .filter(|&t| {
            let g = u.triangle_gradient(t);
            g[0].hypot(g[1]) < eps_grad
        })
        .map(|t| mesh.area(t))
        .fold(0.0, |a, b| a + b);
    crit / mesh.total_area()
}

/// `(q, Σ_T |T| |D²u|^q)` for each `q ∈ (1, 4]`.
pub fn sobolev_scan(u: &ScalarField, q_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if let Some(q) = q_grid.iter().find(|q| !(**q > 1.0 && **q <= 4.0)) {
        return Err(Error::invalid(format!(
            "Sobolev exponents must lie in (1, 4], got {q}"
        )));
    }
    let rec = recover_hessian(u);
    Ok(sobolev_with(u, &rec, q_grid))
}

fn sobolev_with(u: &ScalarField, rec: &HessianRecovery, q_grid: &[f64]) -> Vec<(f64, f64)> {
    let mesh = u.mesh();
    let norms: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| frobenius2(&rec.at_triangle(u, t)).sqrt())
        .collect();
    q_grid
        .iter()
        .map(|&q| {
            let s = norms
                .iter()
                .enumerate()
                .map(|(t, n)| mesh.area(t) * n.powf(q))
                .sum();
            (q, s)
        })
        .collect()
}

fn check_radial_gamma(n: usize, gamma: f64) -> Result<()> {
    if n == 2 {
        return check_planar_gamma(gamma);
    }
    if !(gamma >= 0.0 && gamma < (n - 2) as f64) {
        return Err(Error::invalid(format!(
            "γ must lie in [0, {}) for n = {n}, got {gamma}",
            n - 2
        )));
    }
    Ok(())
}

/// Trapezoidal quadrature of `e(r) r^{n−1−γ} |S^{n−1}|` over the profile
/// grid, for `v(x) = w(ρ(|x|))` in ℝⁿ with `y` at the center.
fn radial_quadrature(
    profile: &BarrierProfile,
    gamma: f64,
    e: impl Fn(usize, f64) -> Result<f64>,
) -> Result<f64> {
    let n = profile.n as i32;
    let mut s = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (i, &rho) in profile.grid.iter().enumerate() {
        let r = geometric_radius(profile, rho);
        if r <= 0.0 {
            continue;
        }
        let val = e(i, r)? * r.powi(n - 1) * r.powf(-gamma);
        if let Some((r0, v0)) = prev {
            s += 0.5 * (v0 + val) * (r - r0).abs();
        }
        prev = Some((r, val));
    }
    Ok(s * sphere_area(profile.n))
}

fn geometric_radius(profile: &BarrierProfile, rho: f64) -> f64 {
    match profile.mode {
        RadialMode::Barrier { radius, .. } => radius - rho,
        RadialMode::Ball { .. } => rho,
    }
}

/// `w''` from the profile equation `(Φ(w')q)' = ±s(w)q`.
fn second_derivative(problem: &RadialProblem, profile: &BarrierProfile, i: usize) -> Result<f64> {
    let (rho, w, dw) = (profile.grid[i], profile.w[i], profile.w_prime[i]);
    let n1 = (profile.n - 1) as f64;
    let (src, dq_over_q) = match profile.mode {
        RadialMode::Barrier { radius, .. } => (problem.source.eval(w), -n1 / (radius - rho)),
        RadialMode::Ball { .. } => (-problem.source.eval(w), n1 / rho),
    };
    let bpp = problem.material.b_second(dw.abs())?;
    Ok((src - problem.material.phi(dw) * dq_over_q) / bpp)
}

/// Weighted Hessian integral of the n-dimensional radial field
/// `v(x) = w(ρ(|x|))` with `y` at the center.
pub fn radial_weighted_hessian_integral(
    problem: &RadialProblem,
    profile: &BarrierProfile,
    beta: f64,
    gamma: f64,
) -> Result<f64> {
    check_beta(beta)?;
    check_radial_gamma(profile.n, gamma)?;
    let m = &problem.material;
    let e = m.p() - 2.0 - beta;
    let n1 = (profile.n - 1) as f64;
    radial_quadrature(profile, gamma, |i, r| {
        let dw = profile.w_prime[i];
        let d2 = second_derivative(problem, profile, i)?;
        let hess2 = d2 * d2 + n1 * (dw / r) * (dw / r);
        Ok((m.k() + dw.abs()).powf(e) * hess2)
    })
}

/// Inverse-weight integral of the n-dimensional radial field.
pub fn radial_weight_integral(
    problem: &RadialProblem,
    profile: &BarrierProfile,
    t: f64,
    gamma: f64,
) -> Result<f64> {
    check_t(&problem.material, t)?;
    check_radial_gamma(profile.n, gamma)?;
    let k = problem.material.k();
    radial_quadrature(profile, gamma, |i, _| {
        Ok((k + profile.w_prime[i].abs()).powf(-t))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfReport {
    pub min_normal_derivative: f64,
    pub barrier_margin: f64,
    pub comparison_violation: f64,
    pub touch_vertex: usize,
    pub touch_point: [f64; 2],
    pub barrier_center: [f64; 2],
    pub compared_nodes: usize,
    pub shoot_slope: f64,
    pub barrier_height: f64,
    pub radius: f64,
}

/// Barrier comparison at the boundary vertex with the smallest inner normal
/// derivative.
pub fn hopf_check(
    u: &ScalarField,
    h: &FinslerNorm,
    material: &MaterialProfile,
    source: &SourceTerm,
    radius: f64,
    m: Option<f64>,
) -> Result<HopfReport> {
    let mesh = u.mesh();
    let mut best = (f64::INFINITY, usize::MAX);
    for &v in mesh.boundary_vertices() {
        let d = boundary_normal_derivative(u, v)?;
        if d < best.0 {
            best = (d, v);
        }
    }
    if best.1 == usize::MAX {
        return Err(Error::invalid("mesh has no boundary vertices"));
    }
    hopf_check_at(u, h, material, source, radius, m, best.1)
}

/// Barrier comparison at a given boundary vertex `y`: the Wulff annulus
/// `A_R(x̄)` with `x̄ = y + R∇H(ν(y))` touches `∂Ω` at `y` from inside.
/// Without an explicit barrier height `m`, half the minimum of `u` over the
/// nodes of the inner ball `B_{R/2}(x̄)` is used.
pub fn hopf_check_at(
    u: &ScalarField,
    h: &FinslerNorm,
    material: &MaterialProfile,
    source: &SourceTerm,
    radius: f64,
    m: Option<f64>,
    y: usize,
) -> Result<HopfReport> {
    if h.dim() != 2 {
        return Err(Error::invalid("hopf check needs a norm on ℝ²"));
    }
    let mesh = u.mesh();
    let slot = mesh
        .boundary_slot(y)
        .ok_or_else(|| Error::invalid(format!("vertex {y} is not on the boundary")))?;
    let nu = mesh.boundary_normals()[slot];
    let p = mesh.vertices()[y];
    let dir = h.gradient(&nu)?;
    let center = [p[0] + radius * dir[0], p[1] + radius * dir[1]];

    let tol = mesh.h() * mesh.h();
    for &b in mesh.boundary_vertices() {
        let x = mesh.vertices()[b];
        let d = h.dual(&[x[0] - center[0], x[1] - center[1]])?;
        if d > 0.5 * radius + tol && d < radius - tol {
            return Err(Error::invalid(format!(
                "no interior Wulff annulus of radius {radius} fits at boundary vertex {y} \
                 (boundary vertex {b} intrudes); try a smaller radius"
            )));
        }
    }
    let m = match m {
        Some(m) => m,
        None => {
            let mut low = f64::INFINITY;
            for (x, val) in mesh.vertices().iter().zip(u.values()) {
                if h.dual(&[x[0] - center[0], x[1] - center[1]])? <= 0.5 * radius + tol {
                    low = low.min(*val);
                }
            }
            if !(low > 0.0) || !low.is_finite() {
                return Err(Error::invalid(format!(
                    "cannot choose a barrier height: u is not positive on the inner ball (min {low})"
                )));
            }
            0.5 * low
        }
    };
    let problem = RadialProblem::new(
        *material,
        2,
        RadialMode::Barrier { radius, m },
        source.g.clone(),
    )?;
    let profile = shoot(&problem, 1e-10 * m.max(1.0))?;
    let margin = hopf_margin(h, &profile)?;

    let mut violation = f64::INFINITY;
    let mut count = 0;
    for (x, val) in mesh.vertices().iter().zip(u.values()) {
        let d = h.dual(&[x[0] - center[0], x[1] - center[1]])?;
        if d < 0.5 * radius - tol || d > radius + tol {
            continue;
        }
        let rho = profile.coordinate(d).clamp(0.0, 0.5 * radius);
        let v = profile.eval(rho).expect("clamped into range");
        violation = violation.min(val - v);
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(
            "no mesh nodes fall inside the barrier annulus",
        ));
    }
    Ok(HopfReport {
        min_normal_derivative: mesh
            .boundary_vertices()
            .iter()
            .map(|&v| boundary_normal_derivative(u, v))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min),
        barrier_margin: margin,
        comparison_violation: violation,
        touch_vertex: y,
        touch_point: p,
        barrier_center: center,
        compared_nodes: count,
        shoot_slope: profile.shoot_slope,
        barrier_height: m,
        radius,
    })
}

/// Barrier radius and height for the Hopf check; unset values are chosen
/// from the domain and the solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HopfParams {
    pub radius: Option<f64>,
    pub m: Option<f64>,
}

/// Half the inradius-like scale of the domain (a quarter of the width for
/// annuli, whose thickness is `R/2`).
pub fn default_hopf_radius(domain: &Domain) -> f64 {
    match domain {
        Domain::Rectangle { a, b } => 0.25 * a.min(*b),
        Domain::Disk { radius } => 0.5 * radius,
        Domain::WulffBall { radius, .. } => 0.5 * radius,
        Domain::AnnulusWulff { radius, .. } => 0.2 * radius,
    }
}

/// Parameters of a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularityParams {
    pub beta: f64,
    pub gamma: f64,
    pub t: f64,
    /// The critical threshold is `critical_eps_factor · h` on each mesh.
    pub critical_eps_factor: f64,
    pub q_grid: Vec<f64>,
    pub levels: usize,
    pub hopf: HopfParams,
}

impl Default for RegularityParams {
    fn default() -> Self {
        RegularityParams {
            beta: 0.0,
            gamma: 0.0,
            t: 0.5,
            critical_eps_factor: 1.0,
            q_grid: vec![1.4, 1.6, 2.0],
            levels: 3,
            hopf: HopfParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementRow {
    pub h: f64,
    pub hessian_integral: f64,
    pub weight_integral: f64,
    pub critical_fraction: f64,
    pub sobolev: Vec<(f64, f64)>,
    pub recovery_fallbacks: usize,
    pub solve: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityReport {
    pub beta: f64,
    pub gamma: f64,
    pub t: f64,
    pub hessian_integral_sup: f64,
    pub weight_integral_sup: f64,
    pub per_refinement: Vec<RefinementRow>,
    pub critical_fraction: f64,
    pub sobolev: Vec<(f64, f64)>,
    /// Relative change of each integral between the two finest meshes.
    pub hessian_change: Option<f64>,
    pub weight_change: Option<f64>,
}

impl RegularityReport {
    /// `h,hessian_integral,weight_integral,critical_fraction` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "h,hessian_integral,weight_integral,critical_fraction")?;
        for r in &self.per_refinement {
            writeln!(
                out,
                "{}",
                csv_row(&[
                    r.h,
                    r.hessian_integral,
                    r.weight_integral,
                    r.critical_fraction
                ])
            )?;
        }
        Ok(())
    }
}

/// Output of [`regularity_study`]; `finest` is the solution on the last mesh.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub report: RegularityReport,
    pub hopf: HopfReport,
    pub finest: ScalarField,
}

/// Solves with zero Dirichlet data at `h, h/2, …` and evaluates the
/// integrals on each mesh.
pub fn regularity_study(
    domain: &Domain,
    material: &MaterialProfile,
    norm: &FinslerNorm,
    source: &SourceTerm,
    h0: f64,
    params: &RegularityParams,
    opts: &SolveOptions,
) -> Result<StudyOutcome> {
    regularity_study_with(domain, material, norm, source, h0, params, opts, |_| Ok(()))
}

/// [`regularity_study`] with a callback run after each completed level.
#[allow(clippy::too_many_arguments)]
pub fn regularity_study_with(
    domain: &Domain,
    material: &MaterialProfile,
    norm: &FinslerNorm,
    source: &SourceTerm,
    h0: f64,
    params: &RegularityParams,
    opts: &SolveOptions,
    mut on_row: impl FnMut(&RefinementRow) -> Result<()>,
) -> Result<StudyOutcome> {
    check_beta(params.beta)?;
    check_planar_gamma(params.gamma)?;
    check_t(material, params.t)?;
    if params.levels == 0 {
        return Err(Error::invalid(
            "a refinement study needs at least one level",
        ));
    }
    if !(params.critical_eps_factor > 0.0) {
        return Err(Error::invalid("critical_eps_factor must be positive"));
    }
    let mut rows = Vec::with_capacity(params.levels);
    let mut finest = None;
    for level in 0..params.levels {
        let h = h0 / f64::powi(2.0, level as i32);
        let mesh = Arc::new(build_domain(domain, h)?);
        let bc = zero_dirichlet(&mesh);
        let (u, report) = solve(mesh.clone(), material, norm, source, &bc, opts)?;
        let ys = y_samples(&mesh, Y_SAMPLES);
        let rec = recover_hessian(&u);
        rows.push(RefinementRow {
            h: mesh.h(),
            hessian_integral: weighted_hessian_with(
                &u,
                &rec,
                material,
                params.beta,
                params.gamma,
                &ys,
            )?,
            weight_integral: weight_integral(&u, material, params.t, params.gamma, &ys)?,
            critical_fraction: critical_set_fraction(&u, params.critical_eps_factor * mesh.h()),
            sobolev: sobolev_with(&u, &rec, &params.q_grid),
            recovery_fallbacks: rec.fallback.len(),
            solve: report,
        });
        on_row(rows.last().expect("just pushed"))?;
        finest = Some(u);
    }
    let finest = finest.expect("at least one level");
    let last = rows.last().expect("at least one level").clone();
    let change = |f: fn(&RefinementRow) -> f64| {
        (rows.len() >= 2).then(|| {
            let (a, b) = (f(&rows[rows.len() - 2]), f(&rows[rows.len() - 1]));
            (b - a).abs() / b.abs()
        })
    };
    let radius = params
        .hopf
        .radius
        .unwrap_or_else(|| default_hopf_radius(domain));
    let hopf = hopf_check(&finest, norm, material, source, radius, params.hopf.m)?;
    let report = RegularityReport {
        beta: params.beta,
        gamma: params.gamma,
        t: params.t,
        hessian_integral_sup: last.hessian_integral,
        weight_integral_sup: last.weight_integral,
        critical_fraction: last.critical_fraction,
        sobolev: last.sobolev.clone(),
        hessian_change: change(|r| r.hessian_integral),
        weight_change: change(|r| r.weight_integral),
        per_refinement: rows,
    };
    Ok(StudyOutcome {
        report,
        hopf,
        finest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::ScalarFn;
    use crate::radial::lift;
    use std::f64::consts::PI;

    fn torsion_field(h: f64) -> ScalarField {
        let mesh = Arc::new(build_domain(&Domain::Disk { radius: 1.0 }, h).unwrap());
        ScalarField::from_fn(mesh, |x| (1.0 - x[0] * x[0] - x[1] * x[1]) / 4.0).unwrap()
    }

    fn p2() -> MaterialProfile {
        MaterialProfile::power(2.0).unwrap()
    }

    #[test]
    fn y_samples_inside_and_deterministic() {
        let mesh = build_domain(&Domain::Disk { radius: 1.0 }, 0.2).unwrap();
        let ys = y_samples(&mesh, Y_SAMPLES);
        assert_eq!(ys.len(), Y_SAMPLES);
        assert_eq!(ys[0], [0.0, 0.0]);
        assert!(ys.iter().all(|y| mesh.locate(*y).is_some()));
        assert_eq!(ys, y_samples(&mesh, Y_SAMPLES));
    }

    #[test]
    fn torsion_integrals_against_polar_closed_forms() {
        let u = torsion_field(0.05);
        let ys = y_samples(u.mesh(), Y_SAMPLES);
        let hi = weighted_hessian_integral(&u, &p2(), 0.0, 0.0, &ys).unwrap();
        assert!((hi - PI / 2.0).abs() < 0.01 * PI / 2.0, "{hi}");
        let hb = weighted_hessian_integral(&u, &p2(), 0.5, 0.0, &ys).unwrap();
        let exact = 2.0 * 2f64.sqrt() / 3.0 * PI;
        assert!((hb - exact).abs() < 0.03 * exact, "{hb} vs {exact}");
        let wi = weight_integral(&u, &p2(), 0.5, 0.0, &ys).unwrap();
        let exact = 4.0 * 2f64.sqrt() * PI / 3.0;
        assert!((wi - exact).abs() < 0.01 * exact, "{wi} vs {exact}");
        let area = weight_integral(&u, &p2(), 0.0, 0.0, &ys).unwrap();
        assert!((area - u.mesh().total_area()).abs() < 1e-12);
        let w99 = weight_integral(&u, &p2(), 0.99, 0.0, &ys).unwrap();
        let exact = 2.0 * PI * 2f64.powf(0.99) / 1.01;
        assert!((w99 - exact).abs() < 0.1 * exact, "{w99} vs {exact}");
    }

    #[test]
    fn singular_kernel_quadrature() {
        // ∫_{|x|<1} |x|^{-1/2} = 2π/(3/2)
        let mesh = build_domain(&Domain::Disk { radius: 1.0 }, 0.025).unwrap();
        let ones = vec![1.0; mesh.num_triangles()];
        let s = kernel_sup(&mesh, &ones, 0.5, &[[0.0, 0.0]]).unwrap();
        assert!((s - 4.0 * PI / 3.0).abs() < 0.01 * 4.0 * PI / 3.0, "{s}");
        let near = kernel_sup(&mesh, &ones, 0.5, &[[0.0, 0.0], [0.3, 0.1]]).unwrap();
        assert!(near >= s);
    }

    #[test]
    fn gamma_zero_sup_is_y_independent() {
        let u = torsion_field(0.1);
        let ys = y_samples(u.mesh(), Y_SAMPLES);
        let all = weighted_hessian_integral(&u, &p2(), 0.5, 0.0, &ys).unwrap();
        let one = weighted_hessian_integral(&u, &p2(), 0.5, 0.0, &ys[3..4]).unwrap();
        assert_eq!(all, one);
    }

    #[test]
    fn weight_integral_monotone_in_t() {
        let u = torsion_field(0.1);
        let ys = y_samples(u.mesh(), 1);
        let mut prev = 0.0;
        for t in [0.0, 0.25, 0.5, 0.75, 0.9] {
            let w = weight_integral(&u, &p2(), t, 0.0, &ys).unwrap();
            assert!(w >= prev);
            prev = w;
        }
    }

    #[test]
    fn parameter_checks() {
        let u = torsion_field(0.2);
        let ys = y_samples(u.mesh(), 1);
        assert!(weighted_hessian_integral(&u, &p2(), 1.0, 0.0, &ys).is_err());
        assert!(weighted_hessian_integral(&u, &p2(), 0.0, 0.5, &ys).is_err());
        assert!(weight_integral(&u, &p2(), 1.0, 0.0, &ys).is_err());
        assert!(weight_integral(&u, &p2(), 0.5, 0.0, &[]).is_err());
        assert!(sobolev_scan(&u, &[1.0]).is_err());
        assert!(sobolev_scan(&u, &[4.5]).is_err());
    }

    #[test]
    fn affine_and_constant_fields() {
        let mesh = Arc::new(build_domain(&Domain::Disk { radius: 1.0 }, 0.2).unwrap());
        let ys = y_samples(&mesh, 5);
        let affine = ScalarField::from_fn(mesh.clone(), |x| 1.0 + x[0] - x[1]).unwrap();
        assert!(weighted_hessian_integral(&affine, &p2(), 0.5, 0.0, &ys).unwrap() < 1e-15);
        assert_eq!(critical_set_fraction(&affine, 1e-6), 0.0);
        for (_, v) in sobolev_scan(&affine, &[1.5, 3.0]).unwrap() {
            assert!(v < 1e-12);
        }
        let constant = ScalarField::from_fn(mesh, |_| 2.0).unwrap();
        assert_eq!(critical_set_fraction(&constant, 1e-6), 1.0);
    }

    #[test]
    fn torsion_sobolev_q2_is_half_area() {
        let u = torsion_field(0.05);
        let scan = sobolev_scan(&u, &[2.0]).unwrap();
        assert!((scan[0].1 - 0.5 * u.mesh().total_area()).abs() < 1e-9);
    }

    #[test]
    fn radial_three_dimensional_integrals() {
        let problem = RadialProblem::new(
            p2(),
            3,
            RadialMode::Ball {
                radius: 1.0,
                boundary_value: 0.0,
            },
            ScalarFn::Constant { value: 1.0 },
        )
        .unwrap();
        let prof = shoot(&problem, 1e-10).unwrap();
        // w = (1 − r²)/6: |D²v|² = 1/3, |∇v| = r/3
        for gamma in [0.0, 0.5] {
            let hi = radial_weighted_hessian_integral(&problem, &prof, 0.0, gamma).unwrap();
            let exact = 4.0 * PI / 3.0 / (3.0 - gamma);
            assert!((hi - exact).abs() < 1e-5 * exact, "{hi} vs {exact}");
        }
        let wi = radial_weight_integral(&problem, &prof, 0.5, 0.5).unwrap();
        // 4π ∫ (r/3)^{-1/2} r^{3/2} dr = 4π √3 / 2
        let exact = 4.0 * PI * 3f64.sqrt() / 2.0;
        assert!((wi - exact).abs() < 1e-4 * exact, "{wi} vs {exact}");
        assert!(radial_weight_integral(&problem, &prof, 0.5, 1.0).is_err());
    }

    #[test]
    fn hopf_on_exact_torsion() {
        let u = torsion_field(0.05);
        let e = FinslerNorm::euclidean(2).unwrap();
        let s = SourceTerm::constant(1.0).unwrap();
        let rep = hopf_check(&u, &e, &p2(), &s, 0.5, Some(0.05)).unwrap();
        assert!(rep.min_normal_derivative > 0.45 && rep.min_normal_derivative < 0.55);
        assert!(rep.comparison_violation >= 0.0, "{rep:?}");
        assert!(rep.compared_nodes > 100);
        let auto = hopf_check(&u, &e, &p2(), &s, 0.5, None).unwrap();
        assert!(auto.barrier_height > 0.0 && auto.comparison_violation >= 0.0);
        let err = hopf_check(&u, &e, &p2(), &s, 1.5, None).unwrap_err();
        assert!(err.to_string().contains("smaller radius"));
    }

    #[test]
    fn barrier_against_itself() {
        let a = FinslerNorm::diagonal(&[4.0, 1.0]).unwrap();
        let mesh = Arc::new(
            build_domain(
                &Domain::AnnulusWulff {
                    norm: a.clone(),
                    radius: 1.0,
                },
                0.1,
            )
            .unwrap(),
        );
        let problem = RadialProblem::new(
            p2(),
            2,
            RadialMode::Barrier {
                radius: 1.0,
                m: 1.0,
            },
            ScalarFn::Zero {},
        )
        .unwrap();
        let prof = shoot(&problem, 1e-10).unwrap();
        let v = lift(&a, [0.0, 0.0], &prof, mesh.clone()).unwrap();
        let outer = mesh
            .boundary_vertices()
            .iter()
            .copied()
            .find(|&b| {
                let x = mesh.vertices()[b];
                a.dual(&x).unwrap() > 0.9
            })
            .unwrap();
        let s = SourceTerm::constant(1.0).unwrap();
        let rep = hopf_check_at(&v, &a, &p2(), &s, 1.0, Some(1.0), outer).unwrap();
        assert!(rep.comparison_violation.abs() < 1e-9, "{rep:?}");
        assert!(boundary_normal_derivative(&v, outer).unwrap() > 0.0);
    }
}
