//! The JSON run configuration shared by every command, with dotted-path
//! overrides and eager admissibility checks.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::finsler::{
    ellipticity_constant, sample_vectors, verify_duality_identities, FinslerNorm, NormSide,
};
use crate::material::{
    check_flux_bound, check_flux_monotonicity, check_structural_bounds, sample_pairs,
    sample_point_pairs, MaterialProfile, OssermanVerdict, ProfileKind, ScalarFn, SourceTerm,
    DEFAULT_BOUND_SAMPLES,
};
use crate::mesh::Domain;
use crate::radial::{RadialMode, RadialProblem};
use crate::solver::SolveOptions;
use crate::verify::RegularityParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Rectangle {
        a: f64,
        b: f64,
    },
    Disk {
        radius: f64,
    },
    /// Wulff ball of the configured norm, centered at the origin.
    WulffBall {
        radius: f64,
    },
    AnnulusWulff {
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub p: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default = "default_profile_kind")]
    pub kind: ProfileKind,
}

fn default_profile_kind() -> ProfileKind {
    ProfileKind::Power
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixParams {
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalParams {
    pub entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpParams {
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum NormSpec {
    #[default]
    Euclidean,
    Ellipsoidal(MatrixParams),
    Diagonal(DiagonalParams),
    Lp(LpParams),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub f: ScalarFn,
    #[serde(default = "zero_fn")]
    pub g: ScalarFn,
    /// Upper end `δ` of the interval used by the integral condition on `g`.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn zero_fn() -> ScalarFn {
    ScalarFn::Zero {}
}

fn default_delta() -> f64 {
    1.0
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            f: ScalarFn::Constant { value: 1.0 },
            g: zero_fn(),
            delta: default_delta(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialModeKind {
    Barrier,
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSpec {
    #[serde(default = "default_dim")]
    pub n: usize,
    pub mode: RadialModeKind,
    pub radius: f64,
    /// Barrier height (barrier mode).
    #[serde(default)]
    pub m: Option<f64>,
    /// Boundary value at `ρ = R` (ball mode).
    #[serde(default)]
    pub boundary_value: f64,
    #[serde(default = "default_shoot_tol")]
    pub tol: f64,
}

fn default_dim() -> usize {
    2
}

fn default_shoot_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WulffSpec {
    pub radius: f64,
    pub points: usize,
    pub side: NormSide,
    pub center: [f64; 2],
}

impl Default for WulffSpec {
    fn default() -> Self {
        WulffSpec {
            radius: 1.0,
            points: 512,
            side: NormSide::Dual,
            center: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub samples: usize,
    pub duality_samples: usize,
    pub sphere_samples: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            samples: DEFAULT_BOUND_SAMPLES,
            duality_samples: 100,
            sphere_samples: 4096,
        }
    }
}

fn default_h() -> f64 {
    0.05
}

fn default_tol() -> f64 {
    SolveOptions::default().tol_solve
}

fn default_max_iter() -> usize {
    SolveOptions::default().max_iter
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainSpec,
    pub material: MaterialSpec,
    #[serde(default)]
    pub norm: NormSpec,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_tol")]
    pub tol_solve: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub radial: Option<RadialSpec>,
    #[serde(default)]
    pub wulff: WulffSpec,
    #[serde(default)]
    pub regularity: RegularityParams,
    #[serde(default)]
    pub verify: VerifySpec,
}

/// Results of the admissibility checks run when a configuration is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilityReport {
    pub profile: String,
    pub norm: String,
    #[serde(rename = "C1_est")]
    pub c1_est: f64,
    #[serde(rename = "C2_est")]
    pub c2_est: f64,
    #[serde(rename = "C_flux")]
    pub c_flux: f64,
    #[serde(rename = "C_monotone")]
    pub c_monotone: f64,
    pub osserman_verdict: OssermanVerdict,
    pub ellipticity: f64,
    pub duality_residual: f64,
    pub samples: usize,
    pub seed: u64,
}

/// A configuration that passed every check, with its built objects.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: Config,
    /// Canonical JSON of the effective configuration (after overrides).
    pub canonical: String,
    pub material: MaterialProfile,
    pub norm: FinslerNorm,
    pub source: SourceTerm,
    pub domain: Domain,
    pub admissibility: AdmissibilityReport,
}

impl Setup {
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol_solve: self.config.tol_solve,
            max_iter: self.config.max_iter,
            ..SolveOptions::default()
        }
    }

    /// The radial problem of the `radial` section; barrier mode uses `g`,
    /// ball mode `f`.
    pub fn radial_problem(&self) -> Result<RadialProblem> {
        let spec = self.config.radial.as_ref().ok_or_else(|| {
            Error::Config("the `radial` section is required for this command".into())
        })?;
        let (mode, source) = match spec.mode {
            RadialModeKind::Barrier => {
                let m = spec
                    .m
                    .ok_or_else(|| Error::Config("radial.m is required in barrier mode".into()))?;
                (
                    RadialMode::Barrier {
                        radius: spec.radius,
                        m,
                    },
                    self.source.g.clone(),
                )
            }
            RadialModeKind::Ball => (
                RadialMode::Ball {
                    radius: spec.radius,
                    boundary_value: spec.boundary_value,
                },
                self.source.f.clone(),
            ),
        };
        RadialProblem::new(self.material, spec.n, mode, source)
    }
}

impl NormSpec {
    pub fn build(&self) -> Result<FinslerNorm> {
        match self {
            NormSpec::Euclidean => FinslerNorm::euclidean(2),
            NormSpec::Ellipsoidal(MatrixParams { matrix }) => {
                if matrix.len() != 2 || matrix.iter().any(|r| r.len() != 2) {
                    return Err(Error::Config("norm.params.matrix must be 2×2".into()));
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                FinslerNorm::ellipsoidal(DMatrix::from_row_slice(2, 2, &flat))
            }
            NormSpec::Diagonal(DiagonalParams { entries }) => {
                if entries.len() != 2 {
                    return Err(Error::Config(
                        "norm.params.entries must have 2 entries".into(),
                    ));
                }
                FinslerNorm::diagonal(entries)
            }
            NormSpec::Lp(LpParams { q }) => FinslerNorm::lp(2, *q),
        }
    }
}

impl DomainSpec {
    pub fn build(&self, norm: &FinslerNorm) -> Domain {
        match *self {
            DomainSpec::Rectangle { a, b } => Domain::Rectangle { a, b },
            DomainSpec::Disk { radius } => Domain::Disk { radius },
            DomainSpec::WulffBall { radius } => Domain::WulffBall {
                norm: norm.clone(),
                radius,
            },
            DomainSpec::AnnulusWulff { radius } => Domain::AnnulusWulff {
                norm: norm.clone(),
                radius,
            },
        }
    }
}

/// Sets `value` at a dotted `path` (`material.p`), creating objects on the
/// way. The value is parsed as JSON when possible, otherwise taken as a
/// string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cursor = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!(
                "override `{path}`: `{}` is not an object",
                keys[..i].join(".")
            ))
        })?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        cursor = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last key")
}

/// Parses `text`, applies `overrides` and an optional seed, and runs every
/// admissibility check.
pub fn load_config_str(text: &str, overrides: &[String], seed: Option<u64>) -> Result<Setup> {
    let mut config: Config = if overrides.is_empty() && seed.is_none() {
        serde_json::from_str(text).map_err(config_error)?
    } else {
        let mut doc: Value = serde_json::from_str(text).map_err(config_error)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        serde_json::from_value(doc).map_err(config_error)?
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    validate(config)
}

pub fn load_config(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<Setup> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    load_config_str(&text, overrides, seed)
}

fn config_error(e: serde_json::Error) -> Error {
    Error::Config(e.to_string())
}

fn validate(config: Config) -> Result<Setup> {
    if !(config.h > 0.0) || !config.h.is_finite() {
        return Err(Error::Config(format!(
            "h must be positive, got {}",
            config.h
        )));
    }
    if !(config.tol_solve > 0.0) {
        return Err(Error::Config(format!(
            "tol_solve must be positive, got {}",
            config.tol_solve
        )));
    }
    if config.max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    let material =
        MaterialProfile::new(config.material.kind, config.material.p, config.material.k)?;
    let norm = config.norm.build()?;
    let ellipticity = ellipticity_constant(&norm, config.verify.sphere_samples.max(16))?;
    let mut source = SourceTerm::new(config.source.f.clone(), config.source.g.clone())?;
    let verdict = source.classify(&material, config.source.delta)?;

    let n = config.verify.samples.max(1);
    let bounds = check_structural_bounds(&material, &norm, &sample_pairs(2, n, config.seed))?;
    let c_flux = check_flux_bound(&material, &norm, &sample_vectors(2, n, config.seed))?;
    let c_monotone =
        check_flux_monotonicity(&material, &norm, &sample_point_pairs(2, n, config.seed))?;
    let duality_residual = verify_duality_identities(
        &norm,
        &sample_vectors(2, config.verify.duality_samples.max(1), config.seed),
    )?;
    let domain = config.domain.build(&norm);
    let canonical = serde_json::to_string(&serde_json::to_value(&config)?)?;
    let admissibility = AdmissibilityReport {
        profile: material.to_string(),
        norm: norm.describe(),
        c1_est: bounds.c1,
        c2_est: bounds.c2,
        c_flux,
        c_monotone,
        osserman_verdict: verdict,
        ellipticity,
        duality_residual,
        samples: n,
        seed: config.seed,
    };
    Ok(Setup {
        config,
        canonical,
        material,
        norm,
        source,
        domain,
        admissibility,
    })
}
