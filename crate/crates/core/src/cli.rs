//! Command-line front end. Exit status 0 on success, 1 when the
//! configuration or arguments are rejected, 2 on numeric failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{load_config, AdmissibilityReport, RadialModeKind, Setup};
use crate::error::{Error, Result};
use crate::finsler::wulff_boundary;
use crate::io::csv_row;
use crate::mesh::build_domain;
use crate::radial::{hopf_margin, shoot, RadialMode};
use crate::recovery::nodal_gradient;
use crate::solver::{solve, zero_dirichlet, ScalarField};
use crate::verify::regularity_study_with;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "finsler-plap",
    version,
    about = "Anisotropic quasilinear elliptic solver and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve on the configured domain and export the field.
    Solve(Common),
    /// Shoot the radial profile of the `radial` section.
    Barrier(Common),
    /// Sample a Wulff shape boundary.
    Wulff(Common),
    /// Run the norm and material checks and export the admissibility report.
    Verify(Common),
    /// Refinement study of the regularity integrals plus the Hopf check.
    Regularity(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Override a configuration entry by dotted path, e.g. `material.p=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for every sampled check (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub status: RunStatus,
    pub partial: bool,
    pub error: Option<String>,
    pub artifacts: Vec<String>,
    pub admissibility: AdmissibilityReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierReport {
    pub mode: RadialMode,
    pub n: usize,
    pub shoot_slope: f64,
    pub center_value: f64,
    /// Only for barrier profiles in the plane.
    pub hopf_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WulffReport {
    pub max_residual: f64,
    pub convex: bool,
    pub points: usize,
}

type Action = fn(&Setup, &mut Out) -> Result<()>;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric { .. } | Error::NonConvergence { .. } | Error::Domain(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

fn one_line(e: &Error) -> String {
    e.to_string()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Output sink that records artifact names.
struct Out {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Out {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

fn write_field(out: &mut Out, name: &str, u: &ScalarField) -> Result<()> {
    let grads = nodal_gradient(u);
    let mut w = out.create(name)?;
    writeln!(w, "x,y,u,ux,uy")?;
    for ((x, v), g) in u.mesh().vertices().iter().zip(u.values()).zip(&grads) {
        writeln!(w, "{}", csv_row(&[x[0], x[1], *v, g[0], g[1]]))?;
    }
    w.flush()?;
    Ok(())
}

fn run_solve(setup: &Setup, out: &mut Out) -> Result<()> {
    let mesh = Arc::new(build_domain(&setup.domain, setup.config.h)?);
    let bc = zero_dirichlet(&mesh);
    match solve(
        mesh.clone(),
        &setup.material,
        &setup.norm,
        &setup.source,
        &bc,
        &setup.solve_options(),
    ) {
        Ok((u, report)) => {
            write_field(out, "field.csv", &u)?;
            out.json("solve_report.json", &report)
        }
        Err(Error::NonConvergence {
            iterations,
            residual,
            last_iterate,
        }) => {
            let u = ScalarField::new(mesh, *last_iterate.clone())?;
            write_field(out, "field.partial.csv", &u)?;
            Err(Error::NonConvergence {
                iterations,
                residual,
                last_iterate,
            })
        }
        Err(e) => Err(e),
    }
}

fn run_barrier(setup: &Setup, out: &mut Out) -> Result<()> {
    let problem = setup.radial_problem()?;
    let tol = setup.config.radial.as_ref().map_or(1e-10, |r| r.tol);
    let profile = shoot(&problem, tol)?;
    let mut w = out.create("profile.csv")?;
    profile.write_csv(&mut w)?;
    w.flush()?;
    let planar_barrier = problem.n == 2
        && setup.config.radial.as_ref().map(|r| r.mode) == Some(RadialModeKind::Barrier);
    let margin = if planar_barrier {
        Some(hopf_margin(&setup.norm, &profile)?)
    } else {
        None
    };
    out.json(
        "barrier_report.json",
        &BarrierReport {
            mode: profile.mode,
            n: profile.n,
            shoot_slope: profile.shoot_slope,
            center_value: profile.center_value,
            hopf_margin: margin,
        },
    )
}

fn run_wulff(setup: &Setup, out: &mut Out) -> Result<()> {
    let spec = &setup.config.wulff;
    let shape = wulff_boundary(
        &setup.norm,
        spec.center,
        spec.radius,
        spec.points,
        spec.side,
    )?;
    let mut w = out.create("shape.csv")?;
    shape.write_csv(&mut w)?;
    w.flush()?;
    out.json(
        "wulff_report.json",
        &WulffReport {
            max_residual: shape.max_residual(&setup.norm)?,
            convex: shape.is_convex(),
            points: spec.points,
        },
    )
}

fn run_verify(setup: &Setup, out: &mut Out) -> Result<()> {
    out.json("admissibility.json", &setup.admissibility)
}

fn run_regularity(setup: &Setup, out: &mut Out) -> Result<()> {
    let mut csv = out.create("study.csv")?;
    writeln!(csv, "h,hessian_integral,weight_integral,critical_fraction")?;
    let outcome = regularity_study_with(
        &setup.domain,
        &setup.material,
        &setup.norm,
        &setup.source,
        setup.config.h,
        &setup.config.regularity,
        &setup.solve_options(),
        |r| {
            writeln!(
                csv,
                "{}",
                csv_row(&[
                    r.h,
                    r.hessian_integral,
                    r.weight_integral,
                    r.critical_fraction
                ])
            )?;
            csv.flush()?;
            Ok(())
        },
    )?;
    drop(csv);
    out.json("regularity_report.json", &outcome.report)?;
    out.json("hopf_report.json", &outcome.hopf)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (name, common, action): (&str, &Common, Action) = match &cli.command {
        Command::Solve(c) => ("solve", c, run_solve),
        Command::Barrier(c) => ("barrier", c, run_barrier),
        Command::Wulff(c) => ("wulff", c, run_wulff),
        Command::Verify(c) => ("verify", c, run_verify),
        Command::Regularity(c) => ("regularity", c, run_regularity),
    };
    let setup = match load_config(&common.config, &common.set, common.seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = fs::create_dir_all(&common.out) {
        eprintln!(
            "error: cannot create output directory {}: {e}",
            common.out.display()
        );
        return EXIT_CONFIG;
    }
    let mut out = Out {
        dir: common.out.clone(),
        artifacts: Vec::new(),
    };
    let result = action(&setup, &mut out);
    let (status, code, error) = match &result {
        Ok(()) => (RunStatus::Ok, EXIT_OK, None),
        Err(e) => {
            eprintln!("error: {}", one_line(e));
            let code = exit_code(e);
            let status = if code == EXIT_NUMERIC {
                RunStatus::NumericFailure
            } else {
                RunStatus::Ok
            };
            (status, code, Some(one_line(e)))
        }
    };
    let manifest = Manifest {
        command: name.to_string(),
        config_sha256: setup.config_hash(),
        seed: setup.config.seed,
        status,
        partial: result.is_err() && !out.artifacts.is_empty(),
        error,
        artifacts: out.artifacts.clone(),
        admissibility: setup.admissibility.clone(),
    };
    if let Err(e) = write_manifest(&common.out, &manifest) {
        eprintln!("error: cannot write manifest: {}", one_line(&e));
        return if code == EXIT_OK { EXIT_CONFIG } else { code };
    }
    code
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
