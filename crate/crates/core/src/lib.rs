//! Anisotropic quasilinear elliptic equations
//! `−div(B'(H(∇u))∇H(∇u)) = f(u)`: Finsler norms, P1 energy minimization
//! on planar domains, Finsler-radial barriers, and numerical diagnostics for
//! boundary behaviour and weighted second-derivative integrability.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod cli;
pub mod config;
pub mod error;
pub mod finsler;
pub mod io;
pub mod linalg;
pub mod material;
pub mod mesh;
pub mod radial;
pub mod recovery;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use finsler::{FinslerNorm, NormKind, NormSide, WulffShape};
pub use material::{MaterialProfile, OssermanVerdict, ProfileKind, ScalarFn, SourceTerm};
pub use solver::{solve, ScalarField, SolveOptions, SolveReport};
