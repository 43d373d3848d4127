//! Existence analysis and numerical solution of the nonlinear elliptic
//! equation `Δ_{S²} u = C − h·eᵘ` on the unit sphere, together with its
//! specialization to the ocean-gyre stream-function model
//! `Δ_{S²} ψ − 2ω cosθ = c·e^{dψ} + g`.
//!
//! The crate is organized around five modules:
//!
//! - [`grid`]: Gauss–Legendre × uniform-longitude grids, quadrature-exact
//!   surface integration and pointwise field algebra;
//! - [`harmonics`]: real spherical-harmonic transforms, the spectral
//!   Laplacian and its inverse, spectral gradients;
//! - [`criteria`]: Kazdan–Warner kernels and residuals, the pointwise
//!   matrix `W`, sign-change/gap/definiteness tests and the general
//!   existence classification;
//! - [`gyre`]: the gyre specialization — candidate curvature
//!   `h_ω = −cd·e^{−ωd cosθ}`, closed-form kernels and eigenvalues, the
//!   sufficient-region bound and the parameter-space classifier;
//! - [`solver`]: a damped spectral Newton solver with Kazdan–Warner
//!   validation of converged solutions.
//!
//! ```
//! use kwgyre::grid::build_grid;
//! use kwgyre::gyre::GyreParams;
//!
//! let p = GyreParams::new(1.0, 1.0, -1.0, 0.5).unwrap();
//! let verdict = kwgyre::gyre::classify(&p).unwrap();
//! assert_eq!(verdict.verdict, kwgyre::gyre::RegionKind::Exists);
//!
//! let grid = build_grid(16, 32).unwrap();
//! let one = kwgyre::grid::ScalarField::constant(&grid, 1.0);
//! assert!((kwgyre::grid::integrate(&one) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
//! ```

pub mod criteria;
pub mod grid;
pub mod gyre;
pub mod harmonics;
pub mod solver;

mod sym3;

pub use sym3::eigvalsh3;

/// Errors produced by grid construction, transforms, criteria evaluation
/// and the solver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("degree L={lmax} exceeds grid bandwidth (nlat={nlat} supports L <= nlat-1)")]
    DegreeTooLarge { lmax: usize, nlat: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("input must have zero mean (got mean = {0:e})")]
    NonZeroMean(f64),

    #[error("overflow guard tripped: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
