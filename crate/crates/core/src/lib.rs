//! Jacobi-Maupertuis geometry of homogeneous potentials.
//!
//! The crate is organized bottom-up:
//!
//! - [`potentials`]: power-law and shape potentials, the mass inner product, collision poles.
//! - [`jm_metric`]: the conformal metric `2(h0 + U)|dq|^2`, JM lengths of sampled paths,
//!   the conical normal-form coordinates and curvature checks.
//! - [`cone_geometry`]: exact geodesics on cones over circles, apex inextendibility, corner cuts.
//! - [`sector_optics`]: the piecewise-constant step metric on the flattened half-plane,
//!   Snell-law tracing, the test-curve family and a brute-force graph oracle.
//! - [`variational`]: discrete action, direct-method minimization, zero-energy
//!   reparameterization, blow-up rescaling and Newton-dynamics checks.
//! - [`io`]: CSV and JSON emission for paths, sweeps and traces.

pub mod cone_geometry;
pub mod error;
pub mod io;
pub mod jm_metric;
pub mod potentials;
pub(crate) mod quadrature;
pub mod sector_optics;
pub mod variational;

pub use error::{Error, Result};
pub use jm_metric::{ConeChart, FactorTwo, JmMetric, ParamKind, SampledPath};
pub use potentials::{
    Configuration, Convention, HomogeneousPotential, MassSystem, Potential, PotentialKind,
    PotentialValue, StepShapeParams,
};
pub use sector_optics::{SectorMetric, TestCurve};
pub use variational::{ActionReport, TimedPath};
