//! European call pricing under the Bates stochastic-volatility jump-diffusion
//! model.
//!
//! The central engine solves the pricing PIDE in log-price/variance
//! coordinates with a characteristic (semi-Lagrangian) Galerkin scheme on P1
//! triangles. Around it sit the reference pricers used to check it: the
//! closed-form characteristic function with a Carr-Madan FFT, the Merton
//! series that also supplies the zero-variance boundary, Black-Scholes with
//! implied-volatility inversion, and a Monte Carlo simulator of the SDEs.

pub mod cli;
pub mod error;
pub mod fem;
pub mod gmres;
pub mod mc;
pub mod mesh;
pub mod model;
pub mod quadrature;
pub mod reference;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
pub use fem::{GridConfig, OperatorSet};
pub use mesh::{BoundaryTag, Mesh, PointLocation, Policy};
pub use model::{BatesParams, MarketSpec, Preset, ValidationReport};
pub use stepper::{FootMethod, PriceSurface, SolverConfig};
