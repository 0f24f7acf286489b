//! Construction and verification of plane saddle systems
//!
//!   x' = x,    y' = A·y + G(x, y),        y ∈ ℂⁿ,  G ∈ (y)²,
//!
//! whose holonomy return map on the transversal {x = 1} has a prescribed
//! jet. The library provides truncated power-series (jet) arithmetic,
//! spectral analysis of A with resonance bookkeeping, Poincaré-Dulac
//! normal forms, formal exp/log between nilpotent fields and unipotent
//! maps, the suspension pipeline that assembles a realizing system, and a
//! numerical holonomy/transport oracle that never reuses the constructive
//! code paths beyond the jet type itself.

pub mod corpus;
pub mod error;
pub mod formalcalc;
pub mod holonomy;
pub mod jets;
pub mod linalg;
pub mod normalform;
pub mod realize;
pub mod saddle;
pub mod spectral;

pub use error::{Error, Result};
pub use jets::{DiffeoJet, Jet, VFieldJet};
pub use linalg::CMatrix;
pub use saddle::{SaddleSystem, SaddleTerm};
pub use spectral::{Resonance, ResonanceClass, SpectralData};

use serde::{Deserialize, Serialize};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Complex scalar used everywhere.
pub type C64 = num_complex::Complex<f64>;

/// Numerical thresholds shared across the pipeline.
///
/// `coeff` gates jet coefficients (postconditions, pruning), `int` is the
/// distance-to-integer test for resonance classification, `mat` gates
/// matrix residuals, `eig` drives eigenvalue clustering, and the two `ode`
/// fields are the relative/absolute integrator tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    pub coeff: f64,
    pub int: f64,
    pub mat: f64,
    pub eig: f64,
    pub ode_rel: f64,
    pub ode_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            coeff: 1e-9,
            int: 1e-6,
            mat: 1e-9,
            eig: 1e-7,
            ode_rel: 1e-10,
            ode_abs: 1e-13,
        }
    }
}
