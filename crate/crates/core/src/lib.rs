//! Renormalization-group map `T_a rho(x) = |a| (rho * rho)(a x)` on
//! one-dimensional densities, its stable-law fixed points, the spectrum of
//! its linearization, basins of attraction and the fluid limit of a random
//! walk.

pub mod acceptance;
pub mod cf;
pub mod density;
pub mod error;
pub mod flow;
pub mod io;
pub mod numerics;
pub mod par;
pub mod quad;
pub mod special;
pub mod spectrum;
pub mod stable;
pub mod transform;
pub mod walk;

pub use cf::ClosedForm;
pub use density::{
    cf_sup_distance, from_spectral, l1_distance, to_spectral, GridDensity, GridSpec, MomentVector,
    SpectralFunction, Tolerances,
};
pub use error::{Error, Result};
pub use special::C64;
pub use stable::{StableParams, TestDensityParams};
pub use transform::{PerturbationField, ScaleParam};
