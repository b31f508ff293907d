//! Quantum radiation from a time-dependent dielectric medium, to first
//! order in the squeezing function ξ = ½(1/ε − 1/ε_∞).
//!
//! A scenario describes ε(r, t) (a pulsating bubble or a Gaussian blob) and
//! optionally a medium velocity field. From it the crate computes
//!
//! * the space-time transform ξ̃(q, Ω) on a table ([`transforms`]),
//! * the photon number per mode V·N_k, the spectral density e(ω) and the
//!   total energy by direct quadrature ([`response`]),
//! * the same energy from a small-size expansion in time derivatives of
//!   radial moments, weighted by exact rational coefficients ([`gnm`]),
//! * small-k diagnostics of velocity fields ([`velocity`]),
//! * a radial elliptic solve for the static potential ([`potential`]),
//! * order-of-magnitude bounds ([`estimator`]).
//!
//! Natural units ħ = c = 1 are used throughout.
//!
//! ```
//! use casimir_response::gnm::gnm_exact;
//! use num_rational::BigRational;
//!
//! assert_eq!(gnm_exact(0, 0), BigRational::new(1.into(), 105.into()));
//! ```

pub mod error;
pub mod estimator;
pub mod gnm;
pub mod jet;
pub mod output;
pub mod potential;
pub mod quadrature;
pub mod response;
pub mod scenario;
pub mod transforms;
pub mod units;
pub mod velocity;

pub use error::{Error, ErrorClass, Result};
pub use scenario::{load_scenario, load_scenario_with, LoadOptions, ScenarioConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/gnm.md")]
    mod gnm {}
    #[doc = include_str!("../../../book/src/response.md")]
    mod response {}
    #[doc = include_str!("../../../book/src/velocity.md")]
    mod velocity {}
    #[doc = include_str!("../../../book/src/potential.md")]
    mod potential {}
    #[doc = include_str!("../../../book/src/estimator.md")]
    mod estimator {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
