//! Bayesian sphere-on-sphere regression with maps of the form
//! `f = R ∘ S_ν`: a global rotation `R` composed with the semi-discrete
//! optimal transport map `S_ν` from the uniform law on `S^p` to a finite
//! measure `ν`.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which is what the sampler and the
//! command-line tool use.

pub mod bessel;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mcmc;
pub mod model;
pub mod ot;
pub mod rotation;
pub mod scalar;
pub mod sphere;
pub mod vmf;

pub use error::{Error, Result};
pub use scalar::Real;

pub type UnitVector = sphere::UnitVector<f64>;
pub type TangentVector = sphere::TangentVector<f64>;
pub type RotationMatrix = rotation::RotationMatrix<f64>;
pub type VmfParams = vmf::VmfParams<f64>;
pub type TargetMeasure = ot::TargetMeasure<f64>;
pub type ReferenceCloud = ot::ReferenceCloud<f64>;
pub type FeasibleInterval = ot::FeasibleInterval<f64>;
pub type ModelState = model::ModelState<f64>;
pub type Dataset = model::Dataset<f64>;
pub type PriorConfig = model::PriorConfig<f64>;
pub type SamplerConfig = mcmc::SamplerConfig<f64>;
pub type ChainTrace = mcmc::ChainTrace<f64>;
pub type TraceRecord = mcmc::TraceRecord<f64>;
pub use io::{Provenance, RunConfig};
