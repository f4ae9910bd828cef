//! Certified data removal for ridge-regularized generalized linear models.
//!
//! A model is fitted by damped Newton on the full data. Removing a set of
//! rows takes a few Newton steps on the reduced objective from the full
//! fit, then adds isotropic Laplace noise whose radius bounds the remaining
//! distance to the exact retrain.
//!
//! ```
//! use unlearn_core::{data, rng, solver, unlearn, ModelSpec, RemovalRequest};
//!
//! let ds = data::generate_logistic(200, 20, &mut rng::stream(7)).unwrap();
//! let obj = ds.objective(ModelSpec::logistic_ridge(1.0).unwrap()).unwrap();
//! let full = solver::fit_default(&obj).unwrap();
//! let req = RemovalRequest::new(vec![3]);
//! let out = unlearn::unlearn(&obj, &full.beta, &req, 2, 0.0, 1.0, &mut rng::stream(8)).unwrap();
//! assert_eq!(out.steps(), 2);
//! ```

pub mod data;
pub mod error;
pub mod experiments;
pub mod glm;
pub mod metrics;
pub mod noise;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod svg;
pub mod unlearn;

pub use faer;

pub use data::{Dataset, GlmLaw, ModelFile, PointSource};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentKind, ExperimentOutcome, ExperimentRecord, ScaleMode};
pub use glm::{LossFamily, ModelSpec, Regularizer};
pub use metrics::{CertReport, GedEstimate};
pub use noise::{Calibration, NoiseSpec, TheoryConstants};
pub use solver::{FitResult, Objective};
pub use unlearn::{RemovalRequest, UnlearnResult};
