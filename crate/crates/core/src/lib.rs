//! Remote-signal synthesis for wide-area damping control.
//!
//! ```
//! use gridobs::{benchmark, control, estimation, simulate, Model};
//! use gridobs::nalgebra::DVector;
//!
//! let model: Model = benchmark::default_benchmark();
//! let selector = benchmark::default_selector();
//! let (uio, cert) = estimation::design_uio(&model)?;
//! assert!(cert.lmi_max_eig.unwrap() < 0.0);
//!
//! let grid = control::gain_grid(0.0, 5.0, 50.0)?;
//! let (wapss, _) = control::tune_static_gain(&model, &uio, &selector, &grid)?;
//!
//! let x0 = DVector::zeros(model.n());
//! let run = simulate::simulate_closed_loop(
//!     &model, &uio, &selector, wapss.k,
//!     Some(&simulate::DEFAULT_PULSE), &x0, &x0, 5.0, 1e-3,
//! )?;
//! assert_eq!(run.len(), 5001);
//! # Ok::<(), gridobs::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod certify;
pub mod control;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod modal;
pub mod model;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use scalar::Real;

pub use nalgebra;

pub type Model = model::LtiModel<f64>;
pub type Params = benchmark::TwoAreaParams<f64>;
pub type Modes = modal::ModalDecomposition<f64>;
pub type Certificate = certify::StabilityCertificate<f64>;
pub type Luenberger = estimation::LuenbergerObserver<f64>;
pub type Uio = estimation::UnknownInputObserver<f64>;
pub type Trajectory = simulate::Trajectory<f64>;
pub type Wapss = control::StaticWapss<f64>;
