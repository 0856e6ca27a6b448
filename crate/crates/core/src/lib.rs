//! Error asymmetry between causal and anticausal regression under additive
//! noise models.
//!
//! The crate is organized bottom-up: [`oracle`] defines the monotone data
//! generating functions, [`datagen`] samples datasets from them, [`theory`]
//! integrates the predicted errors, [`regress`] fits models in either
//! direction and [`bench`] runs the experiment harnesses end to end.

pub mod bench;
pub mod datagen;
pub mod error;
pub mod oracle;
pub mod quad;
pub mod regress;
pub mod theory;

pub use datagen::{generate, Column, Dataset, NoisePolicy, NoiseSpec, TruthDirection};
pub use error::{Error, Result};
pub use oracle::{Family, Oracle};
pub use regress::{Direction, FitKind, FitModel};
pub use theory::{Density1D, TheoryReport};
