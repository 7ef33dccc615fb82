//! Document-level event argument extraction as template filling, with
//! self-augmented context, alignment-enhanced training and iterative
//! inference.

pub mod augmentation;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod ontology;
pub mod synth;
pub mod templating;

pub use error::{Error, Result};
