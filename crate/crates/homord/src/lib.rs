//! A laboratory for linearly ordered homogeneous structures.

pub mod automorphism;
pub mod certificate;
pub mod constructions;
pub mod error;
pub mod fraisse;
pub mod independence;
pub mod structure;
pub mod types;

pub use error::{Error, Result};
