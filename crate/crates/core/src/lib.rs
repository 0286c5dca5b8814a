//! Infinitary term rewriting with proof terms.

pub mod affine;
pub mod compression;
pub mod denotation;
pub mod equivalence;
pub mod error;
pub mod family;
pub mod mstep;
pub mod ordinal;
pub mod position;
pub mod proofterm;
pub mod pterm;
pub mod redseq;
pub mod syntax;
pub mod term;
pub mod trs;

pub use error::{Error, Result};
