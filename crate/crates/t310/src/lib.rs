//! Cryptanalysis workbench for the T-310 block cipher.
//!
//! The crate provides a bit-exact implementation of the 36-bit cipher core
//! (round function, key schedule, IV expansion, character encryption), GF(2)
//! polynomial algebra and spectral analysis of its Boolean component, tooling
//! for the KT1/KT2 long-term-key classes including weak-class construction and
//! classification, a linear-approximation engine, a nonlinear invariant
//! search over bit windows, and a simulated slide/decryption-oracle attack
//! pipeline. The `t310` binary exposes all of it as batch subcommands.

pub mod anf;
pub mod attacks;
pub mod boolfn;
pub mod cipher;
pub mod cli;
pub mod dense;
pub mod gf2;
pub mod glc;
pub mod keyspace;
pub mod lincrypt;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("universe mismatch: {0}")]
    UniverseMismatch(String),
    #[error("unassigned variable `{0}` in evaluation")]
    UnassignedVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("truth table length {0} is not a power of two")]
    BadTableLength(usize),
    #[error("zero IV rejected (degenerate LFSR fill)")]
    ZeroIv,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("round not invertible: {0}")]
    NotBijective(String),
    #[error("window closure violation: {0}")]
    ClosureViolation(String),
    #[error("window map has no image for letter `{0}` (position {1})")]
    MissingImage(char, u8),
    #[error("window arity {0} too large for kernel search (max {1})")]
    ArityTooLarge(usize, usize),
    #[error("infeasible weak-class request: {0}")]
    Infeasible(String),
    #[error("key generator retry cap exhausted ({0} attempts)")]
    RetryCapExhausted(u64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
