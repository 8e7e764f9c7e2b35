//! Test oracles. Nothing here calls the encoder or the solver: states are
//! checked against the package semantics directly and PB instances are
//! minimized by enumeration.

pub mod opb_reader;
pub mod oracle;
pub mod random;
