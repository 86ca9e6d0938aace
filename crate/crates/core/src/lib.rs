//! Perfect simulation of stationary chains whose memory is a probabilistic
//! context tree driven by the last occurrence of a reference string.

pub mod cftp;
pub mod model;
pub mod partition;
pub mod random;
pub mod analysis;
pub mod dsl;
pub mod experiment;
pub mod oracle;
