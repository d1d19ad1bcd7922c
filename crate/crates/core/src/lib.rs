//! Privacy-preserving distributed projected-gradient computation with
//! homomorphically encrypted gradient evaluation.

pub mod casestudies;
pub mod fixedpoint;
pub mod golden;
pub mod ioi;
pub mod paillier;
pub mod problem;
pub mod protocol;
pub mod singlemod;
pub mod synth;
