//! Curvature conditions for families of maps, free nilpotent lifts and
//! numerical experiments with dyadic Radon-type operators.

pub mod fit;
pub mod jets;
pub mod nilpotent;
pub mod vfields;
pub mod curvature;
pub mod spec;
pub mod freegeom;
pub mod oplab;
pub mod cli;
