//! Quasi-static phase-field fracture in 2D solved with a staggered L-scheme
//! whose stabilization can be constant, grown geometrically, or weighted by
//! the phase field.

pub mod fem;
pub mod material;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod subsolvers;
pub mod postprocess;
pub mod lscheme;
pub mod output;
pub mod config;
pub mod app;
pub mod selfcheck;
