//! Spectral geometry of magnetic horizontal Laplacians on scaled flat tori
//! and Heisenberg nilmanifolds.

pub mod chern;
pub mod circle;
pub mod field;
pub mod eigen;
pub mod geometry;
pub mod nil;
pub mod rumin;
pub mod torus;
