//! Steady-state seepage analysis of zoned embankment dams.
//!
//! The pipeline runs from a parametric cross-section through scenario
//! transforms, constrained Delaunay meshing and an unconfined finite-element
//! solve to discharge, phreatic line and flow-net exports. Calibration fits
//! zone permeabilities to piezometer readings.

pub mod geometry;
pub mod material;
pub mod mesh;
pub mod fem;
pub mod postproc;
pub mod calibration;
pub mod study;
