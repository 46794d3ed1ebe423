//! Numerical toolkit for curvature invariants of bi-Lagrangian 2-webs.
//!
//! The crate computes the canonical symplectic connection, curvature and
//! Ricci tensors, flatness tests, double potentials and volume-preserving
//! reflection holonomy of bi-Lagrangian webs declared through a small smooth
//! expression language, and cross-checks closed-form curvature expressions
//! for ray-space and tangent-line web families against a jet-arithmetic
//! derivative pipeline.

pub mod expr;
pub mod holonomy;
pub mod jets;
pub mod modelfile;
pub mod models;
pub mod par;
pub mod potential;
pub mod suites;
pub mod webgeom;
