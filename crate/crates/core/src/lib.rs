//! Maximal spacelike graphs with prescribed isolated singularities over
//! compact surfaces.
//!
//! A height function u on a surface M (unit sphere or flat torus) describes
//! a graph in the Lorentzian product M x R with metric g - dt^2. The graph
//! is spacelike where |grad u| < 1 and its area is
//!
//! ```text
//!     A(u) = integral over M of sqrt(1 - |grad u|^2)
//! ```
//!
//! Area maximizers subject to point constraints u(p_i) = t_i are smooth and
//! maximal (vanishing mean curvature) away from the constraint points, and
//! develop isolated light-cone singularities at them whenever the heights
//! force the gradient to saturate. This crate constructs such maximizers on
//! piecewise-linear meshes by solving the discrete Euler-Lagrange equations
//! on a family of shrinking punctured domains, and provides the analysis
//! tools (induced metric, cone profiles, conformal moduli, holomorphic-
//! quadratic-differential comparison) used to verify the construction.
//!
//! Entry points:
//! - [`mesh::build_sphere`], [`mesh::build_torus`]: the supported surfaces.
//! - [`config::validate_spacelike`]: admissibility of prescribed data.
//! - [`solver::solve_singular`]: the full shrinking-domain construction.
//! - [`analysis::verify`]: structural checks on a computed graph.
//! - [`oracle`]: an independent one-dimensional reference solution for
//!   rotationally symmetric data on the sphere.

// Index-synchronized loops over parallel vertex/triangle arrays read better
// with explicit indices, and `!(x > 0.0)` deliberately treats NaN as failing.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod moduli;
pub mod oracle;
pub mod solver;

pub use error::{MgError, Result};
