//! Anisotropic gauge norms, Minkowski distance fields and grid-based checks
//! of weighted Sobolev, Hardy-Sobolev and Hardy-Morrey inequalities.
//!
//! The crate is organised bottom-up:
//!
//! * [`gauge`]: norms `F`, polars `F°`, duality residuals, `sigma_F` and the
//!   Wulff-shape Sobolev constant.
//! * [`domain`]: domains, boundary meshes, the distance `d_F`, grids with
//!   cut-cell fractions.
//! * [`field`]: grid fields, gradients, weighted integrals, F-Laplacian
//!   pairings, Morrey/Hölder/BMO seminorms.
//! * [`testfns`]: seeded families of compactly supported test functions.
//! * [`inequalities`]: exponent algebra, constants and the check registry.
//! * [`runner`]: JSON-configured batch runs producing CSV/JSON reports.

pub mod error;
pub mod exec;
pub mod geom;
pub mod gauge;
pub mod domain;
pub mod field;
pub mod testfns;
pub mod inequalities;
pub mod runner;

pub use error::{Error, Result};
