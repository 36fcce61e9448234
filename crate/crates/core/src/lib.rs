//! Exact symbolic engine for weighted A-connections on graded bundles,
//! bi-weighted connections on double vector bundles, and the Lie algebroid
//! calculus underneath them, with a manifest-driven CLI for batch checking.

pub mod algebroid;
pub mod bundles;
pub mod chart;
pub mod connection;
pub mod constructions;
pub mod dvb;
pub mod error;
pub mod expr;
pub mod manifest;
pub mod report;
pub mod subst;
pub mod vf;

pub use chart::{Chart, Coordinate, Parity};
pub use error::{Error, Result};
pub use expr::{frac, rat, Expression, FnSym};
pub use report::Report;
pub use subst::{Substitution, TwoWayMap};
pub use vf::VectorField;
