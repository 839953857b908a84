//! Active nearest neighbor regression (ANNR) via stochastic Delaunay refinement.
//!
//! The regressor is piecewise constant on the Voronoi tessellation of the
//! queried points. New queries are chosen actively: simplices of an
//! (approximate) Delaunay triangulation are scored by the volume of their
//! lifting onto the graph of `lambda * f`, and the circumcenter of the
//! highest-scoring simplex becomes the next query. The triangulation is never
//! built in full; simplices are discovered by random walks on the boundary of
//! the Voronoi cells.
//!
//! Crate layout:
//!
//! - [`geometry`] — simplex volumes (Cayley–Menger), liftings, circumcenters,
//!   score clipping, bounding-box clamping
//! - [`spatial`] — exact nearest-neighbor index over the dataset, with
//!   incremental insertion
//! - [`walk`] — stochastic discovery of Delaunay simplices by ray casting on
//!   Voronoi cell boundaries
//! - [`engine`] — the active-learning loop: score, pop, query, insert
//! - [`baselines`] — a rectangular-trisection refiner and the uniform sampler
//! - [`testbed`] — built-in target functions, the external evaluator
//!   protocol, test sets and metrics
//! - [`trace`] — the per-query run trace and its CSV schema

pub mod baselines;
pub mod engine;
pub mod geometry;
mod linalg;
pub mod oracles;
pub mod spatial;
pub mod testbed;
pub mod trace;
pub mod walk;

pub use engine::{Engine, EngineConfig, EngineError, Lambda};
pub use geometry::{BoundingBox, GeometryError, Point};
pub use spatial::{Dataset, SpatialError};
pub use testbed::{TargetFunction, TestSet};
pub use trace::{RunTrace, TraceRow};
pub use walk::SimplexCandidate;
