//! Clustering of two-agent interactions under a rotation, translation and
//! pair-order invariant Procrustes metric.
//!
//! An [`Interaction`] is an ordered pair of planar trajectories on a common
//! time grid. [`procrustes::distance`] compares two of them after the best
//! rigid motion (and the better of the two pair orderings) has been applied
//! to one side, which makes it a metric on the quotient space of
//! interactions. On top of that metric the crate provides
//!
//! - pairwise distance matrices and metric MDS embeddings,
//! - three approximate k-means schemes (MDS medoids and two alignment-based
//!   schemes) plus a cubic-coefficient baseline,
//! - exact Wasserstein distances between discrete measures of interactions,
//! - silhouette, within/between and stability diagnostics,
//! - spline change-point segmentation of raw encounters.

pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod io;
pub(crate) mod kmeans;
pub mod mds;
pub mod procrustes;
pub mod segmentation;
pub mod synthetic;
pub mod trajectory;
pub mod transport;

pub use error::{Error, Result};
pub use procrustes::{Alignment, DistanceMatrix};
pub use trajectory::{Interaction, Point, TimeMeasure, Trajectory};
