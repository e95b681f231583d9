//! Exoplanet detection in angular-differential-imaging cubes.
//!
//! An ADI cube `Y` (frames x pixels) is split into a low-rank stellar
//! background `L` and a foreground `X` built from a handful of trajectory
//! atoms: the PSF swept along the arc a sky-fixed companion traces as the
//! field rotates. The split is found by alternating hard thresholding
//! ([`solver::solve`]). An Annular PCA detector ([`apca`]) serves as the
//! baseline, and [`eval`] compares the two by injection and ROC analysis.
//!
//! Module map:
//! - [`image`], [`psf`]: rotation, cross-correlation, stamp placement;
//! - [`cube`], [`io`]: cube types and the binary + JSON container;
//! - [`dictionary`]: trajectory atoms and fast correlation;
//! - [`solver`]: rank and sparse projections, the alternating solver;
//! - [`apca`]: the baseline;
//! - [`eval`]: synthetic cubes, injection, ROC and the benchmark.

pub mod apca;
pub mod cube;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod image;
pub mod io;
pub mod linalg;
pub mod psf;
pub mod solver;

pub use cube::{AdiCube, Cube};
pub use dictionary::{build_dictionary, planet_track, CorrelationPath, TrajectoryDictionary};
pub use error::{Error, Result};
pub use image::{add_stamp, cross_correlate, rotate_image, Image};
pub use psf::{make_gaussian_psf, Normalization, PsfTemplate};
pub use solver::{detection_map, solve, sparse_project, Decomposition, SolverConfig};
