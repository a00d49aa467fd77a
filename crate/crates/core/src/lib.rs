//! Upper and lower bounds on the Gromov-Hausdorff distance between finite
//! metric spaces.
//!
//! The discrete problem (minimize the distortion of a mapping pair) is
//! relaxed to a smooth quadratic `σ_c` over the polytope of row-stochastic
//! "soft" mapping pairs and minimized with Frank-Wolfe from random
//! starts. Each local solution is projected back to a mapping pair, whose
//! distortion gives an upper bound; a cheap diameter/radius bound gives
//! the lower side.
//!
//! ```
//! use ghrelax::{estimate_dgh, MetricSpace, SolverConfig};
//! use nalgebra::DMatrix;
//!
//! let a = MetricSpace::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
//! let b = MetricSpace::new(DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0])).unwrap();
//! let report = estimate_dgh(&a, &b, &SolverConfig::default()).unwrap();
//! assert!(report.exact);
//! assert!((report.dgh_upper - 1.0).abs() < 1e-12);
//! ```

pub mod error;
pub mod instances;
pub mod io;
pub mod metric;
pub mod polytope;
pub mod relaxation;
pub mod solver;

pub use error::{Error, Result};
pub use metric::{distortion_gap, normalize_pair, normalized_distortion_gap, trivial_lower_bound, MetricSpace};
pub use polytope::{lmo, project_to_vertex, MappingPair, SoftBimapping};
pub use relaxation::{build_blocks, safe_c_threshold, BlockSystem, NconvReport, SafeC};
pub use solver::{
    brute_force_bijective, brute_force_dgh, estimate_dgh, CChoice, SolveReport, SolverConfig,
};
