//! Consistent energy-based quasicontinuum (QC) coupling for a periodic
//! one-dimensional chain with nearest and next-nearest neighbour pair
//! interactions.
//!
//! The crate provides the atomistic and QC energies with their Newton
//! minimizers, a posteriori estimators for the deformation-gradient and
//! energy errors, a posteriori stability constants, three mesh-generation
//! schemes and the benchmark harness that compares them.
//!
//! ```
//! use qc_chain::{build_benchmark, estimate, optimal_mesh, solve_qc, RefinementConfig, Scheme};
//! use std::sync::Arc;
//!
//! let b = build_benchmark(65, 5.0, 1.0).unwrap();
//! let mut rc = RefinementConfig::new(Scheme::Optimal, 65);
//! rc.k_atoms = 4;
//! let mesh = Arc::new(optimal_mesh(&b.cfg, &|r| b.force.radial(r), &rc).unwrap());
//! let (y, _) = solve_qc(mesh, b.potential, Some(b.force_field()), None).unwrap();
//! let report = estimate(&y, &b.potential, Some(b.force_field())).unwrap();
//! assert!(report.deformation_bound > 0.0);
//! ```

pub mod atomistic;
pub mod banded;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod field;
pub mod inequality;
pub mod lattice;
pub mod newton;
pub mod par;
pub mod potential;
pub mod qc;
pub mod refine;
pub mod stability;

pub use atomistic::{solve_atomistic, AtomisticModel, AtomisticState};
pub use error::{QcError, Result};
pub use estimator::{estimate, EstimatorReport};
pub use experiment::{build_benchmark, run_sweep, solve_reference, Benchmark, ExperimentRecord, Reference, SweepConfig};
pub use field::{Field, FieldKind, Norm, Partition};
pub use lattice::{ChainConfig, Mesh, RegionDecomposition};
pub use newton::SolveReport;
pub use potential::{MorseParams, Potential};
pub use qc::{solve_qc, QcModel, QcState};
pub use refine::{optimal_mesh, refine_adaptive, RefinementConfig, Scheme};
pub use stability::{assess_stability, StabilityReport};
