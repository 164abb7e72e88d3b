//! Interval bounds on probabilities of causation (PNS, PN, PS).
//!
//! The crate combines experimental and observational data with the structure
//! of a causal diagram to narrow the structure-free bounds:
//!
//! - [`graph`]: causal diagrams, d-separation, the back-door criterion and
//!   per-covariate-set eligibility of each bound.
//! - [`tables`]: observational joint tables, experimental (interventional)
//!   quantities and mediator tables.
//! - [`bounds`]: every bound formula plus a dispatcher that intersects all
//!   eligible intervals.
//! - [`oracle`]: explicit response-function SCMs used as ground truth, with an
//!   LP (and grid) extremizer over exogenous laws.
//! - [`sim`]: the random-CPT Monte Carlo comparison of bounds with and without
//!   the diagram.
//! - [`cli`]: the `pns` command-line front end.

pub mod bounds;
pub mod cli;
pub mod graph;
pub mod oracle;
pub mod presets;
pub mod problem;
pub mod rng;
pub mod sim;
pub mod tables;

pub use bounds::{BoundReport, BoundsError, Estimand, EstimandSpec, Interval, Method, Term};
pub use graph::{CausalDiagram, Criterion, Eligibility, GraphError};
pub use tables::{ExperimentalTable, JointXY, MediatorTables, ObservationalTable, TableError};
