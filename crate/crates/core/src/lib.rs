//! Certifiers, Picard-orbit diagnostics and exact counterexample
//! constructions for contractive-type fixed point conditions on metric
//! spaces.
//!
//! The crate is organized bottom-up:
//!
//! * [`scalar`]: exact rationals and floats behind one comparison-policy type
//! * [`space`] and [`map`]: metric spaces, points, self-maps, axiom checks
//! * [`conditions`]: the condition menu, `theta`, certification
//! * [`orbit`]: Picard iteration and finite-horizon sequential diagnostics
//! * [`gallery`]: exact reconstructions of the two extremal constructions
//! * [`enumerator`]: brute force over all self-maps of small finite spaces
//! * [`cli`]: the `fixlab` command-line front end

pub mod cli;
pub mod conditions;
pub mod enumerator;
pub mod error;
pub mod gallery;
pub mod map;
pub mod orbit;
pub mod scalar;
pub mod space;

pub use conditions::{
    certify, implication_expected, minimal_lipschitz, theta, Certificate, ConditionKind, Scope,
    TestFunction, Verdict,
};
pub use error::{Error, Result};
pub use map::SelfMap;
pub use scalar::{Policy, Scalar};
pub use space::{verify_metric_axioms, AxiomReport, MetricSpace, Point};
