//! Achievable-performance assessment and tuning of PID-restricted
//! single loops and PI/P cascades.
//!
//! * [`lti`]: transfer functions and the truncated series algebra.
//! * [`single`], [`cascade`]: minimum output variance objectives.
//! * [`tlbo`]: the population optimizer that minimizes them.
//! * [`tuning`]: IAE plus weighted variance tuning and step simulation.
//! * [`mc`]: Monte-Carlo cross-check of the analytic variances.
//! * [`bench`]: embedded benchmark problems and reference results.

pub mod bench;
pub mod cascade;
pub mod error;
pub mod loops;
pub mod lti;
pub mod mc;
pub mod report;
pub mod single;
pub mod tlbo;
pub mod tuning;

pub use cascade::{
    assess_cascade, cascade_impulse, cascade_objective, cascade_variance, CascadeParams,
    CascadeProblem,
};
pub use error::{Error, Result};
pub use lti::{series_mul, series_solve, DiscreteTransferFunction, ImpulseSeq, SeqKind};
pub use report::AssessmentReport;
pub use single::{
    assess_single, closed_loop_impulse, cpa_objective, mv_benchmark, output_variance, PidGains,
    ReducedPidParams, SingleLoopProblem,
};
pub use tlbo::{minimize, OptResult, TlboConfig};
