//! Stochastic Volterra integral equations on `R^d`, solved as the boundary
//! value of a curve-valued first-order SPDE driven by the shift semigroup.

pub mod coefficients;
pub mod config;
pub mod error;
pub mod invariance;
pub mod noise;
pub mod output;
pub mod quadrature;
pub mod selftest;
pub mod solver;
pub mod space;
pub mod weight;
pub mod workflow;

pub use error::{Error, Result};
pub use space::{Curve, CurveOperator, Grid, GridMetric, HilbertPoint};
pub use weight::{AlphaW, WeightFunction};
pub use coefficients::{
    certify, CoefficientSet, Envelope, Envelopes, LipschitzReport, Verdict, VolterraKernels,
};
pub use noise::{JumpLaw, JumpPart, LevyModel, NoiseStream};
pub use solver::{
    picard_oracle, InitialCondition, PathOutput, Scenario, Solver, SolverConfig, SolverState,
    TruncationDiagnostics,
};
