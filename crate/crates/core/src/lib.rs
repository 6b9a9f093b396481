//! Exact truncated vertex operator algebras: graded bases, mode matrices,
//! invariant forms, graded operator norms and energy-bound certificates.

pub mod axioms;
pub mod certify;
pub mod config;
pub mod error;
pub mod graded_fock;
pub mod linalg;
pub mod mode_engine;
pub mod norms;
pub mod rational;
pub mod suite;
pub mod unitary;

pub use config::SuiteConfig;
pub use error::{Result, VoaError};
pub use graded_fock::{
    automorphism_matrices, build_model, build_model_with, conformal_state, enumerate_basis, Automorphism,
    AutomorphismKind, BasisState, Factor, GradedBasis, Model, ModelCache, ModelKind, ModelSpec, Mutation, StateVector,
};
pub use linalg::{QMat, QVec};
pub use mode_engine::{Convention, ModeMatrix, Residual};
pub use rational::Q;
pub use suite::{export_report, run_certification_suite, ExportFormat, ReportBundle};
