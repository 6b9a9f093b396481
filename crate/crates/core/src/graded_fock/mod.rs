//! Graded bases of the supported models and construction of [`Model`].

mod automorphism;
mod basis;
pub(crate) mod lattice;
mod model;
mod persist;
mod spec;
mod state;
mod virasoro;

pub use automorphism::{automorphism_matrices, Automorphism, AutomorphismKind, Phased, PhasedVector};
pub use basis::{enumerate_basis, partitions, BasisState, Factor, GradedBasis};
pub use model::{build_model, build_model_with, Generator, GeneratorKind, Model, Mutation};
pub use persist::{load_model, save_model, ModelCache, ModelContainer, MODEL_SCHEMA};
pub use spec::{ModelKind, ModelSpec};
pub use state::StateVector;
pub use virasoro::VermaQuotient;

/// The conformal vector `ν` of a model.
pub fn conformal_state(model: &Model) -> StateVector {
    model.conformal_state().clone()
}
