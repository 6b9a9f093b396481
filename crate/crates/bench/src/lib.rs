//! Shared fixtures for the criterion benchmarks.

use voa_core::{build_model, Model, ModelSpec, Q};

pub fn heisenberg(n: usize) -> Model {
    build_model(&ModelSpec::heisenberg(1, n)).expect("valid spec")
}

pub fn virasoro(c: Q, n: usize) -> Model {
    build_model(&ModelSpec::virasoro(c, n)).expect("valid spec")
}

pub fn lattice(q: u32, n: usize) -> Model {
    build_model(&ModelSpec::lattice(q, n)).expect("valid spec")
}
