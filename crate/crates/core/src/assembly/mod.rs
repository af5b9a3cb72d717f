//! One-dimensional temporal and spatial finite element matrices, traces and
//! data vectors from which the space-time operators are composed.

pub mod basis;
pub mod load;
pub mod space;
pub mod time;

pub use basis::{eval_local, CellGeometry, SpaceBasisSpec, SpaceDofs};
pub use load::{l2_projection, load_vector_f, load_vector_space};
pub use space::{space_mass, space_mixed, space_pair, space_stiffness};
pub use time::{
    time_derivative_mixed, time_mass_mixed, time_mass_trial, time_stiffness_trial, time_test_gram,
    test_function, trace_vector, TimeBasisSpec,
};
