//! Small dense complex linear algebra and hyperentangled state construction.

mod matrix;
mod noise;
mod state;

pub use matrix::ComplexMatrix;
pub use noise::{apply_noise, uniform_jitter_factor, NoiseModel};
pub use state::{
    basis_digits, basis_index, eigen_floor_check, fidelity, make_hyper_state, make_pol_bell, make_time_bell,
    random_density, random_product_state, random_pure_state, trace_distance, DensityOperator, StateVector, EIGEN_FLOOR,
    HERMITIAN_TOL, HYPER_DIM, NORM_TOL, TRACE_TOL,
};

pub type C64 = num_complex::Complex64;
