//! Exact simulation and exhaustive optimization of quantum search built
//! from global and rescaled (partial) diffusion operators.
//!
//! The library has two interchangeable backends: a 3-dimensional reduced
//! model ([`reduced`]) that evaluates any global/local operator sequence as
//! a fold of 3x3 orthogonal matrices, and a brute-force 2^n state-vector
//! simulator ([`statevector`]) that serves as its independent check. On top
//! of them sit an exhaustive sequence optimizer ([`optimizer`]) and the
//! mid-circuit-measurement protocols ([`twostage`]), including Monte-Carlo
//! end-to-end runs with a classical verification loop.
//!
//! With the default `parallel` feature the optimizer scans and shot
//! sampling run on rayon; `*_serial` reference implementations are always
//! compiled and return bit-identical results.

#![forbid(unsafe_code)]

pub mod error;
pub mod optimizer;
pub mod params;
pub mod reduced;
pub mod sequence;
pub mod statevector;
pub mod twostage;

pub use error::{Error, Result};
pub use params::{SearchParams, DEFAULT_N_CAP};
pub use sequence::{OperatorSequence, Step};

/// Pin the rayon thread pool size. Returns false when the pool was already
/// initialized or the crate was built without the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn configure_thread_pool(threads: usize) -> bool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .is_ok()
}

#[cfg(not(feature = "parallel"))]
pub fn configure_thread_pool(_threads: usize) -> bool {
    false
}
