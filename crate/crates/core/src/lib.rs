pub mod contraction;
pub mod correlations;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod linalg;
pub mod mps;
pub mod optimizer;
pub mod rowdmrg;
pub mod scalar;
pub mod sgs;
pub mod statevec;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tensor::{contract, DenseTensor};

/// Double-precision tensor.
pub type Tensor = DenseTensor<f64>;
/// Single-precision tensor.
pub type Tensor32 = DenseTensor<f32>;
/// Double-precision SGS.
pub type State = sgs::SgsState<f64>;
/// Single-precision SGS.
pub type State32 = sgs::SgsState<f32>;
/// Double-precision row MPS.
pub type Row = mps::MPSRow<f64>;
/// Single-precision row MPS.
pub type Row32 = mps::MPSRow<f32>;
/// Double-precision Hamiltonian.
pub type Ham = lattice::Hamiltonian<f64>;
/// Single-precision Hamiltonian.
pub type Ham32 = lattice::Hamiltonian<f32>;
