pub mod cells;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod optim;
pub mod tasks;
pub mod tensor;

pub use cells::{CellConfig, CellKind, CellParams, CellState};
pub use error::{Error, Result};
pub use tensor::{Gradient, Tape, Tensor, Var};
