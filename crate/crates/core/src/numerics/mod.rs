//! Dense linear algebra, seeded randomness, SGD and the gradient oracle.

mod gradcheck;
mod optim;
pub(crate) mod rng;
mod tensor;

pub use gradcheck::{finite_diff_grad, relative_error};
pub use optim::SgdState;
pub use rng::{gaussian_draw, RngStream};
pub use tensor::{matmul, softmax, Tensor1, Tensor2};
pub(crate) use tensor::softmax_row;
