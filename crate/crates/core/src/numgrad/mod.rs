//! Reverse-mode automatic differentiation over dense `f64` tensors, plus the
//! optimizer and learning-rate schedule used by the trainer.

mod erf;
mod gradcheck;
mod optim;
mod softrank;
mod tape;
mod tensor;

pub use erf::{erf, erf_derivative, normal_cdf, normal_pdf, TWO_OVER_SQRT_PI};
pub use gradcheck::{finite_difference_check, finite_difference_check_many};
pub use optim::{adam_step, cosine_annealing_lr, AdamState};
pub use softrank::{soft_rank_backward, soft_rank_values};
pub use tape::{concat, Gradients, Tape, Var};
pub use tensor::Tensor;
