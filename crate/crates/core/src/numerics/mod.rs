//! Dense row-major tensors and tape-based reverse-mode differentiation.

mod attention;
mod gradcheck;
mod ops;
mod scalar;
mod tape;
mod tensor;

pub use attention::{attention, AttentionDropout};
pub use gradcheck::{central_differences, finite_diff_check, max_relative_error};
pub use ops::{batch_matmul, gelu, layer_norm, masked_softmax, matmul, softmax_rows};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub(crate) use tape::masked_residual as tape_masked_residual;
pub use tensor::Tensor;

/// SplitMix64 finalizer over the combined inputs.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
