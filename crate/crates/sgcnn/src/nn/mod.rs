//! Minimal numerical core: activations, softmax cross-entropy, the parameter
//! store with reverse-mode gradient buffers, and optimizers. Everything runs
//! in 64-bit precision.

pub mod activation;
pub mod loss;
pub mod optim;
pub mod params;

pub use activation::ActivationKind;
pub use loss::softmax_cross_entropy;
pub use optim::{Optimizer, OptimizerKind, TrainConfig};
pub use params::{Gradients, ParameterStore, Tensor};

/// Derive a labeled child seed from a root seed. All randomness in the crate
/// flows from one root seed through this function; the derivation is FNV-1a
/// over the tag bytes and the little-endian encoding of each part, mixed into
/// the root.
pub fn derive_seed(root: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = crate::embedding::FNV_OFFSET ^ root;
    let mut absorb = |byte: u8| {
        h ^= u64::from(byte);
        h = h.wrapping_mul(crate::embedding::FNV_PRIME);
    };
    for b in tag.bytes() {
        absorb(b);
    }
    for part in parts {
        for b in part.to_le_bytes() {
            absorb(b);
        }
    }
    h
}
