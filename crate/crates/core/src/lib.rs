//! Orthogonally decomposable (odeco) tensors.
//!
//! The crate covers the full pipeline around odeco tensors
//! `T = Σ_k λ_k u_k^(1) ⊗ … ⊗ u_k^(p)` with orthonormal factor columns:
//!
//! * [`tensor`]: dense storage, contractions, matricization, Khatri–Rao.
//! * [`norm`]: multi-start estimation of the tensor spectral norm.
//! * [`odeco`]: the odeco type, dense realization, and closed-form
//!   enumeration of all singular tuples (essential and nonessential).
//! * [`decompose`]: recovery by gradient iteration with deflation, and HOSVD.
//! * [`perturb`]: matching two decompositions and checking the first- and
//!   second-order perturbation bounds for singular values and vectors.
//! * [`incoherent`]: near-orthogonal CP tensors, polar projection onto the
//!   odeco set, and the robust version of the perturbation bounds.
//! * [`experiments`]: seeded simulation studies behind the `odeco` binary.

// Negated float comparisons are deliberate: `!(x > 0.0)` also rejects NaN.
// Index loops mirror the index notation of the formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decompose;
pub mod error;
pub mod experiments;
pub mod incoherent;
pub mod linalg;
pub mod norm;
pub mod odeco;
pub mod perturb;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::{dense_svd, Matrix, Svd};
pub use odeco::{OdecoTensor, SingularTuple};
pub use tensor::{khatri_rao, DenseTensor, Rank1Point};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic sub-seed for trial `index` of a computation seeded by `seed`
/// (SplitMix64 finalizer over the pair). Parallel trials use this so results
/// do not depend on scheduling.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
