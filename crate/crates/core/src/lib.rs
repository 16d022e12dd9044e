//! Matrix functions, explicit ReLU approximations of the matrix exponential,
//! numeric token codecs and a small transformer stack for learning matrix
//! functions from data.

pub mod datagen;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod neural;
pub mod numcodec;
pub mod oracles;
pub mod relu;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use oracles::MatrixFunction;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/matrix-functions.md")]
    mod matrix_functions {}
    #[doc = include_str!("../../../book/src/relu-exponential.md")]
    mod relu_exponential {}
    #[doc = include_str!("../../../book/src/number-encodings.md")]
    mod number_encodings {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/accuracy.md")]
    mod accuracy {}
}
