//! Numerical building blocks shared across modules.

pub mod dd;
pub mod quad;
pub mod special;
pub mod sum;

pub use dd::Dd;
pub use quad::{integrate, integrate_with_breaks, QuadOptions, QuadResult};
pub use sum::{neumaier_sum, NeumaierSum};
