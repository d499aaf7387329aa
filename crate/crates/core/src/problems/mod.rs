//! Built-in problems.

mod dahlquist;
mod gray_scott;
mod heat;
pub mod krylov;

pub use dahlquist::Dahlquist;
pub use gray_scott::{GrayScott, GrayScottSpec};
pub use heat::{Heat1D, Heat1DSpec};
