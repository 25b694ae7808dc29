//! Small numerical building blocks shared by the engines.

pub mod fit;
pub mod roots;
pub mod sum;

pub use fit::{least_squares_line, LineFit};
pub use roots::{bisect_newton, RootOptions};
pub use sum::{ComplexSum, NeumaierSum};
