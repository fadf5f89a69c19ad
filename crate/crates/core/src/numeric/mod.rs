//! General-purpose numerical building blocks.

pub mod fit;
pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod sampling;
