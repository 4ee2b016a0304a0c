//! Numerical building blocks shared by the geometric modules.

pub mod par;
pub mod quadrature;
pub mod roots;
pub mod spline;
