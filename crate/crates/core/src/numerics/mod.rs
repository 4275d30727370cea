//! Small self-contained numerical kernels.

pub mod fit;
pub mod lbfgs;
pub mod lp;
pub mod ode;
pub mod quad;
pub mod roots;
