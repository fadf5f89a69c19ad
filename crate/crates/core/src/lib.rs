//! Subsolution construction for the exterior Dirichlet problem of Hessian
//! quotient equations `σ_k(λ(D²u)) / σ_l(λ(D²u)) = 1`.

pub mod admissibility;
pub mod boundary;
pub mod exterior;
pub mod numeric;
pub mod profile;
pub mod scalar;
pub mod spectra;
pub mod subsolution;
pub mod symfunc;
