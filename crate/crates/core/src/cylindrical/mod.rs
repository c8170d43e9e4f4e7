//! Smooth cylindrical random variables `F = Σ_j f_j(W(h_1), …, W(h_n)) ⊗ x_j`.
//!
//! The functions `f_j` are expression trees differentiated by forward-mode
//! dual numbers. Polynomial variables convert exactly into the chaos algebra;
//! conditional expectations use Gaussian splitting with tensor Gauss-Hermite
//! quadrature.

mod conditional;
pub mod dual;
mod expr;
mod rv;

pub use conditional::{
    conditional_expectation, Conditional, ConditionalPlan, ConditionalSettings, McFallback, Method,
    DEFAULT_MC_SAMPLES, FUTURE_DIM_CAP,
};
pub use expr::{logistic, soft_clip, softplus, Expr, Growth, Polynomial, SmoothFunction};
pub use rv::{finite_difference_derivative, CompiledRV, CylindricalRV, CylindricalTerm, DerivativeRV, DerivativeTerm};

#[cfg(test)]
mod tests;
