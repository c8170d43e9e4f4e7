//! Numerical vector-valued Malliavin calculus.
//!
//! The crate works over the discretized isonormal process `W` on
//! `H = L^2(0,T; R^d)` and a finite-dimensional target space `E = R^m`
//! carrying an `l^p` norm. It provides
//!
//! * step functions, grids and seeded Brownian paths ([`time`]),
//! * gamma-radonifying norms, trace duality and operator-family constants ([`banach`]),
//! * an exact Wiener-chaos algebra used as an oracle ([`chaos`]),
//! * smooth cylindrical random variables with symbolic derivatives ([`cylindrical`]),
//! * Itô and Skorokhod integrals ([`integral`]),
//! * the adapted projection, Clark-Ocone integrands and hedging ([`clark_ocone`]),
//! * a config-driven experiment harness ([`harness`]).

pub mod banach;
pub mod chaos;
pub mod clark_ocone;
pub mod cylindrical;
pub mod error;
pub mod harness;
pub mod integral;
pub mod rng;
pub mod stats;
pub mod quadrature;
pub mod time;

pub use error::{Error, Result};
