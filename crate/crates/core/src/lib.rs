//! Wiener chaos solutions of stochastic parabolic equations of full second order.
//!
//! The equation
//!
//! ```text
//! du = (a u_xx + b u_x + c u + f) dt + (rho u_xx + sigma u_x + nu u + g) dW,   u(0) = v
//! ```
//!
//! has no square-integrable solution once `rho` is large relative to `a`.
//! Its chaos coefficients `u_alpha` are still well defined: they solve a
//! lower-triangular system of deterministic parabolic equations (the
//! propagator), and the formal series `sum u_alpha xi_alpha` is summable in
//! the weighted spaces with weights `2^{p|alpha|} N^{2 q alpha} / |alpha|!`.
//!
//! Modules:
//!
//! - [`multiindex`]: multi-indices, factorials, weights and truncated index sets.
//! - [`cm_basis`]: cosine basis on `(0, T)`, Hermite polynomials, `xi_alpha`.
//! - [`chaos_space`]: chaos series, weighted norms, the S-transform.
//! - [`parabolic1d`]: grids, the drift/diffusion operators, Crank-Nicolson stepping.
//! - [`propagator`]: the propagator system in physical space and per Fourier mode.
//! - [`oracles`]: closed forms, quadrature and Monte Carlo ground truth.
//! - [`suites`]: the verification suites run by the CLI and the acceptance tests.

pub mod chaos_space;
pub mod cm_basis;
mod error;
pub mod multiindex;
pub mod oracles;
pub mod parabolic1d;
pub mod propagator;
pub mod suites;

pub use error::{Error, Result};
