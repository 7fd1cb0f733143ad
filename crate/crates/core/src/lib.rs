//! Numerical solver and estimate checks for the fully nonlinear equation
//!
//! ```text
//! u_tt (Δu - b|∇u|² + a(x)) - |∇u_t|² = f,    u(·,0) = u0,  u(·,1) = u1
//! ```
//!
//! on flat tori `T^1`, `T^2` crossed with `t ∈ [0, 1]`, together with the
//! cone algebra (`σ_k`, Newton transformations, `F_k`/`G_k`) used to probe
//! concavity of the related operators.

pub mod linalg;
pub mod mesh;
pub mod operator;
pub mod solver;
pub mod estimates;
pub mod symcone;
