//! Desk-scale computational number theory for rational points near manifolds.
//!
//! A compact piece of a manifold `M ⊂ R^{n+R}` is described in graph form: a
//! box `B̄_ε0(x0) ⊂ R^n` of base coordinates together with `R` smooth maps
//! `f_1, …, f_R`, so that `M = {(x, f_1(x), …, f_R(x))}`. For a denominator
//! bound `Q` and a proximity parameter `δ`, the central quantity is the number
//! of rationals `(a/q, q ≤ Q)` in the base box whose image lies within `δ/q`
//! of the integer lattice in every graph coordinate:
//!
//! ```text
//! N(Q, δ) = #{ (a, q) : 1 ≤ q ≤ Q,  a/q ∈ B̄_ε0(x0),  ‖q·f_r(a/q)‖ ≤ δ  for all r }
//! ```
//!
//! where `‖·‖` is the distance to the nearest integer. When the manifold is
//! genuinely curved — no linear combination of the `f_r` has a degenerate
//! Hessian — this count is governed by the heuristic `(2δ)^R · σ Q^{n+1}`,
//! and the toolkit exists to compute both sides of that comparison honestly:
//!
//! - [`funcspace`] — exact expression trees for the maps `f_r`, symbolic
//!   differentiation, compactly supported smooth weights, and chart
//!   configuration files;
//! - [`curvature`] — certified nondegeneracy sweeps over the pencil
//!   `t_1 f_1 + ⋯ + t_R f_R` and localization radii for later stages;
//! - [`kernels`] — Selberg majorant/minorant pairs and the Fejér kernel, the
//!   trigonometric envelopes that convert counting into exponential sums;
//! - [`legendre`] — numerical Legendre transforms of chart maps, used where
//!   stationary-phase analysis needs the dual function;
//! - [`oscillatory`] — quadrature and leading-order evaluation of the
//!   oscillatory integrals produced by the kernel expansion;
//! - [`counting`] — the lattice enumerators themselves, exact where the maps
//!   are polynomial-rational, guarded floating point elsewhere;
//! - [`matfam`] — integer matrix families (iterated anti-commuting blocks,
//!   complex-to-real doublings) that generate charts with extremal curvature
//!   properties in higher codimension;
//! - [`harness`] — experiment configs, ladder runs over `Q`, persisted run
//!   records, and envelope fits against the expected error profile.
//!
//! Numerical conventions used throughout: boxes are closed and use the `L∞`
//! metric; `e(z)` abbreviates `exp(2πiz)`; floating-point comparisons near a
//! decision boundary fall back to exact rational arithmetic whenever the
//! chart is polynomial with rational coefficients.

pub mod curvature;
pub mod counting;
pub mod expr;
pub mod funcspace;
pub mod harness;
pub mod kernels;
pub mod legendre;
pub mod linalg;
pub mod matfam;
pub mod numerics;
pub mod oscillatory;

pub mod guide;

use std::fmt;

/// Unified error type for the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Expression text failed to parse; payload says where and why.
    Parse(String),
    /// An expression referenced a coordinate outside the chart arity.
    Arity { expected: usize, found: usize },
    /// Exact rational evaluation requested on a non-polynomial operation.
    NotExact(String),
    /// A parameter was outside its documented domain.
    Domain(String),
    /// The nondegeneracy sweep rejected the chart; carries min |det|.
    CurvatureRefused { c1: f64, tolerance: f64 },
    /// Newton iteration failed to invert a gradient.
    NotInvertible(String),
    /// A matrix was too ill-conditioned to invert reliably.
    IllConditioned { cond: f64 },
    /// A quadrature or enumeration exceeded its node/point budget.
    BudgetExceeded { needed: u64, budget: u64 },
    /// Configuration file problems (I/O, format, missing fields).
    Config(String),
    /// Persistence I/O failure.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse(m) => write!(f, "parse error: {m}"),
            Error::Arity { expected, found } => {
                write!(f, "arity mismatch: chart has {expected} coordinates, expression uses x{found}")
            }
            Error::NotExact(m) => write!(f, "exact evaluation unavailable: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::CurvatureRefused { c1, tolerance } => {
                write!(f, "curvature condition refused: min |det| = {c1:.3e} below tolerance {tolerance:.3e}")
            }
            Error::NotInvertible(m) => write!(f, "gradient inversion failed: {m}"),
            Error::IllConditioned { cond } => {
                write!(f, "matrix too ill-conditioned (cond ≈ {cond:.3e})")
            }
            Error::BudgetExceeded { needed, budget } => {
                write!(f, "budget exceeded: needed {needed}, budget {budget}")
            }
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
