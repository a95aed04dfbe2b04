//! The long-form guide, one module per chapter of the book in `book/`.
//!
//! Each chapter is included verbatim, so the book's code blocks compile
//! and run under `cargo test --doc` — the rendered book and the library
//! cannot drift apart silently. Build the standalone book with
//! `mdbook build book/`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/charts.md")]
pub mod charts {}

#[doc = include_str!("../../../book/src/curvature.md")]
pub mod curvature_certificate {}

#[doc = include_str!("../../../book/src/kernels.md")]
pub mod extremal_kernels {}

#[doc = include_str!("../../../book/src/legendre.md")]
pub mod legendre_transforms {}

#[doc = include_str!("../../../book/src/oscillatory.md")]
pub mod oscillatory_integrals {}

#[doc = include_str!("../../../book/src/counting.md")]
pub mod counting_points {}

#[doc = include_str!("../../../book/src/families.md")]
pub mod matrix_families {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod command_line {}
