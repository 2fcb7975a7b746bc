//! The guide under `book/` compiled as one crate, a module per chapter, so
//! `cargo test` runs every listing as a doctest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/methods.md")]
pub mod methods {}

#[doc = include_str!("../../../book/src/compressors.md")]
pub mod compressors {}

#[doc = include_str!("../../../book/src/mixer.md")]
pub mod mixer {}

#[doc = include_str!("../../../book/src/selection.md")]
pub mod selection {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}

#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}
