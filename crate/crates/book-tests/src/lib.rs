//! Binds every chapter of the guide into rustdoc, so `cargo test --doc`
//! compiles and runs each of the book's Rust snippets. One module per
//! chapter keeps a failing doctest traceable to its source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/transforms.md")]
pub mod transforms {}

#[doc = include_str!("../../../book/src/blocks.md")]
pub mod blocks {}

#[doc = include_str!("../../../book/src/engine.md")]
pub mod engine {}

#[doc = include_str!("../../../book/src/distribution.md")]
pub mod distribution {}

#[doc = include_str!("../../../book/src/performance.md")]
pub mod performance {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
