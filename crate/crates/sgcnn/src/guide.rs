//! Keeps the book's code snippets compiling: every chapter is attached here
//! as documentation so `cargo test` runs its examples as doc-tests.
#![allow(unused)]

#[doc = include_str!("../../../book/src/graphs.md")]
mod graphs {}

#[doc = include_str!("../../../book/src/embedding.md")]
mod embedding {}

#[doc = include_str!("../../../book/src/aggregation.md")]
mod aggregation {}

#[doc = include_str!("../../../book/src/convolution.md")]
mod convolution {}

#[doc = include_str!("../../../book/src/training.md")]
mod training {}

#[doc = include_str!("../../../book/src/dataset.md")]
mod dataset {}
