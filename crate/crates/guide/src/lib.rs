//! The chapters of the book in `book/src`, one module each, so that
//! `cargo test -p surfgraph-guide --doc` runs every code block in them.
//! Nothing here is meant to be used as a library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/height-fields.md")]
pub mod height_fields {}

#[doc = include_str!("../../../book/src/surfaces.md")]
pub mod surfaces {}

#[doc = include_str!("../../../book/src/horizon-bands.md")]
pub mod horizon_bands {}

#[doc = include_str!("../../../book/src/layout.md")]
pub mod layout {}

#[doc = include_str!("../../../book/src/export.md")]
pub mod export {}

#[doc = include_str!("../../../book/src/study.md")]
pub mod study {}

#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
