//! Guide chapters compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/ephemeris.md")]
pub mod ephemeris {}

#[doc = include_str!("../../../book/src/arm.md")]
pub mod arm {}

#[doc = include_str!("../../../book/src/tracker.md")]
pub mod tracker {}

#[doc = include_str!("../../../book/src/controller.md")]
pub mod controller {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
