//! Every chapter of the guide, so `cargo test` runs its code samples.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/bandit.md")]
pub mod bandit {}

#[doc = include_str!("../../../book/src/ensemble.md")]
pub mod ensemble {}

#[doc = include_str!("../../../book/src/exceedance.md")]
pub mod exceedance {}

#[doc = include_str!("../../../book/src/brownian.md")]
pub mod brownian {}

#[doc = include_str!("../../../book/src/lower_bound.md")]
pub mod lower_bound {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
