//! Compiles the code listings of the guide as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/data.md")]
mod data {}
#[doc = include_str!("../../../book/src/metrics.md")]
mod metrics {}
#[doc = include_str!("../../../book/src/significance.md")]
mod significance {}
#[doc = include_str!("../../../book/src/synthetic.md")]
mod synthetic {}
#[doc = include_str!("../../../book/src/transforms.md")]
mod transforms {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
