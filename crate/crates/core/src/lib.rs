//! Electron-density-conditioned 3D molecule generation.
//!
//! The pipeline runs molecule → calculated electron density → labeled point
//! cloud → fragment-SMILES token sequence with discretized geometry →
//! decoder-only transformer → constrained autoregressive generation →
//! fingerprint similarity metrics.

pub mod chem;
pub mod geom;
pub mod density;
pub mod fsmiles;
pub mod encoding;
pub mod model;
pub mod generate;
pub mod metrics;

// Guide chapters, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/fragments.md")]
    mod fragments {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
