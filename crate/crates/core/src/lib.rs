//! Desk-scale relighting toolkit.
//!
//! The crate covers the full data and evaluation pipeline of a
//! token-conditioned image relighter:
//!
//! * [`render`]: a deterministic direct-lighting renderer producing one
//!   linear-RGB image per light component,
//! * [`simlight`]: Sim(3) placement of a canonical camera/light rig with
//!   render invariance,
//! * [`compositor`]: paired training data synthesized by linear
//!   compositing and Reinhard tone mapping,
//! * [`tokenizer`]: Gaussian Fourier feature tokens for lighting edits,
//! * [`flowmatch`]: a small conditional flow-matching network with
//!   classifier-free guidance,
//! * [`envmap`]: point-light → environment-map surrogates (PanoGT),
//! * [`metrics`]: the confusion-matrix precision protocol, masked PSNR and
//!   SSIM.
//!
//! The guide in `book/` walks through each piece; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod compositor;
pub mod dataset;
pub mod envmap;
mod error;
pub mod flowmatch;
pub mod image;
pub mod io;
pub mod math;
pub mod metrics;
pub mod presets;
pub mod render;
pub mod rng;
pub mod scene;
pub mod simlight;
pub mod tokenizer;
pub mod toy;

pub use error::{Error, Result};
pub use image::{DisplayImage, Image, LinearImage, Mask};
pub use math::{Mat3, Vec3};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/placement.md")]
    mod placement {}
    #[doc = include_str!("../../../book/src/pairs.md")]
    mod pairs {}
    #[doc = include_str!("../../../book/src/tokens.md")]
    mod tokens {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/panogt.md")]
    mod panogt {}
    #[doc = include_str!("../../../book/src/precision.md")]
    mod precision {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
