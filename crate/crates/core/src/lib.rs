//! Human-in-the-loop correction of generated images.
//!
//! A session generates an image from a prompt, lets a person mark the
//! region that came out wrong, rewrites the description of that region
//! into a focused prompt, regenerates only the marked region, and scores
//! the before and after images against the original prompt.
//!
//! Every external model (text-to-image, segmentation, inpainting, language
//! model, embedder) sits behind a trait with a deterministic offline
//! implementation and an HTTP adapter.

pub mod backends;
pub mod codec;
pub mod model;
pub mod orchestrator;
pub mod refinement;
pub mod remote;
pub mod scoring;
pub mod segmentation;
pub mod store;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/masks.md")]
    mod masks {}
    #[doc = include_str!("../../../book/src/inpainting.md")]
    mod inpainting {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/orchestrator.md")]
    mod orchestrator {}
    #[doc = include_str!("../../../book/src/backends.md")]
    mod backends {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
}
