//! Locality-sensitive robustness metrics for pixel attributions.
//!
//! Classical top-k intersection treats an attribution map as a bag of
//! isolated pixels: shift every salient pixel one step sideways and the
//! intersection collapses to zero even though a human would call the two
//! explanations identical. The metrics in this crate score a pixel as
//! "kept" when it lands anywhere inside a small window around the other
//! map's top-k set, which makes robustness claims about attribution
//! methods far less brittle.
//!
//! The crate also ships everything needed to exercise the metrics end to
//! end: a tiny fully-connected classifier with manual backpropagation
//! ([`model`]), gradient-based attribution methods ([`attribution`]),
//! attacks that perturb an input to disturb its attribution while keeping
//! the prediction fixed ([`attack`]), a greedy diverse variant of top-k
//! selection ([`diversity`]), plain-text file formats ([`io`]), and a
//! deterministic glyph dataset generator ([`dataset`]).

pub mod attack;
pub mod attribution;
pub mod dataset;
pub mod diversity;
pub mod error;
pub mod io;
pub mod map;
pub mod metrics;
pub mod model;

pub use error::CoreError;
pub use map::{AttributionMap, ImageTensor, PixelCoord, PixelSet};
