//! Compressive clustering from random Fourier feature sketches.
//!
//! A dataset is summarized by the mean of its random Fourier features
//! ([`sketch::sketch_dataset`]); cluster centers are then decoded from that
//! sketch alone, either with CL-OMPR ([`decoders::clompr`]) or with a greedy
//! decoder driven by sketched mean shift ([`decoders::proposed_decoder`]).
//! [`baselines`] provides Lloyd's algorithm and the MSE / RSE metrics used to
//! score decoders, [`datagen`] synthetic Gaussian mixtures, and
//! [`experiment`] the sweep engine behind the `cskit` command-line tool.

// `!(a > b)` is used on purpose where NaN must take the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod correlation;
pub mod data;
pub mod datagen;
pub mod decoders;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod sketch;
mod trig;

pub use data::Dataset;
pub use error::{Error, Result};
pub use sketch::{FrequencyMatrix, Sketch};
