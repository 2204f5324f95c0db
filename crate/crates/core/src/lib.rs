//! Analytics for social networks whose users carry a content-quality score.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only computation:
//! the temporal graph store, beauty scoring and its validation statistics,
//! network mixing metrics, matching-based causal experiments, link
//! recommendation, user clustering and a seeded synthetic data generator.
//! File formats and the command-line interface live in the `netquality`
//! crate.

#![no_std]

extern crate alloc;

pub mod clustering;
pub mod error;
pub mod graph;
pub mod matching;
pub mod metrics;
pub mod recommend;
pub mod scoring;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{
    week_of, FavoriteEvent, FollowEvent, GraphBuilder, GraphSnapshot, GroupEvent, GroupId, IngestWarning, PhotoEvent,
    PhotoId, TemporalGraph, UserId, Week,
};
