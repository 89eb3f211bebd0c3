//! QoS-aware recommendation simulator and QoE modeling toolkit.
//!
//! The pipeline: build a synthetic catalog and the cache of high-QoS videos
//! ([`catalog`]), rank related videos with or without nudging toward cached
//! items ([`recommender`]), simulate rated user sessions ([`simulator`]),
//! then analyse the ratings ([`qoemodel`], [`stats`]) and write reports
//! ([`dataio`]).

pub mod catalog;
pub mod dataio;
pub mod qoemodel;
pub mod rating;
pub mod recommender;
pub mod seed;
pub mod simulator;
pub mod stats;
