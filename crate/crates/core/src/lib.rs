//! Star-field attitude classification from synthetic sky images.
//!
//! Pipeline: a star catalog ([`catalog`]) is mapped onto the unit sphere and
//! partitioned by spherical K-means ([`sphere`]); rendered camera frames and
//! their features ([`scene`]) are labelled with the cluster of their boresight
//! and classified by a three-branch network ([`net`]) trained and scored in
//! [`train`]. [`bench`] times inference, [`cli`] exposes all of it.

pub mod bench;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod net;
pub mod scene;
pub mod sphere;
pub mod train;

pub use error::{Error, Result};
