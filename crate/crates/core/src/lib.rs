//! Node-centric latent-radius models for spatial networks.
//!
//! Each node carries a latent positive *radius* describing its spatial
//! reach; a pair links with probability σ((r_i + r_j − D_ij)/α + …). The
//! crate provides the graph model and diagnostics ([`graph`]), likelihood
//! and priors ([`model`]), Metropolis-within-Gibbs inference ([`sampler`]),
//! link prediction with baselines ([`predict`]), community detection under
//! spatial null models ([`community`]) and synthetic generation ([`synth`]).

pub mod community;
pub mod config;
pub mod error;
pub mod graph;
pub mod model;
pub mod predict;
pub mod rng;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
