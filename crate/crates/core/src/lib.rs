//! Dispatchable-region computation for radial distribution networks.

pub mod adcg;
pub mod builder;
pub mod geometry;
pub mod netmodel;
pub mod oracle;
