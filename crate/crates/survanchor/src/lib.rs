//! Survival model embedding analysis: Cox-style MLP training with Breslow
//! baselines, directional mixture clustering of learned embeddings, anchor
//! projections with association statistics, and deterministic figure output.

pub mod anchors;
pub mod assoc;
pub mod cli;
pub mod clusterlib;
pub mod config;
pub mod coxnet;
pub mod data;
pub mod special;
pub mod survstats;
pub mod visualize;
