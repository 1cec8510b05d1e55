//! Mutual-information feature selection, RRw feature weighting and
//! autoencoder reduction for binary malware-traffic detection.

pub mod dataset;
pub mod infotheory;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod ranking;
pub mod rrw;
pub mod selection;
pub mod synthetic;
