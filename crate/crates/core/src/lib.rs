//! Intent extraction, structuring and fulfilment for a 5G core network.

pub mod canonical;
pub mod corpus;
pub mod context;
pub mod execution;
pub mod extraction;
pub mod ids;
pub mod model;
pub mod time;
pub mod transform;
