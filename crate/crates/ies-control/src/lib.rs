//! Decision layers: the ReLU-network day-ahead scheduler, the sequential
//! distributed economic MPC agents, and the linear-model baselines.

pub mod baselines;
pub mod nempc;
pub mod scheduler;
