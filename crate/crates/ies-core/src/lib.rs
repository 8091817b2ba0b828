//! Core library for a grid-connected power-and-cooling integrated energy
//! system: ground-truth plant simulator, scenario generation, excitation
//! datasets, time-series neural surrogates and the physics-informed hybrid
//! networks built from them.

pub mod dataset;
pub mod hybrid;
pub mod linalg;
pub mod mlp;
pub mod model_io;
pub mod names;
pub mod pipeline;
pub mod plant;
pub mod prms;
pub mod scale;
pub mod scenario;
pub mod train;

pub use names::{TimeScale, UnitId};
