// `!(x > 0.0)`-style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crf;
pub mod error;
pub mod frame;
pub mod geomfeat;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod noisemap;
pub mod synth;
pub mod tofsim;

pub use error::{Error, Result};
pub use frame::{DepthFrame, FourPhaseFrame, Plane};
pub use grid::Grid;
