mod conv;
mod elementwise;
mod graphmix;
mod loss;
mod matmul;
mod norm;
mod reduce;
mod shape;

pub use norm::RunningStats;

pub(crate) use reduce::axis_strides;
