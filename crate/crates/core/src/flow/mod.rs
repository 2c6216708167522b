//! Desk-scale flow-matching model: velocity network, objectives, time
//! sampling, optimizer, synthetic data, training loop and samplers.

pub mod data;
pub mod loss;
pub mod network;
pub mod optim;
pub mod sampler;
pub mod schedule;
pub mod train;

pub use data::SyntheticDataset;
pub use loss::{loss_and_grad, FlowSample};
pub use network::{FieldShape, LossKind, VelocityField};
pub use sampler::{sample, SampleRun, Sampler, VelocityModel};
pub use schedule::{sample_time, shift_time, TimeSampling};
pub use train::{train, TrainConfig, TrainReport};
