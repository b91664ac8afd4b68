//! Small differentiable soft classifiers: a capacity ladder of tanh MLPs
//! with hand-written backpropagation, minibatch training with checkpoint
//! selection, finite-difference gradient checks and linear probes.

mod checkpoint;
mod gradcheck;
mod losses;
mod model;
mod probe;
mod train;

pub use checkpoint::{decode_model, encode_model, load_model, save_model};
pub use gradcheck::{batch_objective, gradient_check, GRAD_FLOOR};
pub use losses::{cross_entropy, cross_entropy_logit_grad, CrossEntropy, Objective, Progress, PROB_FLOOR};
pub use model::{hidden_width, init_model, Model, ModelConfig, HIDDEN_LAYERS, MAX_CAPACITY};
pub use probe::fit_linear_probe;
pub use train::{train, validation_split, EarlyStopMetric, EpochStats, LabeledData, TrainConfig, TrainResult};

