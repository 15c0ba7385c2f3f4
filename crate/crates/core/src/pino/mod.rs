//! Fourier-spectral neural operator with hand-written reverse-mode
//! gradients, the four-term physics-informed objective, gradient-norm
//! balancing and the training loop.

pub mod arch;
pub mod checkpoint;
pub mod gradnorm;
pub mod loss;
pub mod model;
pub mod prepare;
pub mod spectral;
pub mod train;

pub use arch::{ArchConfig, Layout};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradnorm::{gradnorm_update, LossWeights};
pub use loss::{eval_batch, evaluate_rlse, rlse, LossFlags, RlseReport, RlseValues, TermValues};
pub use model::{init_model, ForwardCache, OperatorModel};
pub use prepare::{io_dims, prepare, window_indices, Prepared, PreparedPair};
pub use spectral::{SpectralOps, SpectralScratch};
pub use train::{predict, report_to_csv, train, ArchHyper, EpochRow, GradNormConfig, TrainConfig, TrainReport};
