//! Pair classifiers: Gaussian-mixture thresholding of matrix estimates, a
//! linear max-margin separator and a small 1-D convolutional network.

pub mod cnn;
pub mod gmm;
pub mod svm;
mod training_set;

pub use self::cnn::{cnn_train, gradient_check, ConvNetArch, ConvNetModel, EpochLog, TrainHyper, TrainingMeta};
pub use self::gmm::{gmm_fit, gmm_fit_classify, GaussianMixture1D, GmmFit};
pub use self::svm::{svm_train, LinearSeparator, SvmParams};
pub use self::training_set::{Provenance, TrainingSet};
