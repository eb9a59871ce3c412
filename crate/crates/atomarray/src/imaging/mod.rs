//! Site-resolved imaging analysis: lossy-Poisson count statistics, histogram
//! fits, the three-image fidelity estimator, and pixel weight-kernel
//! optimization.

pub mod fit;
pub mod kernel;
pub mod model;
pub mod threeimage;

pub use fit::{fit_histogram, fit_lifetime, fit_per_image, DecayFit, HistogramFit};
pub use kernel::{optimize_kernel, simulate_pixel_stacks, KernelChoice, PixelStack, WeightKernel};
pub use model::{
    branch_fidelities, optimal_threshold, sample_photons, HistogramModel, PhotonPdf, Threshold,
};
pub use threeimage::{
    predict_bitstring_probs, simulate_bitstrings, three_image_estimate, ThreeImageEstimate,
};
