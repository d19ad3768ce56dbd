//! Dense tensors, CP / Tucker / rank-(L, L, 1) decompositions, and the
//! common-versus-individual feature split built on them.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the usual `f64` choice.
//!
//! ```
//! use blockterm::{ll1_nn, DecompConfig, Tensor, outer_product};
//!
//! let t: Tensor = outer_product(&[vec![1.0, 2.0], vec![0.5, 1.0, 0.0], vec![1.0, 4.0, 8.0]]).unwrap();
//! let fit = ll1_nn(&t, &[1], &DecompConfig::default()).unwrap();
//! assert!(fit.trace.final_fit() < 1e-8);
//! ```

pub mod classify;
pub mod dataset;
pub mod decomp;
pub mod dtf1;
pub mod error;
pub mod features;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use decomp::{
    cpd_als, cpd_als_best, fit_error, hosvd, ll1_nn, ll1_nn_best, reconstruct, BlockTerm, DecompConfig, Diagnostic,
    FitTrace, Fitted, Init, KruskalFactors, LL1Factors, Reconstruct, TuckerFactors,
};
pub use error::{Error, Result};
pub use features::{build_feature_bank, split_features, CommonFeatureBank, FeatureSplit, SubsetRule};
pub use scalar::Scalar;
pub use tensor::{outer_product, DenseTensor, Matrix};

pub type Tensor = DenseTensor<f64>;
pub type Mat = Matrix<f64>;
pub type Tensor32 = DenseTensor<f32>;
pub type Mat32 = Matrix<f32>;
