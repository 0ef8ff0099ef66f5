//! ECG scalogram classification: signal preprocessing, continuous wavelet transform
//! scalograms, a small CNN engine, transfer-style ensemble members and stratified
//! cross-validation.

pub mod cli;
pub mod cwt;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod imaging;
pub mod io;
pub mod models;
pub mod nn;
pub mod synth;

pub use dataset::{ClassLabel, DatasetManifest, Signal};
pub use error::{Error, Result};
pub use imaging::RgbImage;
