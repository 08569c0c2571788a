//! Shared fixtures for the pipeline benchmarks.

use cam_core::nn::{tinygap, Model};
use cam_core::tensor::Tensor;

/// Seeded TinyGAP and a matching synthetic input at the given size.
pub fn fixture(size: usize) -> (Model, Tensor) {
    let model = tinygap(4, size, 42);
    let images = cam_core::eval::synthetic_images(1, 42, size, size);
    let input = cam_core::io::preprocess(
        &images[0],
        size,
        size,
        &cam_core::io::DEFAULT_MEAN,
        &cam_core::io::DEFAULT_STD,
    )
    .expect("fixture preprocess");
    (model, input)
}
