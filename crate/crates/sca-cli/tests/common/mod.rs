//! Shared helpers for integration tests: synthetic smooth grayscale
//! images (gradients plus Gaussian blobs) and a writer that lays them
//! out as a PGM directory.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sca_cli::pnm;
use sca_core::Tensor;

/// A smooth random image: linear ramp plus a few Gaussian bumps,
/// quantized to the 8-bit grid so PGM round trips are exact.
pub fn synthetic_image(height: usize, width: usize, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let a = rng.gen_range(0.2..0.8);
    let bx = rng.gen_range(-0.4..0.4) / width as f64;
    let by = rng.gen_range(-0.4..0.4) / height as f64;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(2..5))
        .map(|_| {
            (
                rng.gen_range(0.0..height as f64),
                rng.gen_range(0.0..width as f64),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(2.0..6.0),
            )
        })
        .collect();
    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let mut v = a + bx * x as f64 + by * y as f64;
            for &(cy, cx, amp, sigma) in &blobs {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
            let q = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
            data.push(q as f32);
        }
    }
    Tensor::new(vec![1, height, width], data).unwrap()
}

// shared across test binaries; not every binary uses every helper
#[allow(dead_code)]
pub fn write_image_dir(dir: &Path, count: usize, height: usize, width: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let img = synthetic_image(height, width, &mut rng);
        pnm::write_image(&dir.join(format!("img{i:04}.pgm")), &img).unwrap();
    }
}
