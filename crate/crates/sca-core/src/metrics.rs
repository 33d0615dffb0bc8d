//! Image-fidelity measures: PSNR and SSIM.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    /// dB; +infinity when the images are identical.
    pub psnr_db: f64,
    pub ssim: f64,
}

fn check_same_shape<E: Scalar>(op: &'static str, a: &Tensor<E>, b: &Tensor<E>) -> Result<()> {
    if a.shape() != b.shape() {
        for (axis, (&x, &y)) in a.shape().iter().zip(b.shape().iter()).enumerate() {
            if x != y {
                return Err(Error::ShapeMismatch {
                    op,
                    axis,
                    expected: x,
                    got: y,
                });
            }
        }
        return Err(Error::ShapeMismatch {
            op,
            axis: 0,
            expected: a.rank(),
            got: b.rank(),
        });
    }
    Ok(())
}

/// 10·log10(peak² / MSE); +infinity for identical inputs.
pub fn psnr<E: Scalar>(a: &Tensor<E>, b: &Tensor<E>, peak: f64) -> Result<f64> {
    check_same_shape("psnr", a, b)?;
    if peak <= 0.0 {
        return Err(Error::BadArgument {
            op: "psnr",
            detail: format!("peak must be positive, got {peak}"),
        });
    }
    let n = a.numel();
    if n == 0 {
        return Err(Error::EmptyInput { op: "psnr" });
    }
    let mut acc = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data().iter()) {
        let d = x.to_f64() - y.to_f64();
        acc += d * d;
    }
    let mse = acc / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(peak * peak / mse))
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_PEAK: f64 = 1.0;

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let d2 = (i as f64 - c) * (i as f64 - c) + (j as f64 - c) * (j as f64 - c);
            let v = libm::exp(-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
            w[i * SSIM_WINDOW + j] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let win = gaussian_window();
    let c1 = (0.01 * SSIM_PEAK) * (0.01 * SSIM_PEAK);
    let c2 = (0.03 * SSIM_PEAK) * (0.03 * SSIM_PEAK);

    let oh = h - SSIM_WINDOW + 1;
    let ow = w - SSIM_WINDOW + 1;
    let mut acc = 0.0;
    for oy in 0..oh {
        for ox in 0..ow {
            let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for wy in 0..SSIM_WINDOW {
                for wx in 0..SSIM_WINDOW {
                    let g = win[wy * SSIM_WINDOW + wx];
                    let x = a[(oy + wy) * w + ox + wx];
                    let y = b[(oy + wy) * w + ox + wx];
                    mx += g * x;
                    my += g * y;
                    mxx += g * x * x;
                    myy += g * y * y;
                    mxy += g * x * y;
                }
            }
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let cov = mxy - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            acc += num / den;
        }
    }
    acc / (oh * ow) as f64
}

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), peak 1.
/// Multi-channel inputs average per-channel scores. Accepts [H,W],
/// [C,H,W] or [1,C,H,W].
pub fn ssim<E: Scalar>(a: &Tensor<E>, b: &Tensor<E>) -> Result<f64> {
    check_same_shape("ssim", a, b)?;
    let shape = a.shape();
    let (c, h, w) = match shape.len() {
        2 => (1, shape[0], shape[1]),
        3 => (shape[0], shape[1], shape[2]),
        4 if shape[0] == 1 => (shape[1], shape[2], shape[3]),
        _ => {
            return Err(Error::BadArgument {
                op: "ssim",
                detail: format!("unsupported shape rank {}", shape.len()),
            })
        }
    };
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::BadArgument {
            op: "ssim",
            detail: format!("image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"),
        });
    }
    let plane = h * w;
    let mut total = 0.0;
    for ci in 0..c {
        let pa: Vec<f64> = a.data()[ci * plane..(ci + 1) * plane]
            .iter()
            .map(|v| v.to_f64())
            .collect();
        let pb: Vec<f64> = b.data()[ci * plane..(ci + 1) * plane]
            .iter()
            .map(|v| v.to_f64())
            .collect();
        total += ssim_plane(&pa, &pb, h, w);
    }
    Ok(total / c as f64)
}

pub fn quality<E: Scalar>(a: &Tensor<E>, b: &Tensor<E>) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr_db: psnr(a, b, 1.0)?,
        ssim: ssim(a, b)?,
    })
}
