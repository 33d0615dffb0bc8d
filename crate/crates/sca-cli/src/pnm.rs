//! Binary PGM (P5) and PPM (P6) image I/O with maxval 255. Pixels map
//! to [0, 1] floats; grayscale loads as [1, H, W], color as [3, H, W].

use std::fs;
use std::io::Write;
use std::path::Path;

use sca_core::Tensor;

use crate::error::{CliError, Result};

fn bad(path: &Path, detail: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {detail}", path.display()))
}

/// Reads one header token, skipping whitespace and `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b' ' | b'\t' | b'\r' | b'\n' => *pos += 1,
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| bytes[start..*pos].to_vec())
}

pub fn read_image(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path).map_err(|e| bad(path, e))?;
    let mut pos = 0usize;
    let magic = next_token(&bytes, &mut pos).ok_or_else(|| bad(path, "empty file"))?;
    let channels = match magic.as_slice() {
        b"P5" => 1usize,
        b"P6" => 3usize,
        other => {
            return Err(bad(
                path,
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let mut dim = |what: &str| -> Result<usize> {
        let tok = next_token(&bytes, &mut pos).ok_or_else(|| bad(path, format!("missing {what}")))?;
        String::from_utf8_lossy(&tok)
            .parse::<usize>()
            .map_err(|_| bad(path, format!("invalid {what}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let maxval = dim("maxval")?;
    if maxval != 255 {
        return Err(bad(path, format!("unsupported maxval {maxval}, need 255")));
    }
    pos += 1; // the single whitespace byte after the header
    let expected = width * height * channels;
    let payload = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| bad(path, "truncated pixel payload"))?;

    // interleaved bytes -> planar [C, H, W] floats in [0, 1]
    let mut data = vec![0.0f32; expected];
    for (i, &b) in payload.iter().enumerate() {
        let c = i % channels;
        let pixel = i / channels;
        data[c * width * height + pixel] = b as f32 / 255.0;
    }
    Ok(Tensor::new(vec![channels, height, width], data).map_err(|e| bad(path, e))?)
}

pub fn write_image(path: &Path, image: &Tensor<f32>) -> Result<()> {
    let shape = image.shape().to_vec();
    let (channels, height, width) = match shape.as_slice() {
        [c, h, w] => (*c, *h, *w),
        [1, c, h, w] => (*c, *h, *w),
        other => {
            return Err(bad(
                path,
                format!("cannot write image of shape {other:?}"),
            ))
        }
    };
    let magic = match channels {
        1 => "P5",
        3 => "P6",
        c => return Err(bad(path, format!("cannot write {c}-channel image"))),
    };
    let mut out = Vec::with_capacity(32 + channels * height * width);
    write!(out, "{magic}\n{width} {height}\n255\n").expect("in-memory write");
    let plane = height * width;
    let base = image.data().len() - channels * plane; // skip any leading batch axis
    for pixel in 0..plane {
        for c in 0..channels {
            let v = image.data()[base + c * plane + pixel].clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    fs::write(path, out).map_err(|e| bad(path, e))
}

/// Loads every `.pgm`/`.ppm` file in a directory, sorted by file name;
/// unreadable files are reported on stderr and skipped.
pub fn read_image_dir(dir: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| bad(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm") | Some("ppm")
            )
        })
        .collect();
    paths.sort();
    let mut items = Vec::with_capacity(paths.len());
    for path in paths {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match read_image(&path) {
            Ok(img) => items.push((id, img)),
            Err(e) => eprintln!("warning: skipping {e}"),
        }
    }
    Ok(items)
}
