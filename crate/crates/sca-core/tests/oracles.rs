//! Cross-checks of the graph kernels against independently written
//! naive reference implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sca_core::graph::Graph;
use sca_core::Tensor;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
    )
    .unwrap()
}

/// Direct quadruple-loop convolution, written without reference to the
/// production kernel: out[n,o,y,x] = b[o] + sum_{c,ky,kx} ...
fn naive_conv2d(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    b: &Tensor<f64>,
    stride: usize,
    padding: usize,
) -> Tensor<f64> {
    let (n, c_in, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (c_out, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (wd + 2 * padding - kw) / stride + 1;
    let mut out = vec![0.0; n * c_out * oh * ow];
    for ni in 0..n {
        for o in 0..c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[o];
                    for c in 0..c_in {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                let xi = ((ni * c_in + c) * h + iy as usize) * wd + ix as usize;
                                let wi = ((o * c_in + c) * kh + ky) * kw + kx;
                                acc += x.data()[xi] * w.data()[wi];
                            }
                        }
                    }
                    out[((ni * c_out + o) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Tensor::new(vec![n, c_out, oh, ow], out).unwrap()
}

fn graph_conv2d(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    b: &Tensor<f64>,
    stride: usize,
    padding: usize,
) -> Tensor<f64> {
    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let wi = g.param(w.clone());
    let bi = g.param(b.clone());
    let y = g.conv2d(xi, wi, bi, stride, padding).unwrap();
    g.value(y).clone()
}

#[test]
fn conv2d_matches_naive_reference() {
    for (case, (n, c_in, c_out, h, w, kk, stride)) in [
        (0u64, (2, 3, 4, 7, 9, 3, 1)),
        (1, (1, 1, 1, 8, 8, 3, 2)),
        (2, (2, 4, 2, 6, 6, 1, 1)),
        (3, (1, 2, 5, 10, 5, 3, 2)),
        (4, (3, 1, 2, 5, 5, 1, 2)),
    ] {
        let padding = kk / 2;
        let x = random_tensor(&[n, c_in, h, w], 100 + case);
        let wt = random_tensor(&[c_out, c_in, kk, kk], 200 + case);
        let b = random_tensor(&[c_out], 300 + case);
        let got = graph_conv2d(&x, &wt, &b, stride, padding);
        let want = naive_conv2d(&x, &wt, &b, stride, padding);
        assert_eq!(got.shape(), want.shape(), "case {case}");
        assert!(got.max_abs_diff(&want) < 1e-12, "case {case}");
    }
}

#[test]
fn conv2d_is_linear_in_the_input() {
    let w = random_tensor(&[3, 2, 3, 3], 7);
    let b = Tensor::zeros(&[3]);
    let x1 = random_tensor(&[1, 2, 6, 6], 8);
    let x2 = random_tensor(&[1, 2, 6, 6], 9);
    let sum = Tensor::new(
        x1.shape().to_vec(),
        x1.data()
            .iter()
            .zip(x2.data())
            .map(|(a, c)| a + c)
            .collect(),
    )
    .unwrap();
    let y1 = graph_conv2d(&x1, &w, &b, 1, 1);
    let y2 = graph_conv2d(&x2, &w, &b, 1, 1);
    let ysum = graph_conv2d(&sum, &w, &b, 1, 1);
    let added = Tensor::new(
        y1.shape().to_vec(),
        y1.data()
            .iter()
            .zip(y2.data())
            .map(|(a, c)| a + c)
            .collect(),
    )
    .unwrap();
    assert!(ysum.max_abs_diff(&added) < 1e-12);
}

/// Double-loop matrix product oracle for the fully connected layer.
fn naive_linear(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let (rows, din) = (x.shape()[0], x.shape()[1]);
    let dout = w.shape()[0];
    let mut out = vec![0.0; rows * dout];
    for r in 0..rows {
        for o in 0..dout {
            let mut acc = b.data()[o];
            for i in 0..din {
                acc += x.data()[r * din + i] * w.data()[o * din + i];
            }
            out[r * dout + o] = acc;
        }
    }
    Tensor::new(vec![rows, dout], out).unwrap()
}

#[test]
fn linear_matches_naive_reference() {
    let x = random_tensor(&[5, 17], 11);
    let w = random_tensor(&[9, 17], 12);
    let b = random_tensor(&[9], 13);
    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let wi = g.param(w.clone());
    let bi = g.param(b.clone());
    let y = g.linear(xi, wi, bi).unwrap();
    assert!(g.value(y).max_abs_diff(&naive_linear(&x, &w, &b)) < 1e-12);
}

#[test]
fn linear_t_is_the_transpose_of_linear() {
    // feeding the weight transposed to the plain layer must agree
    let x = random_tensor(&[4, 9], 21);
    let w = random_tensor(&[9, 17], 22);
    let b = random_tensor(&[17], 23);
    let mut wt = vec![0.0; 9 * 17];
    for o in 0..9 {
        for i in 0..17 {
            wt[i * 9 + o] = w.data()[o * 17 + i];
        }
    }
    let wt = Tensor::new(vec![17, 9], wt).unwrap();

    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let wi = g.param(w.clone());
    let bi = g.param(b.clone());
    let y = g.linear_t(xi, wi, bi).unwrap();
    assert!(g.value(y).max_abs_diff(&naive_linear(&x, &wt, &b)) < 1e-12);
}

#[test]
fn bilinear_upsample_hand_values() {
    // corner-aligned interpolation of a 2x2 ramp to 4x4
    let x = Tensor::new(vec![1, 1, 2, 2], vec![0.0, 3.0, 6.0, 9.0]).unwrap();
    let mut g = Graph::new();
    let xi = g.input(x);
    let y = g.bilinear_upsample(xi, 2).unwrap();
    let want: [f64; 16] = [
        0.0, 1.0, 2.0, 3.0, //
        2.0, 3.0, 4.0, 5.0, //
        4.0, 5.0, 6.0, 7.0, //
        6.0, 7.0, 8.0, 9.0,
    ];
    for (a, b) in g.value(y).data().iter().zip(want.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn bilinear_upsample_preserves_constants_and_range() {
    let x = Tensor::<f64>::full(&[1, 2, 3, 3], 0.4);
    let mut g = Graph::new();
    let xi = g.input(x);
    let y = g.bilinear_upsample(xi, 2).unwrap();
    for &v in g.value(y).data() {
        assert!((v - 0.4).abs() < 1e-12);
    }

    let x = random_tensor(&[1, 1, 5, 7], 31);
    let lo = x.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut g = Graph::new();
    let xi = g.input(x);
    let y = g.bilinear_upsample(xi, 2).unwrap();
    for &v in g.value(y).data() {
        assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }
}

/// Full-sort selection oracle: stable sort by descending magnitude,
/// keep the first k positions.
fn naive_top_k_mask(v: &[f64], k: usize) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| {
        v[b].abs()
            .partial_cmp(&v[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut mask = vec![false; v.len()];
    for &i in &idx[..k] {
        mask[i] = true;
    }
    mask
}

#[test]
fn top_k_matches_full_sort_oracle() {
    let m = 512;
    let k = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        // quantized values force plenty of magnitude ties
        let row: Vec<f64> = (0..m)
            .map(|_| ((rng.gen::<f64>() * 8.0).floor() - 4.0) / 4.0)
            .collect();
        let x = Tensor::new(vec![1, m], row.clone()).unwrap();
        let mut g = Graph::new();
        let xi = g.input(x);
        let y = g.top_k(xi, k).unwrap();
        let out = g.value(y).data();
        let mask = naive_top_k_mask(&row, k);
        let mut kept = 0;
        for i in 0..m {
            if mask[i] {
                assert_eq!(out[i], row[i], "index {i} should be kept verbatim");
                if out[i] != 0.0 {
                    kept += 1;
                }
            } else {
                assert_eq!(out[i], 0.0, "index {i} should be zeroed");
            }
        }
        assert!(kept <= k);
    }
}

#[test]
fn top_k_is_idempotent() {
    let row = random_tensor(&[2, 64], 41);
    let mut g = Graph::new();
    let xi = g.input(row);
    let once = g.top_k(xi, 9).unwrap();
    let twice = g.top_k(once, 9).unwrap();
    assert_eq!(g.value(once).data(), g.value(twice).data());
}

#[test]
fn top_k_commutes_with_permutation_when_magnitudes_are_distinct() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let m = 64;
    // distinct magnitudes so the selection is permutation-equivariant
    let row: Vec<f64> = (0..m).map(|i| (i as f64 + 1.0) * if rng.gen() { 1.0 } else { -1.0 }).collect();
    let mut perm: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let permuted: Vec<f64> = perm.iter().map(|&p| row[p]).collect();

    let run = |data: Vec<f64>| {
        let mut g = Graph::new();
        let xi = g.input(Tensor::new(vec![1, m], data).unwrap());
        let y = g.top_k(xi, 7).unwrap();
        g.value(y).data().to_vec()
    };
    let base = run(row.clone());
    let shuffled = run(permuted);
    for (i, &p) in perm.iter().enumerate() {
        assert_eq!(shuffled[i], base[p]);
    }
}
