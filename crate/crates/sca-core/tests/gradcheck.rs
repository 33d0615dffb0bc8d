//! Central finite-difference validation of every backward rule, run in
//! f64 so discretization error dominates rounding error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sca_core::graph::{Graph, NodeId};
use sca_core::net::{self, ModelParams, NetworkConfig};
use sca_core::Tensor;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-3;
const ABS_FLOOR: f64 = 1e-6;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
    )
    .unwrap()
}

fn agree(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff < ABS_FLOOR || diff / analytic.abs().max(numeric.abs()) < REL_TOL
}

/// Checks d(loss)/d(inputs[i]) for a scalar-loss builder, element by
/// element, against central differences.
fn check_op<F>(inputs: &[Tensor<f64>], build: F, label: &str)
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> NodeId,
{
    // analytic gradients
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = build(&mut g, &ids);
    assert_eq!(g.value(loss).numel(), 1, "{label}: loss must be scalar");
    g.backward(loss).unwrap();
    let grads: Vec<Tensor<f64>> = ids
        .iter()
        .map(|&id| g.grad(id).expect("missing gradient").clone())
        .collect();

    // numeric gradients
    let eval = |tensors: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| g.input(t.clone())).collect();
        let loss = build(&mut g, &ids);
        g.value(loss).data()[0]
    };
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for ti in 0..inputs.len() {
        for ei in 0..inputs[ti].numel() {
            let orig = work[ti].data()[ei];
            work[ti].data_mut()[ei] = orig + H;
            let up = eval(&work);
            work[ti].data_mut()[ei] = orig - H;
            let down = eval(&work);
            work[ti].data_mut()[ei] = orig;
            let numeric = (up - down) / (2.0 * H);
            let analytic = grads[ti].data()[ei];
            assert!(
                agree(analytic, numeric),
                "{label}: tensor {ti} element {ei}: analytic {analytic} vs numeric {numeric}"
            );
        }
    }
}

#[test]
fn conv2d_gradients() {
    let x = random_tensor(&[2, 2, 5, 5], 1);
    let w = random_tensor(&[3, 2, 3, 3], 2);
    let b = random_tensor(&[3], 3);
    let t = random_tensor(&[2, 3, 5, 5], 4);
    check_op(&[x, w, b], |g, ids| {
        let y = g.conv2d(ids[0], ids[1], ids[2], 1, 1).unwrap();
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "conv2d stride 1");

    let x = random_tensor(&[1, 2, 6, 6], 5);
    let w = random_tensor(&[2, 2, 3, 3], 6);
    let b = random_tensor(&[2], 7);
    let t = random_tensor(&[1, 2, 3, 3], 8);
    check_op(&[x, w, b], |g, ids| {
        let y = g.conv2d(ids[0], ids[1], ids[2], 2, 1).unwrap();
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "conv2d stride 2");

    let x = random_tensor(&[1, 3, 4, 4], 9);
    let w = random_tensor(&[2, 3, 1, 1], 10);
    let b = random_tensor(&[2], 11);
    let t = random_tensor(&[1, 2, 2, 2], 12);
    check_op(&[x, w, b], |g, ids| {
        let y = g.conv2d(ids[0], ids[1], ids[2], 2, 0).unwrap();
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "conv2d 1x1 skip");
}

#[test]
fn linear_gradients() {
    let x = random_tensor(&[3, 7], 13);
    let w = random_tensor(&[5, 7], 14);
    let b = random_tensor(&[5], 15);
    let t = random_tensor(&[3, 5], 16);
    check_op(&[x, w, b], |g, ids| {
        let y = g.linear(ids[0], ids[1], ids[2]).unwrap();
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "linear");
}

#[test]
fn linear_t_gradients() {
    let x = random_tensor(&[3, 5], 17);
    let w = random_tensor(&[5, 7], 18);
    let b = random_tensor(&[7], 19);
    let t = random_tensor(&[3, 7], 20);
    check_op(&[x, w, b], |g, ids| {
        let y = g.linear_t(ids[0], ids[1], ids[2]).unwrap();
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "linear_t");
}

#[test]
fn relu_gradients_away_from_the_kink() {
    // keep magnitudes well above H so no sign flips during probing
    let mut x = random_tensor(&[4, 6], 21);
    for v in x.data_mut() {
        *v += if *v >= 0.0 { 0.5 } else { -0.5 };
    }
    let t = random_tensor(&[4, 6], 22);
    check_op(&[x], |g, ids| {
        let y = g.relu(ids[0]);
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "relu");
}

#[test]
fn top_k_gradients_on_stable_support() {
    // distinct, well-separated magnitudes keep the support fixed
    let x = Tensor::new(
        vec![2, 6],
        vec![
            3.0, -1.0, 0.5, -2.0, 0.25, 1.5, //
            -0.75, 2.5, 0.3, 1.2, -3.5, 0.1,
        ],
    )
    .unwrap();
    let t = random_tensor(&[2, 6], 23);
    check_op(&[x], |g, ids| {
        let y = g.top_k(ids[0], 3).unwrap();
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "top_k");
}

#[test]
fn bilinear_gradients() {
    let x = random_tensor(&[1, 2, 3, 3], 24);
    let t = random_tensor(&[1, 2, 6, 6], 25);
    check_op(&[x], |g, ids| {
        let y = g.bilinear_upsample(ids[0], 2).unwrap();
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "bilinear x2");
}

#[test]
fn add_concat_select_gradients() {
    let a = random_tensor(&[1, 2, 3, 3], 26);
    let b = random_tensor(&[1, 2, 3, 3], 27);
    let t = random_tensor(&[1, 1, 3, 3], 28);
    check_op(&[a, b], |g, ids| {
        let s = g.add(ids[0], ids[1]).unwrap();
        let c = g.concat_channels(s, ids[0]).unwrap();
        let one = g.select_channel(c, 2).unwrap();
        let target = g.input(t.clone());
        g.mse(one, target).unwrap()
    }, "add+concat+select");
}

#[test]
fn fan_out_gradients_accumulate() {
    // the same node feeding two consumers must sum its gradients
    let x = random_tensor(&[2, 4], 29);
    let t = random_tensor(&[2, 4], 30);
    check_op(&[x], |g, ids| {
        let y = g.add(ids[0], ids[0]).unwrap();
        let target = g.input(t.clone());
        g.mse(y, target).unwrap()
    }, "fan-out");
}

#[test]
fn mse_gradients() {
    let a = random_tensor(&[3, 4], 31);
    let b = random_tensor(&[3, 4], 32);
    check_op(&[a, b], |g, ids| g.mse(ids[0], ids[1]).unwrap(), "mse");
}

fn tiny_cfg() -> NetworkConfig {
    NetworkConfig {
        channels: 1,
        height: 8,
        width: 8,
        block_ratios: vec![1, 2],
        block_channels: vec![4, 2],
        groups: 2,
        code_len: 8,
        sparsity: 3,
    }
}

fn whole_net_loss(cfg: &NetworkConfig, params: &ModelParams<f64>, x: &Tensor<f64>) -> f64 {
    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let pass = net::forward(&mut g, cfg, params, xi).unwrap();
    let target = g.input(x.clone());
    let loss = g.mse(pass.recon, target).unwrap();
    g.value(loss).data()[0]
}

/// End-to-end check through the complete autoencoder, including the
/// tied decoder whose weight gradient accumulates from both uses.
#[test]
fn whole_network_gradients_match_finite_differences() {
    let cfg = tiny_cfg();
    let mut params = ModelParams::<f64>::init(&cfg, 7).unwrap();
    // Zero-initialized biases put fully-clipped conv windows exactly on
    // the ReLU kink (pre-activation == bias == 0), where one-sided and
    // central differences legitimately disagree. Jitter every parameter
    // so the check point is generic.
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for (_, t) in params.named_mut() {
        for v in t.data_mut() {
            *v += 0.02 * (rng.gen::<f64>() * 2.0 - 1.0);
        }
    }
    let x = Tensor::new(
        vec![1, 1, 8, 8],
        random_tensor(&[64], 40)
            .data()
            .iter()
            .map(|v| 0.5 + 0.4 * v)
            .collect(),
    )
    .unwrap();

    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let pass = net::forward(&mut g, &cfg, &params, xi).unwrap();
    let target = g.input(x.clone());
    let loss = g.mse(pass.recon, target).unwrap();
    g.backward(loss).unwrap();
    let grads: Vec<Tensor<f64>> = pass
        .nodes
        .ids()
        .iter()
        .map(|&id| g.grad(id).expect("missing parameter gradient").clone())
        .collect();

    let mut work = params.clone();
    let names: Vec<String> = params.named().iter().map(|(n, _)| n.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0usize;
    for (ti, name) in names.iter().enumerate() {
        let numel = grads[ti].numel();
        // probe every element of small tensors, a random sample of big ones
        let elems: Vec<usize> = if numel <= 24 {
            (0..numel).collect()
        } else {
            (0..24).map(|_| rng.gen_range(0..numel)).collect()
        };
        for ei in elems {
            let orig = work.named_mut()[ti].1.data_mut()[ei];
            work.named_mut()[ti].1.data_mut()[ei] = orig + H;
            let up = whole_net_loss(&cfg, &work, &x);
            work.named_mut()[ti].1.data_mut()[ei] = orig - H;
            let down = whole_net_loss(&cfg, &work, &x);
            work.named_mut()[ti].1.data_mut()[ei] = orig;
            let numeric = (up - down) / (2.0 * H);
            let analytic = grads[ti].data()[ei];
            assert!(
                agree(analytic, numeric),
                "{name}[{ei}]: analytic {analytic} vs numeric {numeric}"
            );
            checked += 1;
        }
    }
    assert!(checked > 300, "probed only {checked} elements");
}

#[test]
fn tied_weight_shared_between_linear_and_linear_t() {
    let x = random_tensor(&[2, 6], 50);
    let w = random_tensor(&[4, 6], 51);
    let b1 = random_tensor(&[4], 52);
    let b2 = random_tensor(&[6], 53);
    let t = random_tensor(&[2, 6], 54);
    check_op(&[x, w, b1, b2], |g, ids| {
        let mid = g.linear(ids[0], ids[1], ids[2]).unwrap();
        let out = g.linear_t(mid, ids[1], ids[3]).unwrap();
        let target = g.input(t.clone());
        g.mse(out, target).unwrap()
    }, "tied linear/linear_t");
}
