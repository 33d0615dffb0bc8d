//! The autoencoder: shared convolutional trunk, L grouped sparsifying
//! linear bottlenecks with top-k, and a tied symmetric decoder.
//!
//! Down-sampling block: conv3x3(stride = ratio) → ReLU → conv3x3 → ReLU,
//! with a strided 1x1 skip branch. The first block merges by channel
//! concatenation, interior blocks merge by addition. Up-sampling blocks
//! mirror this with bilinear interpolation and addition-only skips.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::kernels;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Per-block down-sampling factors.
    pub block_ratios: Vec<usize>,
    /// Per-block output channel counts; the last equals `groups`.
    pub block_channels: Vec<usize>,
    /// Number of independent code-maps (L).
    pub groups: usize,
    /// Code length per group (m).
    pub code_len: usize,
    /// Exact nonzeros retained per code-map (k).
    pub sparsity: usize,
}

impl NetworkConfig {
    /// Desk-scale reference configuration: 32x32 grayscale, 8x total
    /// down-sampling into 4x4 maps, L=4 code-maps of length 64, k=8.
    pub fn desk() -> Self {
        NetworkConfig {
            channels: 1,
            height: 32,
            width: 32,
            block_ratios: vec![1, 2, 1, 2, 1, 2],
            block_channels: vec![8, 16, 16, 32, 32, 4],
            groups: 4,
            code_len: 64,
            sparsity: 8,
        }
    }

    /// Reference configuration for 3x128x128 inputs: L=20 code-maps of
    /// length 512 at sparsity 128.
    pub fn reference() -> Self {
        NetworkConfig {
            channels: 3,
            height: 128,
            width: 128,
            block_ratios: vec![1, 2, 1, 2, 1, 2],
            block_channels: vec![32, 64, 64, 128, 128, 20],
            groups: 20,
            code_len: 512,
            sparsity: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |detail: String| Error::BadArgument {
            op: "NetworkConfig",
            detail,
        };
        if self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(err(format!(
                "degenerate input shape {}x{}x{}",
                self.channels, self.height, self.width
            )));
        }
        if self.block_ratios.len() != self.block_channels.len() || self.block_ratios.is_empty() {
            return Err(err(format!(
                "block lists must be non-empty and equal length ({} vs {})",
                self.block_ratios.len(),
                self.block_channels.len()
            )));
        }
        let total: usize = self.block_ratios.iter().product();
        if total == 0 || self.height % total != 0 || self.width % total != 0 {
            return Err(err(format!(
                "total down-sampling ratio {total} must divide {}x{}",
                self.height, self.width
            )));
        }
        if *self.block_channels.last().unwrap() != self.groups {
            return Err(err(format!(
                "last block must emit {} channels (one per code-map), got {}",
                self.groups,
                self.block_channels.last().unwrap()
            )));
        }
        if self.block_channels[0] % 2 != 0 {
            return Err(err(format!(
                "first block merges by concatenation and needs an even channel count, got {}",
                self.block_channels[0]
            )));
        }
        if self.sparsity < 1 || self.sparsity > self.code_len {
            return Err(err(format!(
                "sparsity {} out of range [1, {}]",
                self.sparsity, self.code_len
            )));
        }
        if self.code_len > u16::MAX as usize {
            return Err(err(format!("code length {} exceeds u16 range", self.code_len)));
        }
        if self.groups == 0 {
            return Err(err("group count must be positive".into()));
        }
        Ok(())
    }

    /// Spatial extent of the bottleneck feature maps.
    pub fn bottleneck_hw(&self) -> (usize, usize) {
        let total: usize = self.block_ratios.iter().product();
        (self.height / total, self.width / total)
    }

    /// Flattened bottleneck feature-map size (p).
    pub fn bottleneck_len(&self) -> usize {
        let (h, w) = self.bottleneck_hw();
        h * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Merge {
    Concat,
    Add,
}

/// Channel plan for one trunk block.
#[derive(Debug, Clone)]
struct BlockPlan {
    in_ch: usize,
    main_ch: usize,
    skip_ch: usize,
    ratio: usize,
    merge: Merge,
}

fn encoder_plan(cfg: &NetworkConfig) -> Vec<BlockPlan> {
    let mut plans = Vec::with_capacity(cfg.block_ratios.len());
    let mut in_ch = cfg.channels;
    for (i, (&ratio, &out_ch)) in cfg
        .block_ratios
        .iter()
        .zip(cfg.block_channels.iter())
        .enumerate()
    {
        let merge = if i == 0 { Merge::Concat } else { Merge::Add };
        let (main_ch, skip_ch) = match merge {
            Merge::Concat => (out_ch / 2, out_ch - out_ch / 2),
            Merge::Add => (out_ch, out_ch),
        };
        plans.push(BlockPlan {
            in_ch,
            main_ch,
            skip_ch,
            ratio,
            merge,
        });
        in_ch = out_ch;
    }
    plans
}

/// Decoder plan in processing order (mirror of the encoder); all merges
/// are additions.
fn decoder_plan(cfg: &NetworkConfig) -> Vec<BlockPlan> {
    let n = cfg.block_ratios.len();
    let mut plans = Vec::with_capacity(n);
    for j in 0..n {
        let i = n - 1 - j; // mirrored encoder block
        let in_ch = cfg.block_channels[i];
        let out_ch = if i > 0 {
            cfg.block_channels[i - 1]
        } else {
            cfg.block_channels[0]
        };
        plans.push(BlockPlan {
            in_ch,
            main_ch: out_ch,
            skip_ch: out_ch,
            ratio: cfg.block_ratios[i],
            merge: Merge::Add,
        });
    }
    plans
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<E: Scalar> {
    pub w: Tensor<E>,
    pub b: Tensor<E>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<E: Scalar> {
    pub conv1: ConvParams<E>,
    pub conv2: ConvParams<E>,
    pub skip: ConvParams<E>,
}

/// All learnable weights. Decoder grouped-linear matrices are not stored:
/// they are the transposes of `group_w` by construction, so tying can
/// never drift.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<E: Scalar> {
    pub enc: Vec<BlockParams<E>>,
    /// L grouped linear matrices, each [m, p].
    pub group_w: Vec<Tensor<E>>,
    /// L encoder-side biases, each [m].
    pub group_b: Vec<Tensor<E>>,
    /// L decoder-side biases, each [p].
    pub group_dec_b: Vec<Tensor<E>>,
    pub dec: Vec<BlockParams<E>>,
    pub out: ConvParams<E>,
}

/// Uniform init with limit sqrt(gain / fan_in): gain 6 keeps variance
/// through a conv + ReLU pair, gain 3 through a purely linear layer.
/// With no normalization anywhere, per-layer gains must multiply to ~1
/// or activations drift exponentially with depth.
fn uniform_fan_in<E: Scalar>(
    rng: &mut ChaCha8Rng,
    shape: &[usize],
    fan_in: usize,
    gain: f64,
) -> Tensor<E> {
    let limit = libm::sqrt(gain / fan_in as f64);
    let numel: usize = shape.iter().product();
    let data = (0..numel)
        .map(|_| {
            let u: f64 = rng.gen();
            E::from_f64(limit * (2.0 * u - 1.0))
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape/data agreement")
}

fn init_conv<E: Scalar>(
    rng: &mut ChaCha8Rng,
    out_ch: usize,
    in_ch: usize,
    k: usize,
    gain: f64,
) -> ConvParams<E> {
    ConvParams {
        w: uniform_fan_in(rng, &[out_ch, in_ch, k, k], in_ch * k * k, gain),
        b: Tensor::zeros(&[out_ch]),
    }
}

fn init_block<E: Scalar>(rng: &mut ChaCha8Rng, plan: &BlockPlan) -> BlockParams<E> {
    BlockParams {
        conv1: init_conv(rng, plan.main_ch, plan.in_ch, 3, 6.0),
        conv2: init_conv(rng, plan.main_ch, plan.main_ch, 3, 6.0),
        // the skip branch has no activation after it
        skip: init_conv(rng, plan.skip_ch, plan.in_ch, 1, 3.0),
    }
}

impl<E: Scalar> ModelParams<E> {
    /// Fan-in-scaled uniform initialization, deterministic in `seed`.
    pub fn init(cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = cfg.bottleneck_len();
        let m = cfg.code_len;

        let enc = encoder_plan(cfg)
            .iter()
            .map(|plan| init_block(&mut rng, plan))
            .collect();
        let mut group_w = Vec::with_capacity(cfg.groups);
        let mut group_b = Vec::with_capacity(cfg.groups);
        let mut group_dec_b = Vec::with_capacity(cfg.groups);
        for _ in 0..cfg.groups {
            group_w.push(uniform_fan_in(&mut rng, &[m, p], p, 3.0));
            group_b.push(Tensor::zeros(&[m]));
            group_dec_b.push(Tensor::zeros(&[p]));
        }
        let dec = decoder_plan(cfg)
            .iter()
            .map(|plan| init_block(&mut rng, plan))
            .collect();
        let out = init_conv(&mut rng, cfg.channels, cfg.block_channels[0], 3, 3.0);

        Ok(ModelParams {
            enc,
            group_w,
            group_b,
            group_dec_b,
            dec,
            out,
        })
    }

    /// Canonical (name, tensor) listing; ordering is the contract between
    /// checkpoints, graph leaves and the optimizer.
    pub fn named(&self) -> Vec<(String, &Tensor<E>)> {
        let mut out = Vec::new();
        for (i, b) in self.enc.iter().enumerate() {
            out.push((format!("enc{i}.conv1.w"), &b.conv1.w));
            out.push((format!("enc{i}.conv1.b"), &b.conv1.b));
            out.push((format!("enc{i}.conv2.w"), &b.conv2.w));
            out.push((format!("enc{i}.conv2.b"), &b.conv2.b));
            out.push((format!("enc{i}.skip.w"), &b.skip.w));
            out.push((format!("enc{i}.skip.b"), &b.skip.b));
        }
        for (l, w) in self.group_w.iter().enumerate() {
            out.push((format!("group{l}.w"), w));
        }
        for (l, b) in self.group_b.iter().enumerate() {
            out.push((format!("group{l}.enc_b"), b));
        }
        for (l, b) in self.group_dec_b.iter().enumerate() {
            out.push((format!("group{l}.dec_b"), b));
        }
        for (i, b) in self.dec.iter().enumerate() {
            out.push((format!("dec{i}.conv1.w"), &b.conv1.w));
            out.push((format!("dec{i}.conv1.b"), &b.conv1.b));
            out.push((format!("dec{i}.conv2.w"), &b.conv2.w));
            out.push((format!("dec{i}.conv2.b"), &b.conv2.b));
            out.push((format!("dec{i}.skip.w"), &b.skip.w));
            out.push((format!("dec{i}.skip.b"), &b.skip.b));
        }
        out.push(("out.w".into(), &self.out.w));
        out.push(("out.b".into(), &self.out.b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<E>)> {
        let mut out: Vec<(String, &mut Tensor<E>)> = Vec::new();
        for (i, b) in self.enc.iter_mut().enumerate() {
            out.push((format!("enc{i}.conv1.w"), &mut b.conv1.w));
            out.push((format!("enc{i}.conv1.b"), &mut b.conv1.b));
            out.push((format!("enc{i}.conv2.w"), &mut b.conv2.w));
            out.push((format!("enc{i}.conv2.b"), &mut b.conv2.b));
            out.push((format!("enc{i}.skip.w"), &mut b.skip.w));
            out.push((format!("enc{i}.skip.b"), &mut b.skip.b));
        }
        for (l, w) in self.group_w.iter_mut().enumerate() {
            out.push((format!("group{l}.w"), w));
        }
        for (l, b) in self.group_b.iter_mut().enumerate() {
            out.push((format!("group{l}.enc_b"), b));
        }
        for (l, b) in self.group_dec_b.iter_mut().enumerate() {
            out.push((format!("group{l}.dec_b"), b));
        }
        for (i, b) in self.dec.iter_mut().enumerate() {
            out.push((format!("dec{i}.conv1.w"), &mut b.conv1.w));
            out.push((format!("dec{i}.conv1.b"), &mut b.conv1.b));
            out.push((format!("dec{i}.conv2.w"), &mut b.conv2.w));
            out.push((format!("dec{i}.conv2.b"), &mut b.conv2.b));
            out.push((format!("dec{i}.skip.w"), &mut b.skip.w));
            out.push((format!("dec{i}.skip.b"), &mut b.skip.b));
        }
        out.push(("out.w".into(), &mut self.out.w));
        out.push(("out.b".into(), &mut self.out.b));
        out
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        let cast_conv = |c: &ConvParams<E>| ConvParams {
            w: c.w.cast::<T>(),
            b: c.b.cast::<T>(),
        };
        let cast_block = |b: &BlockParams<E>| BlockParams {
            conv1: cast_conv(&b.conv1),
            conv2: cast_conv(&b.conv2),
            skip: cast_conv(&b.skip),
        };
        ModelParams {
            enc: self.enc.iter().map(cast_block).collect(),
            group_w: self.group_w.iter().map(|t| t.cast()).collect(),
            group_b: self.group_b.iter().map(|t| t.cast()).collect(),
            group_dec_b: self.group_dec_b.iter().map(|t| t.cast()).collect(),
            dec: self.dec.iter().map(cast_block).collect(),
            out: cast_conv(&self.out),
        }
    }
}

/// Per-item collection of L dense code vectors plus their supports.
/// Supports come from the top-k selection, so the degenerate all-zero
/// tie-break case still reports k indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodeMaps<E: Scalar> {
    pub item_id: String,
    /// L dense length-m vectors.
    pub codes: Vec<Vec<E>>,
    /// Sorted ascending index lists, one per group.
    pub supports: Vec<Vec<u16>>,
    pub k: usize,
}

impl<E: Scalar> SparseCodeMaps<E> {
    /// Build from dense vectors; supports are the nonzero index sets.
    pub fn from_dense(item_id: String, codes: Vec<Vec<E>>, k: usize) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::EmptyInput {
                op: "SparseCodeMaps::from_dense",
            });
        }
        let supports = codes
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != E::ZERO)
                    .map(|(i, _)| i as u16)
                    .collect()
            })
            .collect();
        Ok(SparseCodeMaps {
            item_id,
            codes,
            supports,
            k,
        })
    }

    pub fn group_count(&self) -> usize {
        self.codes.len()
    }

    pub fn code_len(&self) -> usize {
        self.codes.first().map_or(0, Vec::len)
    }

    /// Does every group have exactly k entries in its support?
    pub fn is_exactly_sparse(&self) -> bool {
        self.supports.iter().all(|s| s.len() == self.k)
    }
}

/// Graph node ids of all parameters, in `ModelParams::named` order.
pub struct ParamNodes {
    enc: Vec<[NodeId; 6]>,
    group_w: Vec<NodeId>,
    group_b: Vec<NodeId>,
    group_dec_b: Vec<NodeId>,
    dec: Vec<[NodeId; 6]>,
    out: [NodeId; 2],
}

impl ParamNodes {
    pub fn insert<E: Scalar>(graph: &mut Graph<E>, params: &ModelParams<E>) -> ParamNodes {
        let block = |g: &mut Graph<E>, b: &BlockParams<E>| {
            [
                g.param(b.conv1.w.clone()),
                g.param(b.conv1.b.clone()),
                g.param(b.conv2.w.clone()),
                g.param(b.conv2.b.clone()),
                g.param(b.skip.w.clone()),
                g.param(b.skip.b.clone()),
            ]
        };
        let enc = params.enc.iter().map(|b| block(graph, b)).collect();
        let group_w = params.group_w.iter().map(|t| graph.param(t.clone())).collect();
        let group_b = params.group_b.iter().map(|t| graph.param(t.clone())).collect();
        let group_dec_b = params
            .group_dec_b
            .iter()
            .map(|t| graph.param(t.clone()))
            .collect();
        let dec = params.dec.iter().map(|b| block(graph, b)).collect();
        let out = [
            graph.param(params.out.w.clone()),
            graph.param(params.out.b.clone()),
        ];
        ParamNodes {
            enc,
            group_w,
            group_b,
            group_dec_b,
            dec,
            out,
        }
    }

    /// Flat id list matching `ModelParams::named` ordering.
    pub fn ids(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for b in &self.enc {
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&self.group_w);
        out.extend_from_slice(&self.group_b);
        out.extend_from_slice(&self.group_dec_b);
        for b in &self.dec {
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&self.out);
        out
    }
}

fn down_block<E: Scalar>(
    graph: &mut Graph<E>,
    nodes: &[NodeId; 6],
    plan: &BlockPlan,
    x: NodeId,
) -> Result<NodeId> {
    let [c1w, c1b, c2w, c2b, skw, skb] = *nodes;
    let main = graph.conv2d(x, c1w, c1b, plan.ratio, 1)?;
    let main = graph.relu(main);
    let main = graph.conv2d(main, c2w, c2b, 1, 1)?;
    let main = graph.relu(main);
    let skip = graph.conv2d(x, skw, skb, plan.ratio, 0)?;
    match plan.merge {
        Merge::Concat => graph.concat_channels(main, skip),
        Merge::Add => graph.add(main, skip),
    }
}

fn up_block<E: Scalar>(
    graph: &mut Graph<E>,
    nodes: &[NodeId; 6],
    plan: &BlockPlan,
    x: NodeId,
) -> Result<NodeId> {
    let [c1w, c1b, c2w, c2b, skw, skb] = *nodes;
    let up = graph.bilinear_upsample(x, plan.ratio)?;
    let main = graph.conv2d(up, c1w, c1b, 1, 1)?;
    let main = graph.relu(main);
    let main = graph.conv2d(main, c2w, c2b, 1, 1)?;
    let main = graph.relu(main);
    let skip = graph.conv2d(up, skw, skb, 1, 0)?;
    graph.add(main, skip)
}

/// Encoder trunk + grouped sparsifying bottleneck. Returns the L code
/// nodes, each of shape [N, m].
pub fn forward_encoder<E: Scalar>(
    graph: &mut Graph<E>,
    cfg: &NetworkConfig,
    nodes: &ParamNodes,
    x: NodeId,
) -> Result<Vec<NodeId>> {
    let shape = graph.value(x).shape().to_vec();
    if shape.len() != 4 {
        return Err(Error::BadArgument {
            op: "forward_encoder",
            detail: format!("expected [N,C,H,W] input, got rank {}", shape.len()),
        });
    }
    for (axis, (&got, &expected)) in shape[1..]
        .iter()
        .zip([cfg.channels, cfg.height, cfg.width].iter())
        .enumerate()
    {
        if got != expected {
            return Err(Error::ShapeMismatch {
                op: "forward_encoder",
                axis: axis + 1,
                expected,
                got,
            });
        }
    }

    let mut cur = x;
    for (plan, block_nodes) in encoder_plan(cfg).iter().zip(nodes.enc.iter()) {
        cur = down_block(graph, block_nodes, plan, cur)?;
    }

    let n = shape[0];
    let p = cfg.bottleneck_len();
    let mut codes = Vec::with_capacity(cfg.groups);
    for l in 0..cfg.groups {
        let map = graph.select_channel(cur, l)?;
        let flat = graph.reshape(map, &[n, p])?;
        let lin = graph.linear(flat, nodes.group_w[l], nodes.group_b[l])?;
        codes.push(graph.top_k(lin, cfg.sparsity)?);
    }
    Ok(codes)
}

/// Tied grouped-linear decoder + mirrored up-sampling trunk. Output is
/// [N, C, H, W] with no final activation (clamping is an inference-time
/// step).
pub fn forward_decoder<E: Scalar>(
    graph: &mut Graph<E>,
    cfg: &NetworkConfig,
    nodes: &ParamNodes,
    codes: &[NodeId],
) -> Result<NodeId> {
    if codes.len() != cfg.groups {
        return Err(Error::ShapeMismatch {
            op: "forward_decoder",
            axis: 0,
            expected: cfg.groups,
            got: codes.len(),
        });
    }
    let n = graph.value(codes[0]).shape()[0];
    let (bh, bw) = cfg.bottleneck_hw();
    let mut maps = Vec::with_capacity(cfg.groups);
    for (l, &code) in codes.iter().enumerate() {
        let m = graph.value(code).shape();
        if m != [n, cfg.code_len] {
            return Err(Error::ShapeMismatch {
                op: "forward_decoder",
                axis: 1,
                expected: cfg.code_len,
                got: *m.last().unwrap(),
            });
        }
        let flat = graph.linear_t(code, nodes.group_w[l], nodes.group_dec_b[l])?;
        maps.push(graph.reshape(flat, &[n, 1, bh, bw])?);
    }
    let mut cur = maps[0];
    for &m in &maps[1..] {
        cur = graph.concat_channels(cur, m)?;
    }

    for (plan, block_nodes) in decoder_plan(cfg).iter().zip(nodes.dec.iter()) {
        cur = up_block(graph, block_nodes, plan, cur)?;
    }
    graph.conv2d(cur, nodes.out[0], nodes.out[1], 1, 1)
}

pub struct ForwardPass {
    pub nodes: ParamNodes,
    pub codes: Vec<NodeId>,
    pub recon: NodeId,
}

/// Full encode→decode pass in one graph (training path).
pub fn forward<E: Scalar>(
    graph: &mut Graph<E>,
    cfg: &NetworkConfig,
    params: &ModelParams<E>,
    x: NodeId,
) -> Result<ForwardPass> {
    let nodes = ParamNodes::insert(graph, params);
    let codes = forward_encoder(graph, cfg, &nodes, x)?;
    let recon = forward_decoder(graph, cfg, &nodes, &codes)?;
    Ok(ForwardPass { nodes, codes, recon })
}

/// Encode one image into L exactly-k-sparse code-maps. Deterministic for
/// fixed parameters.
pub fn encode<E: Scalar>(
    cfg: &NetworkConfig,
    params: &ModelParams<E>,
    x: &Tensor<E>,
    item_id: &str,
) -> Result<SparseCodeMaps<E>> {
    let mut graph = Graph::new();
    let x_node = graph.input(x.clone());
    let nodes = ParamNodes::insert(&mut graph, params);
    let code_nodes = forward_encoder(&mut graph, cfg, &nodes, x_node)?;

    let mut codes = Vec::with_capacity(cfg.groups);
    let mut supports = Vec::with_capacity(cfg.groups);
    for &c in &code_nodes {
        let v = graph.value(c);
        let row = v.data().to_vec();
        let support: Vec<u16> = kernels::top_k_indices(&row, cfg.sparsity)
            .into_iter()
            .map(|i| i as u16)
            .collect();
        codes.push(row);
        supports.push(support);
    }
    Ok(SparseCodeMaps {
        item_id: item_id.into(),
        codes,
        supports,
        k: cfg.sparsity,
    })
}

/// Decode code-maps back to an image, clamped to [0, 1].
pub fn decode<E: Scalar>(
    cfg: &NetworkConfig,
    params: &ModelParams<E>,
    codes: &SparseCodeMaps<E>,
) -> Result<Tensor<E>> {
    let mut graph = Graph::new();
    let nodes = ParamNodes::insert(&mut graph, params);
    let code_nodes = codes
        .codes
        .iter()
        .map(|c| {
            Tensor::new(vec![1, cfg.code_len], c.clone()).map(|t| graph.input(t))
        })
        .collect::<Result<Vec<_>>>()?;
    let recon = forward_decoder(&mut graph, cfg, &nodes, &code_nodes)?;
    Ok(graph
        .value(recon)
        .map(|v| v.max(E::ZERO).min(E::ONE)))
}

/// Decode with all groups except `l` zeroed; attribute visualization.
pub fn decode_single_group<E: Scalar>(
    cfg: &NetworkConfig,
    params: &ModelParams<E>,
    codes: &SparseCodeMaps<E>,
    l: usize,
) -> Result<Tensor<E>> {
    if l >= cfg.groups {
        return Err(Error::BadArgument {
            op: "decode_single_group",
            detail: format!("group {l} out of range 0..{}", cfg.groups),
        });
    }
    let mut isolated = codes.clone();
    for (g, code) in isolated.codes.iter_mut().enumerate() {
        if g != l {
            for v in code.iter_mut() {
                *v = E::ZERO;
            }
        }
    }
    decode(cfg, params, &isolated)
}
