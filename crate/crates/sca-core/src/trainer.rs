//! Dataset split, Adam, and the MSE training loop.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::net::{self, ModelParams, NetworkConfig};
use crate::tensor::Tensor;

/// Image collection with a deterministic 80/20 split.
pub struct Dataset {
    items: Vec<(String, Tensor<f32>)>,
    split_seed: u64,
}

pub const TRAIN_FRACTION: f64 = 0.8;

impl Dataset {
    pub fn new(items: Vec<(String, Tensor<f32>)>, split_seed: u64) -> Self {
        Dataset { items, split_seed }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(String, Tensor<f32>)] {
        &self.items
    }

    /// Train/test index partition: a function of the item ids and the
    /// split seed only, independent of insertion order.
    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        order.sort_by(|&a, &b| self.items[a].0.cmp(&self.items[b].0));
        let mut rng = ChaCha8Rng::seed_from_u64(self.split_seed);
        order.shuffle(&mut rng);
        let n_train = (self.items.len() as f64 * TRAIN_FRACTION) as usize;
        let train = order[..n_train].to_vec();
        let test = order[n_train..].to_vec();
        (train, test)
    }

    pub fn train_items(&self) -> Vec<&(String, Tensor<f32>)> {
        self.split().0.iter().map(|&i| &self.items[i]).collect()
    }

    pub fn test_items(&self) -> Vec<&(String, Tensor<f32>)> {
        self.split().1.iter().map(|&i| &self.items[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam accumulators, one pair per parameter tensor.
pub struct AdamState {
    pub t: u64,
    pub cfg: AdamConfig,
    m: Vec<Tensor<f32>>,
    v: Vec<Tensor<f32>>,
}

impl AdamState {
    pub fn new(params: &ModelParams<f32>, cfg: AdamConfig) -> Self {
        let shapes: Vec<_> = params.named().iter().map(|(_, t)| t.shape().to_vec()).collect();
        AdamState {
            t: 0,
            cfg,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }
}

/// One Adam update. Tied decoder matrices follow implicitly since they
/// are never stored separately from their encoder originals.
pub fn adam_step(
    params: &mut ModelParams<f32>,
    grads: &[Tensor<f32>],
    state: &mut AdamState,
) -> Result<()> {
    let mut named = params.named_mut();
    if grads.len() != named.len() {
        return Err(Error::BadArgument {
            op: "adam_step",
            detail: format!("{} gradients for {} parameters", grads.len(), named.len()),
        });
    }
    state.t += 1;
    let t = state.t as f64;
    let c = state.cfg;
    let bc1 = 1.0 - libm::pow(c.beta1, t);
    let bc2 = 1.0 - libm::pow(c.beta2, t);

    for (((name, p), g), (m, v)) in named
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.shape() != g.shape() {
            return Err(Error::BadArgument {
                op: "adam_step",
                detail: format!("gradient shape mismatch for parameter {name}"),
            });
        }
        for ((pv, &gv), (mv, vv)) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
        {
            let g64 = gv as f64;
            let m64 = c.beta1 * (*mv as f64) + (1.0 - c.beta1) * g64;
            let v64 = c.beta2 * (*vv as f64) + (1.0 - c.beta2) * g64 * g64;
            *mv = m64 as f32;
            *vv = v64 as f32;
            let m_hat = m64 / bc1;
            let v_hat = v64 / bc2;
            *pv -= (c.lr * m_hat / (libm::sqrt(v_hat) + c.eps)) as f32;
        }
    }
    Ok(())
}

/// Stack [C,H,W] (or [1,C,H,W]) images into one [N,C,H,W] batch.
fn stack_batch(images: &[&Tensor<f32>], cfg: &NetworkConfig) -> Result<Tensor<f32>> {
    let plane = cfg.channels * cfg.height * cfg.width;
    let mut data = Vec::with_capacity(images.len() * plane);
    for img in images {
        if img.numel() != plane {
            return Err(Error::ShapeMismatch {
                op: "stack_batch",
                axis: 0,
                expected: plane,
                got: img.numel(),
            });
        }
        data.extend_from_slice(img.data());
    }
    Tensor::new(
        alloc::vec![images.len(), cfg.channels, cfg.height, cfg.width],
        data,
    )
}

pub struct TrainReport {
    pub params: ModelParams<f32>,
    /// Mean train MSE per epoch.
    pub loss_history: Vec<f64>,
}

pub const DEFAULT_EPOCHS: usize = 40;
pub const DEFAULT_BATCH_SIZE: usize = 32;

/// Minimize mean squared reconstruction error over the train split.
/// Deterministic given `seed`. `observer` sees every item id the moment
/// it enters a gradient batch (test-leak instrumentation).
pub fn train_with_observer(
    cfg: &NetworkConfig,
    dataset: &Dataset,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    adam_cfg: AdamConfig,
    mut observer: impl FnMut(&str),
) -> Result<TrainReport> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(Error::BadArgument {
            op: "train",
            detail: "batch size must be positive".into(),
        });
    }
    let (train_idx, _) = dataset.split();
    if train_idx.is_empty() {
        return Err(Error::EmptyInput { op: "train" });
    }

    let mut params = ModelParams::<f32>::init(cfg, seed)?;
    let mut adam = AdamState::new(&params, adam_cfg);
    let mut history = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let mut order = train_idx.clone();
        // reseed the shuffle per epoch from the run seed
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_no, chunk) in order.chunks(batch_size).enumerate() {
            let images: Vec<&Tensor<f32>> = chunk.iter().map(|&i| &dataset.items()[i].1).collect();
            for &i in chunk {
                observer(&dataset.items()[i].0);
            }
            let batch = stack_batch(&images, cfg)?;

            let mut graph = Graph::new();
            let x = graph.input(batch);
            let pass = net::forward(&mut graph, cfg, &params, x)?;
            let loss = graph.mse(pass.recon, x)?;
            let loss_val = graph.value(loss).data()[0] as f64;
            if !loss_val.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("training loss at epoch {epoch}, batch {batch_no}"),
                });
            }
            graph.backward(loss)?;

            let grads: Vec<Tensor<f32>> = pass
                .nodes
                .ids()
                .iter()
                .map(|&id| {
                    graph
                        .grad(id)
                        .cloned()
                        .unwrap_or_else(|| Tensor::zeros(graph.value(id).shape()))
                })
                .collect();
            adam_step(&mut params, &grads, &mut adam)?;

            // sampled sparsity invariant: first batch of each epoch
            if batch_no == 0 {
                for &c in &pass.codes {
                    let v = graph.value(c);
                    let m = cfg.code_len;
                    for row in v.data().chunks(m) {
                        let nnz = row.iter().filter(|&&x| x != 0.0).count();
                        debug_assert!(nnz <= cfg.sparsity, "top-k produced {nnz} nonzeros");
                    }
                }
            }

            epoch_loss += loss_val;
            batches += 1;
        }
        history.push(epoch_loss / batches as f64);
    }

    Ok(TrainReport {
        params,
        loss_history: history,
    })
}

pub fn train(
    cfg: &NetworkConfig,
    dataset: &Dataset,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<TrainReport> {
    train_with_observer(cfg, dataset, epochs, batch_size, seed, AdamConfig::default(), |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use rand::Rng;

    fn tiny_cfg() -> NetworkConfig {
        NetworkConfig {
            channels: 1,
            height: 8,
            width: 8,
            block_ratios: alloc::vec![1, 2],
            block_channels: alloc::vec![4, 2],
            groups: 2,
            code_len: 8,
            sparsity: 3,
        }
    }

    fn random_items(cfg: &NetworkConfig, n: usize, seed: u64) -> Vec<(String, Tensor<f32>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let numel = cfg.channels * cfg.height * cfg.width;
                let img = Tensor::new(
                    alloc::vec![cfg.channels, cfg.height, cfg.width],
                    (0..numel).map(|_| rng.gen::<f32>()).collect(),
                )
                .unwrap();
                (format!("img{i:04}"), img)
            })
            .collect()
    }

    #[test]
    fn split_is_disjoint_covering_and_deterministic() {
        let cfg = tiny_cfg();
        let ds = Dataset::new(random_items(&cfg, 25, 1), 42);
        let (train, test) = ds.split();
        assert_eq!(train.len(), 20); // floor(0.8 * 25)
        assert_eq!(test.len(), 5);
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..25).collect::<Vec<_>>());
        assert_eq!(ds.split(), ds.split());

        // split depends on ids, not insertion order
        let mut items = random_items(&cfg, 25, 1);
        items.reverse();
        let ds2 = Dataset::new(items, 42);
        let names = |ds: &Dataset, idx: &[usize]| {
            let mut v: Vec<String> = idx.iter().map(|&i| ds.items()[i].0.clone()).collect();
            v.sort();
            v
        };
        assert_eq!(names(&ds, &ds.split().0), names(&ds2, &ds2.split().0));
    }

    #[test]
    fn adam_zero_gradients_leave_params_unchanged() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::<f32>::init(&cfg, 3).unwrap();
        let before = params.clone();
        let grads: Vec<Tensor<f32>> = params
            .named()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        let mut state = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::<f32>::init(&cfg, 3).unwrap();
        let before = params.clone();
        let g = 0.25f32;
        let grads: Vec<Tensor<f32>> = params
            .named()
            .iter()
            .map(|(_, t)| Tensor::full(t.shape(), g))
            .collect();
        let mut state = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &grads, &mut state).unwrap();
        // first bias-corrected step: -lr * g / (|g| + eps)
        let expected = 1e-3 * g as f64 / (g as f64 + 1e-8);
        for ((_, p), (_, q)) in params.named().iter().zip(before.named().iter()) {
            for (a, b) in p.data().iter().zip(q.data().iter()) {
                // f32 parameter storage rounds the update to ~1 ulp of the weight
                assert!(((b - a) as f64 - expected).abs() < 5e-7);
            }
        }
    }

    #[test]
    fn adam_rejects_mismatched_gradients() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::<f32>::init(&cfg, 3).unwrap();
        let mut state = AdamState::new(&params, AdamConfig::default());
        assert!(adam_step(&mut params, &[], &mut state).is_err());
    }

    #[test]
    fn zero_epochs_returns_init() {
        let cfg = tiny_cfg();
        let ds = Dataset::new(random_items(&cfg, 10, 5), 0);
        let report = train(&cfg, &ds, 0, 4, 9).unwrap();
        assert!(report.loss_history.is_empty());
        assert_eq!(report.params, ModelParams::<f32>::init(&cfg, 9).unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = tiny_cfg();
        let ds = Dataset::new(random_items(&cfg, 10, 5), 0);
        let a = train(&cfg, &ds, 2, 4, 9).unwrap();
        let b = train(&cfg, &ds, 2, 4, 9).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn training_improves_and_stays_finite() {
        let cfg = tiny_cfg();
        let ds = Dataset::new(random_items(&cfg, 10, 5), 0);
        let report = train(&cfg, &ds, 8, 4, 9).unwrap();
        assert!(report.loss_history.iter().all(|l| l.is_finite()));
        assert!(report.loss_history.last().unwrap() < report.loss_history.first().unwrap());
    }

    #[test]
    fn test_items_never_enter_batches() {
        let cfg = tiny_cfg();
        let ds = Dataset::new(random_items(&cfg, 10, 5), 0);
        let test_ids: Vec<String> = ds.test_items().iter().map(|(id, _)| id.clone()).collect();
        let mut seen = Vec::new();
        train_with_observer(&cfg, &ds, 2, 4, 9, AdamConfig::default(), |id| seen.push(id.to_string())).unwrap();
        assert!(!seen.is_empty());
        for id in &seen {
            assert!(!test_ids.contains(id), "test item {id} leaked into a batch");
        }
    }

    #[test]
    fn empty_train_split_is_an_error() {
        let cfg = tiny_cfg();
        let ds = Dataset::new(Vec::new(), 0);
        assert!(matches!(
            train(&cfg, &ds, 1, 4, 0),
            Err(Error::EmptyInput { .. })
        ));
    }
}
