//! Line-based `key = value` run configuration covering the network
//! geometry and every trainer hyperparameter. Lines starting with `#`
//! and blank lines are ignored; list values are comma-separated.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sca_core::net::NetworkConfig;
use sca_core::trainer::{AdamConfig, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub split_seed: u64,
    pub adam: AdamConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            network: NetworkConfig::desk(),
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            split_seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

fn bad(detail: impl Into<String>) -> CliError {
    CliError::Data(detail.into())
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| bad(format!("config key {key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|v| parse_scalar(key, v))
        .collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: expected `key = value`", lineno + 1)))?;
        entries.insert(key.trim().to_string(), value.trim().to_string());
    }

    let mut cfg = RunConfig::default();
    for (key, value) in &entries {
        match key.as_str() {
            "channels" => cfg.network.channels = parse_scalar(key, value)?,
            "height" => cfg.network.height = parse_scalar(key, value)?,
            "width" => cfg.network.width = parse_scalar(key, value)?,
            "block_ratios" => cfg.network.block_ratios = parse_list(key, value)?,
            "block_channels" => cfg.network.block_channels = parse_list(key, value)?,
            "groups" => cfg.network.groups = parse_scalar(key, value)?,
            "code_len" => cfg.network.code_len = parse_scalar(key, value)?,
            "sparsity" => cfg.network.sparsity = parse_scalar(key, value)?,
            "epochs" => cfg.epochs = parse_scalar(key, value)?,
            "batch_size" => cfg.batch_size = parse_scalar(key, value)?,
            "split_seed" => cfg.split_seed = parse_scalar(key, value)?,
            "learning_rate" => cfg.adam.lr = parse_scalar(key, value)?,
            "beta1" => cfg.adam.beta1 = parse_scalar(key, value)?,
            "beta2" => cfg.adam.beta2 = parse_scalar(key, value)?,
            "epsilon" => cfg.adam.eps = parse_scalar(key, value)?,
            other => return Err(bad(format!("unknown config key {other:?}"))),
        }
    }
    cfg.network
        .validate()
        .map_err(|e| bad(format!("invalid network config: {e}")))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Canonical text rendering; `parse_config(render_config(c)) == c`.
pub fn render_config(cfg: &RunConfig) -> String {
    let list = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    format!(
        "channels = {}\nheight = {}\nwidth = {}\nblock_ratios = {}\nblock_channels = {}\n\
         groups = {}\ncode_len = {}\nsparsity = {}\nepochs = {}\nbatch_size = {}\n\
         split_seed = {}\nlearning_rate = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\n",
        cfg.network.channels,
        cfg.network.height,
        cfg.network.width,
        list(&cfg.network.block_ratios),
        list(&cfg.network.block_channels),
        cfg.network.groups,
        cfg.network.code_len,
        cfg.network.sparsity,
        cfg.epochs,
        cfg.batch_size,
        cfg.split_seed,
        cfg.adam.lr,
        cfg.adam.beta1,
        cfg.adam.beta2,
        cfg.adam.eps,
    )
}
