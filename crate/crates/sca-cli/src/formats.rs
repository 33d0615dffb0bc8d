//! Bit-exact binary formats: "SCAT" tensors, "SCAM" model checkpoints,
//! "SCAP" public stores, and "SCAK" key files. All integers are
//! little-endian; writing, reading, and re-writing any file yields
//! identical bytes.

use std::io::{self, Read, Write};

use sca_core::net::{ModelParams, NetworkConfig, SparseCodeMaps};
use sca_core::protocol::{AmbiguatedCodes, SupportKey};
use sca_core::Tensor;

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u8 = 0x01;
const DTYPE_F32: u8 = 0;

fn bad(detail: impl Into<String>) -> CliError {
    CliError::Data(detail.into())
}

fn read_exact(r: &mut impl Read, n: usize, what: &str) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|e| bad(format!("truncated {what}: {e}")))?;
    Ok(buf)
}

fn read_u8(r: &mut impl Read, what: &str) -> Result<u8> {
    Ok(read_exact(r, 1, what)?[0])
}

fn read_u16(r: &mut impl Read, what: &str) -> Result<u16> {
    let b = read_exact(r, 2, what)?;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let b = read_exact(r, 4, what)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn read_f32(r: &mut impl Read, what: &str) -> Result<f32> {
    let b = read_exact(r, 4, what)?;
    Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let got = read_exact(r, 4, "magic")?;
    if got != magic {
        return Err(bad(format!(
            "bad magic: expected {:?}, got {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&got)
        )));
    }
    let version = read_u8(r, "version")?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r, "string length")? as usize;
    let bytes = read_exact(r, len, "string")?;
    String::from_utf8(bytes).map_err(|e| bad(format!("invalid UTF-8 id: {e}")))
}

// ---------------------------------------------------------------- SCAT

pub fn write_tensor(w: &mut impl Write, t: &Tensor<f32>) -> io::Result<()> {
    w.write_all(b"SCAT")?;
    w.write_all(&[FORMAT_VERSION, DTYPE_F32, t.rank() as u8])?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> Result<Tensor<f32>> {
    expect_magic(r, b"SCAT")?;
    let dtype = read_u8(r, "dtype")?;
    if dtype != DTYPE_F32 {
        return Err(bad(format!("unsupported dtype {dtype}")));
    }
    let ndim = read_u8(r, "ndim")? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(read_u32(r, "dimension")? as usize);
    }
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    for _ in 0..numel {
        data.push(read_f32(r, "tensor payload")?);
    }
    Tensor::new(shape, data).map_err(|e| bad(format!("inconsistent tensor: {e}")))
}

// ---------------------------------------------------------------- SCAM

fn write_config(w: &mut impl Write, cfg: &NetworkConfig) -> io::Result<()> {
    for v in [cfg.channels, cfg.height, cfg.width] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&(cfg.block_ratios.len() as u32).to_le_bytes())?;
    for &v in &cfg.block_ratios {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for &v in &cfg.block_channels {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for v in [cfg.groups, cfg.code_len, cfg.sparsity] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    Ok(())
}

fn read_config(r: &mut impl Read) -> Result<NetworkConfig> {
    let channels = read_u32(r, "channels")? as usize;
    let height = read_u32(r, "height")? as usize;
    let width = read_u32(r, "width")? as usize;
    let blocks = read_u32(r, "block count")? as usize;
    let mut block_ratios = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        block_ratios.push(read_u32(r, "block ratio")? as usize);
    }
    let mut block_channels = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        block_channels.push(read_u32(r, "block channels")? as usize);
    }
    let groups = read_u32(r, "groups")? as usize;
    let code_len = read_u32(r, "code length")? as usize;
    let sparsity = read_u32(r, "sparsity")? as usize;
    Ok(NetworkConfig {
        channels,
        height,
        width,
        block_ratios,
        block_channels,
        groups,
        code_len,
        sparsity,
    })
}

pub fn write_model(
    w: &mut impl Write,
    cfg: &NetworkConfig,
    params: &ModelParams<f32>,
) -> io::Result<()> {
    w.write_all(b"SCAM")?;
    w.write_all(&[FORMAT_VERSION])?;
    write_config(w, cfg)?;
    let named = params.named();
    w.write_all(&(named.len() as u32).to_le_bytes())?;
    for (name, tensor) in named {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        write_tensor(w, tensor)?;
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<(NetworkConfig, ModelParams<f32>)> {
    expect_magic(r, b"SCAM")?;
    let cfg = read_config(r)?;
    cfg.validate()
        .map_err(|e| bad(format!("invalid stored config: {e}")))?;
    let count = read_u32(r, "record count")? as usize;
    // start from a fresh skeleton and fill every named tensor exactly once
    let mut params = ModelParams::<f32>::init(&cfg, 0)
        .map_err(|e| bad(format!("cannot build parameter skeleton: {e}")))?;
    let mut named = params.named_mut();
    if count != named.len() {
        return Err(bad(format!(
            "model holds {count} tensors, config requires {}",
            named.len()
        )));
    }
    for expected in named.iter_mut() {
        let name_len = read_u16(r, "name length")? as usize;
        let name_bytes = read_exact(r, name_len, "parameter name")?;
        let name =
            String::from_utf8(name_bytes).map_err(|e| bad(format!("invalid name: {e}")))?;
        if name != expected.0 {
            return Err(bad(format!(
                "parameter order mismatch: expected {}, found {name}",
                expected.0
            )));
        }
        let tensor = read_tensor(r)?;
        if tensor.shape() != expected.1.shape() {
            return Err(bad(format!(
                "parameter {name}: stored shape {:?} does not match config shape {:?}",
                tensor.shape(),
                expected.1.shape()
            )));
        }
        *expected.1 = tensor;
    }
    Ok((cfg, params))
}

// ---------------------------------------------------------------- SCAP

/// The ambiguated codes of many items, as handed to the public server.
/// The file reveals only the public sparsity k'; how it splits into
/// true and decoy entries stays with the owners.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicStore {
    pub groups: usize,
    pub code_len: usize,
    pub k_prime: usize,
    pub items: Vec<AmbiguatedCodes<f32>>,
}

impl PublicStore {
    pub fn new(items: Vec<AmbiguatedCodes<f32>>) -> Result<PublicStore> {
        let first = items
            .first()
            .ok_or_else(|| bad("public store needs at least one item"))?;
        let store = PublicStore {
            groups: first.groups.len(),
            code_len: first.code_len,
            k_prime: first.k_prime(),
            items,
        };
        store.validate()?;
        Ok(store)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for item in &self.items {
            if item.groups.len() != self.groups
                || item.code_len != self.code_len
                || item.k_prime() != self.k_prime
            {
                return Err(bad(format!("item {} disagrees with the header", item.item_id)));
            }
            if !seen.insert(&item.item_id) {
                return Err(bad(format!("duplicate item id {}", item.item_id)));
            }
            for g in &item.groups {
                if g.len() != self.k_prime {
                    return Err(bad(format!("item {}: group is not k'-sparse", item.item_id)));
                }
                if !g.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(bad(format!(
                        "item {}: indices not strictly ascending",
                        item.item_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn find(&self, item_id: &str) -> Result<&AmbiguatedCodes<f32>> {
        self.items
            .iter()
            .find(|i| i.item_id == item_id)
            .ok_or_else(|| bad(format!("item {item_id} not present in the public store")))
    }
}

pub fn write_public_store(w: &mut impl Write, store: &PublicStore) -> io::Result<()> {
    w.write_all(b"SCAP")?;
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(&(store.groups as u16).to_le_bytes())?;
    w.write_all(&(store.code_len as u32).to_le_bytes())?;
    w.write_all(&(store.k_prime as u32).to_le_bytes())?;
    w.write_all(&(store.items.len() as u32).to_le_bytes())?;
    for item in &store.items {
        write_str(w, &item.item_id)?;
        for g in &item.groups {
            for &(i, v) in g {
                w.write_all(&i.to_le_bytes())?;
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_public_store(r: &mut impl Read) -> Result<PublicStore> {
    expect_magic(r, b"SCAP")?;
    let groups = read_u16(r, "group count")? as usize;
    let code_len = read_u32(r, "code length")? as usize;
    let k_prime = read_u32(r, "public sparsity")? as usize;
    let count = read_u32(r, "item count")? as usize;
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let item_id = read_str(r)?;
        let mut gs = Vec::with_capacity(groups);
        for _ in 0..groups {
            let mut g = Vec::with_capacity(k_prime);
            for _ in 0..k_prime {
                let i = read_u16(r, "code index")?;
                let v = read_f32(r, "code value")?;
                g.push((i, v));
            }
            gs.push(g);
        }
        // the true k/k_n split is not in the file; readers see only k'
        items.push(AmbiguatedCodes {
            item_id,
            groups: gs,
            code_len,
            k: k_prime,
            k_n: 0,
        });
    }
    let store = PublicStore {
        groups,
        code_len,
        k_prime,
        items,
    };
    store.validate()?;
    Ok(store)
}

// ---------------------------------------------------------------- SCAK

/// The owners' secret supports; holds indices only, never values.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyFile {
    pub groups: usize,
    pub code_len: usize,
    pub k: usize,
    pub items: Vec<SupportKey>,
}

impl KeyFile {
    pub fn new(code_len: usize, k: usize, items: Vec<SupportKey>) -> Result<KeyFile> {
        let first = items
            .first()
            .ok_or_else(|| bad("key file needs at least one item"))?;
        let file = KeyFile {
            groups: first.groups.len(),
            code_len,
            k,
            items,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for item in &self.items {
            if !seen.insert(&item.item_id) {
                return Err(bad(format!("duplicate item id {}", item.item_id)));
            }
            if item.groups.len() != self.groups {
                return Err(bad(format!("item {}: wrong group count", item.item_id)));
            }
            item.validate(self.k, self.code_len)
                .map_err(|e| bad(format!("item {}: {e}", item.item_id)))?;
        }
        Ok(())
    }

    pub fn find(&self, item_id: &str) -> Result<&SupportKey> {
        self.items
            .iter()
            .find(|i| i.item_id == item_id)
            .ok_or_else(|| bad(format!("item {item_id} not present in the key file")))
    }
}

pub fn write_key_file(w: &mut impl Write, keys: &KeyFile) -> io::Result<()> {
    w.write_all(b"SCAK")?;
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(&(keys.groups as u16).to_le_bytes())?;
    w.write_all(&(keys.code_len as u32).to_le_bytes())?;
    w.write_all(&(keys.k as u32).to_le_bytes())?;
    w.write_all(&(keys.items.len() as u32).to_le_bytes())?;
    for item in &keys.items {
        write_str(w, &item.item_id)?;
        for g in &item.groups {
            for &i in g {
                w.write_all(&i.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_key_file(r: &mut impl Read) -> Result<KeyFile> {
    expect_magic(r, b"SCAK")?;
    let groups = read_u16(r, "group count")? as usize;
    let code_len = read_u32(r, "code length")? as usize;
    let k = read_u32(r, "sparsity")? as usize;
    let count = read_u32(r, "item count")? as usize;
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let item_id = read_str(r)?;
        let mut gs = Vec::with_capacity(groups);
        for _ in 0..groups {
            let mut g = Vec::with_capacity(k);
            for _ in 0..k {
                g.push(read_u16(r, "support index")?);
            }
            gs.push(g);
        }
        items.push(SupportKey {
            item_id,
            groups: gs,
        });
    }
    let file = KeyFile {
        groups,
        code_len,
        k,
        items,
    };
    file.validate()?;
    Ok(file)
}

/// Convenience: collect encoded items into public store + key file
/// pairs with deterministic item ordering.
pub fn sort_codes_by_id(codes: &mut [SparseCodeMaps<f32>]) {
    codes.sort_by(|a, b| a.item_id.cmp(&b.item_id));
}
