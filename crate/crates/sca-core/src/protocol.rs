//! Support extraction, ambiguation, purification, and the random-guess
//! attack. All operations are pure given (inputs, seed).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::SparseCodeMaps;
use crate::scalar::Scalar;

/// Per-item secret: sorted nonzero index sets, one per group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportKey {
    pub item_id: String,
    /// L strictly increasing index lists.
    pub groups: Vec<Vec<u16>>,
}

impl SupportKey {
    pub fn validate(&self, k: usize, m: usize) -> Result<()> {
        for (l, g) in self.groups.iter().enumerate() {
            if g.len() != k {
                return Err(Error::BadArgument {
                    op: "SupportKey",
                    detail: format!("group {l} has {} indices, expected {k}", g.len()),
                });
            }
            if !g.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::BadArgument {
                    op: "SupportKey",
                    detail: format!("group {l} indices are not strictly increasing"),
                });
            }
            if g.last().is_some_and(|&i| i as usize >= m) {
                return Err(Error::BadArgument {
                    op: "SupportKey",
                    detail: format!("group {l} contains an index outside [0, {m})"),
                });
            }
        }
        Ok(())
    }
}

/// Per-item public record: k'-sparse vectors as sorted (index, value)
/// pairs. True entries keep their exact values; decoys live on the
/// support complement.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguatedCodes<E: Scalar> {
    pub item_id: String,
    pub groups: Vec<Vec<(u16, E)>>,
    pub code_len: usize,
    /// True sparsity of the underlying codes.
    pub k: usize,
    /// Decoys injected per group.
    pub k_n: usize,
}

impl<E: Scalar> AmbiguatedCodes<E> {
    pub fn k_prime(&self) -> usize {
        self.k + self.k_n
    }

    pub fn support(&self, l: usize) -> Vec<u16> {
        self.groups[l].iter().map(|&(i, _)| i).collect()
    }

    /// The curious-server view: all k' entries treated as dense codes.
    pub fn to_code_maps(&self) -> SparseCodeMaps<E> {
        let codes = self
            .groups
            .iter()
            .map(|g| {
                let mut dense = vec![E::ZERO; self.code_len];
                for &(i, v) in g {
                    dense[i as usize] = v;
                }
                dense
            })
            .collect();
        let supports = self.groups.iter().map(|g| g.iter().map(|&(i, _)| i).collect()).collect();
        SparseCodeMaps {
            item_id: self.item_id.clone(),
            codes,
            supports,
            k: self.k_prime(),
        }
    }
}

/// Per-group statistics of the true nonzero code values, used to make
/// decoys statistically indistinguishable.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub groups: Vec<GroupStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    /// Mean of |nonzero values|.
    pub mean: f64,
    /// Standard deviation of |nonzero values|.
    pub std: f64,
    /// Minimum observed |nonzero value|; decoy magnitudes are truncated
    /// below at this.
    pub threshold: f64,
    /// Empirical fraction of positive values.
    pub sign_p: f64,
}

pub fn extract_support<E: Scalar>(codes: &SparseCodeMaps<E>) -> SupportKey {
    SupportKey {
        item_id: codes.item_id.clone(),
        groups: codes.supports.clone(),
    }
}

pub fn fit_noise_model<E: Scalar>(collection: &[SparseCodeMaps<E>]) -> Result<NoiseModel> {
    let first = collection.first().ok_or(Error::EmptyInput {
        op: "fit_noise_model",
    })?;
    let groups = (0..first.group_count())
        .map(|l| {
            let mut mags: Vec<f64> = Vec::new();
            let mut positives = 0usize;
            for item in collection {
                for &i in &item.supports[l] {
                    let v = item.codes[l][i as usize].to_f64();
                    mags.push(v.abs());
                    if v > 0.0 {
                        positives += 1;
                    }
                }
            }
            if mags.is_empty() {
                return GroupStats {
                    mean: 0.0,
                    std: 0.0,
                    threshold: 0.0,
                    sign_p: 0.5,
                };
            }
            let n = mags.len() as f64;
            let mean = mags.iter().sum::<f64>() / n;
            let var = mags.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let threshold = mags.iter().cloned().fold(f64::INFINITY, f64::min);
            GroupStats {
                mean,
                std: libm::sqrt(var),
                threshold,
                sign_p: positives as f64 / n,
            }
        })
        .collect();
    Ok(NoiseModel { groups })
}

/// Deterministic per-item RNG: security rests on the support, not on the
/// seed, so a plain keyed stream is fine.
fn item_rng(seed: u64, item_id: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325; // FNV-1a
    for b in item_id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ h);
    rng.set_stream(h.rotate_left(32));
    rng
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

const TRUNCATION_TRIES: usize = 1000;

/// Magnitude from the group's Gaussian, truncated below at the
/// threshold by rejection; clamps after `TRUNCATION_TRIES` rejections.
fn sample_magnitude(stats: &GroupStats, rng: &mut ChaCha8Rng) -> f64 {
    for _ in 0..TRUNCATION_TRIES {
        let v = stats.mean + stats.std * standard_normal(rng);
        if v >= stats.threshold {
            return v;
        }
    }
    stats.threshold
}

/// Pad each group with `k_n` decoys drawn uniformly on the support
/// complement, with magnitudes matching the true-value statistics.
pub fn ambiguate<E: Scalar>(
    codes: &SparseCodeMaps<E>,
    noise: &NoiseModel,
    k_n: usize,
    rng_seed: u64,
) -> Result<AmbiguatedCodes<E>> {
    let m = codes.code_len();
    if k_n > m - codes.k {
        return Err(Error::BadArgument {
            op: "ambiguate",
            detail: format!("k_n = {k_n} exceeds support complement {}", m - codes.k),
        });
    }
    if noise.groups.len() != codes.group_count() {
        return Err(Error::ShapeMismatch {
            op: "ambiguate",
            axis: 0,
            expected: codes.group_count(),
            got: noise.groups.len(),
        });
    }
    let mut rng = item_rng(rng_seed, &codes.item_id);
    let mut groups = Vec::with_capacity(codes.group_count());
    for l in 0..codes.group_count() {
        let support = &codes.supports[l];
        let mut entries: Vec<(u16, E)> = support
            .iter()
            .map(|&i| (i, codes.codes[l][i as usize]))
            .collect();

        let complement: Vec<u16> = {
            let mut on_support = vec![false; m];
            for &i in support {
                on_support[i as usize] = true;
            }
            (0..m as u16).filter(|&i| !on_support[i as usize]).collect()
        };
        let stats = &noise.groups[l];
        for pick in index::sample(&mut rng, complement.len(), k_n).iter() {
            let mag = sample_magnitude(stats, &mut rng);
            let sign = if rng.gen::<f64>() < stats.sign_p { 1.0 } else { -1.0 };
            entries.push((complement[pick], E::from_f64(sign * mag)));
        }
        entries.sort_unstable_by_key(|&(i, _)| i);
        groups.push(entries);
    }
    Ok(AmbiguatedCodes {
        item_id: codes.item_id.clone(),
        groups,
        code_len: m,
        k: codes.k,
        k_n,
    })
}

/// Keep only entries whose index is in the key. With the authentic key
/// this recovers the original codes bit-exactly.
pub fn purify<E: Scalar>(u_p: &AmbiguatedCodes<E>, key: &SupportKey) -> Result<SparseCodeMaps<E>> {
    if u_p.item_id != key.item_id {
        return Err(Error::ItemMismatch {
            expected: u_p.item_id.clone(),
            got: key.item_id.clone(),
        });
    }
    if key.groups.len() != u_p.groups.len() {
        return Err(Error::ShapeMismatch {
            op: "purify",
            axis: 0,
            expected: u_p.groups.len(),
            got: key.groups.len(),
        });
    }
    let m = u_p.code_len;
    let k = key.groups.first().map_or(0, Vec::len);
    key.validate(k, m)?;

    let mut codes = Vec::with_capacity(u_p.groups.len());
    for (g, key_g) in u_p.groups.iter().zip(key.groups.iter()) {
        let mut dense = vec![E::ZERO; m];
        for &(i, v) in g {
            if key_g.binary_search(&i).is_ok() {
                dense[i as usize] = v;
            }
        }
        codes.push(dense);
    }
    Ok(SparseCodeMaps {
        item_id: u_p.item_id.clone(),
        codes,
        supports: key.groups.clone(),
        k,
    })
}

/// Adversary's best move: a uniformly random k-subset of each group's
/// public support.
pub fn attack_random_guess<E: Scalar>(
    u_p: &AmbiguatedCodes<E>,
    k: usize,
    rng_seed: u64,
) -> Result<SupportKey> {
    let k_prime = u_p.k_prime();
    if k > k_prime {
        return Err(Error::BadArgument {
            op: "attack_random_guess",
            detail: format!("k = {k} exceeds public sparsity {k_prime}"),
        });
    }
    let mut rng = item_rng(rng_seed, &u_p.item_id);
    // decorrelate from the ambiguation stream sharing the same seed
    let _ = rng.next_u64();
    let groups = u_p
        .groups
        .iter()
        .map(|g| {
            let mut picked: Vec<u16> = index::sample(&mut rng, g.len(), k)
                .iter()
                .map(|i| g[i].0)
                .collect();
            picked.sort_unstable();
            picked
        })
        .collect();
    Ok(SupportKey {
        item_id: u_p.item_id.clone(),
        groups,
    })
}

/// Per-group cardinality of the support intersection (the shared-secrecy
/// statistic separating hypotheses H1 and H0).
pub fn verify_support(candidate: &SupportKey, reference: &SupportKey) -> Result<Vec<usize>> {
    if candidate.groups.len() != reference.groups.len() {
        return Err(Error::ShapeMismatch {
            op: "verify_support",
            axis: 0,
            expected: reference.groups.len(),
            got: candidate.groups.len(),
        });
    }
    Ok(candidate
        .groups
        .iter()
        .zip(reference.groups.iter())
        .map(|(c, r)| c.iter().filter(|i| r.binary_search(i).is_ok()).count())
        .collect())
}
