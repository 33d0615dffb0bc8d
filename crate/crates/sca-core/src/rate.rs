//! Exact and Stirling-approximate accounting of key size, public-store
//! size, per-pixel rate, and guessing complexity.

use alloc::format;

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// −α·log2 α − (1−α)·log2(1−α), with the limit convention at 0 and 1.
pub fn binary_entropy(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::BadArgument {
            op: "binary_entropy",
            detail: format!("alpha = {alpha} outside [0, 1]"),
        });
    }
    if alpha == 0.0 || alpha == 1.0 {
        return Ok(0.0);
    }
    Ok(-alpha * libm::log2(alpha) - (1.0 - alpha) * libm::log2(1.0 - alpha))
}

/// Largest n for which the binomial is computed by arbitrary-precision
/// integers; beyond this a log-gamma fallback takes over.
const BIGINT_LIMIT: u64 = 4096;

fn log2_binomial_bigint(n: u64, k: u64) -> f64 {
    // C(n, k) = Π (n−k+i)/i with exact intermediate divisions
    let k = k.min(n - k);
    let mut c = BigUint::from(1u32);
    for i in 1..=k {
        c = c * BigUint::from(n - k + i) / BigUint::from(i);
    }
    log2_biguint(&c)
}

/// log2 of a positive big integer via its top 53 bits.
fn log2_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 53 {
        let mut x = 0u64;
        for (i, d) in v.iter_u64_digits().enumerate() {
            if i == 0 {
                x = d;
            }
        }
        return libm::log2(x as f64);
    }
    let shift = bits - 53;
    let top = v >> shift;
    let mut x = 0u64;
    for (i, d) in top.iter_u64_digits().enumerate() {
        if i == 0 {
            x = d;
        }
    }
    libm::log2(x as f64) + shift as f64
}

fn log2_binomial_lgamma(n: u64, k: u64) -> f64 {
    let lg = |x: f64| libm::lgamma_r(x).0;
    (lg(n as f64 + 1.0) - lg(k as f64 + 1.0) - lg((n - k) as f64 + 1.0)) / core::f64::consts::LN_2
}

/// log2 C(n, k), exact to within 1e-9 relative error.
pub fn log2_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::BadArgument {
            op: "log2_binomial",
            detail: format!("k = {k} exceeds n = {n}"),
        });
    }
    if k == 0 || k == n {
        return Ok(0.0);
    }
    if n <= BIGINT_LIMIT {
        Ok(log2_binomial_bigint(n, k))
    } else {
        Ok(log2_binomial_lgamma(n, k))
    }
}

/// Bits to store one item's secret support: exact `L·log2 C(m,k)` and
/// the Stirling upper bound `m·L·H2(k/m)`.
pub fn secret_bits(m: usize, k: usize, l: usize) -> Result<(f64, f64)> {
    if k > m || l == 0 {
        return Err(Error::BadArgument {
            op: "secret_bits",
            detail: format!("need k <= m and L >= 1, got m={m}, k={k}, L={l}"),
        });
    }
    let exact = l as f64 * log2_binomial(m as u64, k as u64)?;
    let stirling = (m * l) as f64 * binary_entropy(k as f64 / m as f64)?;
    Ok((exact, stirling))
}

/// Approximate public-store bits per item at a given value quantization.
pub fn public_bits(m: usize, k_prime: usize, l: usize, bits_per_value: usize) -> Result<f64> {
    if bits_per_value < 1 {
        return Err(Error::BadArgument {
            op: "public_bits",
            detail: "bits_per_value must be >= 1".into(),
        });
    }
    if k_prime > m || l == 0 {
        return Err(Error::BadArgument {
            op: "public_bits",
            detail: format!("need k' <= m and L >= 1, got m={m}, k'={k_prime}, L={l}"),
        });
    }
    Ok((bits_per_value * m * l) as f64 * binary_entropy(k_prime as f64 / m as f64)?)
}

/// log2 of the adversary's guessing count: `L·log2 C(k', k)`.
pub fn guess_log2(k_prime: usize, k: usize, l: usize) -> Result<f64> {
    if k > k_prime {
        return Err(Error::BadArgument {
            op: "guess_log2",
            detail: format!("k = {k} exceeds k' = {k_prime}"),
        });
    }
    Ok(l as f64 * log2_binomial(k_prime as u64, k as u64)?)
}

/// Bits per pixel over all channels.
pub fn rate_bpp(secret_bits: f64, image_shape: (usize, usize, usize)) -> Result<f64> {
    let (c, h, w) = image_shape;
    let pixels = c * h * w;
    if pixels == 0 {
        return Err(Error::BadArgument {
            op: "rate_bpp",
            detail: format!("zero-size image {c}x{h}x{w}"),
        });
    }
    Ok(secret_bits / pixels as f64)
}

/// Complete rate/security accounting for one configuration. Exact and
/// Stirling figures are reported side by side; the linear-in-k figure is
/// the widely quoted alternative accounting that scales the quarter-
/// sparsity rate proportionally with k, which disagrees with the entropy
/// formula away from k = m/4.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub m: usize,
    pub k: usize,
    pub k_prime: usize,
    pub groups: usize,
    pub image_shape: (usize, usize, usize),
    pub secret_bits_exact: f64,
    pub secret_bits_stirling: f64,
    pub public_bits: f64,
    pub rate_bpp: f64,
    pub rate_bpp_linear_in_k: Option<f64>,
    pub guess_log2: f64,
}

pub const PUBLIC_VALUE_BITS: usize = 32;

impl RateReport {
    pub fn compute(
        m: usize,
        k: usize,
        k_n: usize,
        groups: usize,
        image_shape: (usize, usize, usize),
    ) -> Result<RateReport> {
        let k_prime = k + k_n;
        let (secret_exact, secret_stirling) = secret_bits(m, k, groups)?;
        let public = public_bits(m, k_prime, groups, PUBLIC_VALUE_BITS)?;
        let guess = guess_log2(k_prime, k, groups)?;
        let bpp = rate_bpp(secret_stirling, image_shape)?;
        // linear-in-k accounting anchored at quarter sparsity
        let linear = if m % 4 == 0 && m > 0 {
            let anchor_bits = (m * groups) as f64 * binary_entropy(0.25)?;
            Some(rate_bpp(
                anchor_bits * k as f64 / (m as f64 / 4.0),
                image_shape,
            )?)
        } else {
            None
        };
        Ok(RateReport {
            m,
            k,
            k_prime,
            groups,
            image_shape,
            secret_bits_exact: secret_exact,
            secret_bits_stirling: secret_stirling,
            public_bits: public,
            rate_bpp: bpp,
            rate_bpp_linear_in_k: linear,
            guess_log2: guess,
        })
    }
}
