//! Binary tree mechanism for private prefix sums.
//!
//! A length-Σ sequence of d-vectors is privatized by storing one Gaussian
//! noise vector per dyadic interval and releasing, for each prefix [1,t], the
//! sum of the O(log Σ) stored vectors whose intervals partition [1,t]. Each
//! prefix therefore accumulates only logarithmically many noise terms instead
//! of t of them.
//!
//! Nodes are the aligned dyadic intervals (u,v) with v−u+1 = 2^{ℓ−1} and
//! u ≡ 1 (mod 2^{ℓ−1}), for every level up to the capacity itself (the root
//! interval included), 2Σ−1 nodes in total for Σ a power of two.

use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::seeding::stream_rng;

/// Greedy dyadic decomposition of the prefix [1,t]: repeatedly take the
/// largest aligned dyadic interval starting right after what is covered.
/// Intervals are disjoint, contiguous, their union is [1,t], and there are at
/// most ⌈log₂ Σ⌉ + 1 of them (one per set bit of t).
pub fn node_intervals(t: u64, capacity: u64) -> Result<Vec<(u64, u64)>> {
    if t < 1 || t > capacity {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must satisfy 1 <= t <= {capacity}, got {t}"),
        });
    }
    let mut out = Vec::new();
    let mut covered = 0u64;
    while covered < t {
        // Largest power of two that fits in the remainder; alignment at
        // `covered` holds because chosen lengths strictly decrease.
        let len = prev_pow2(t - covered);
        out.push((covered + 1, covered + len));
        covered += len;
    }
    Ok(out)
}

fn prev_pow2(x: u64) -> u64 {
    debug_assert!(x >= 1);
    1u64 << (63 - x.leading_zeros())
}

fn next_pow2(x: u64) -> u64 {
    debug_assert!(x >= 1);
    x.next_power_of_two()
}

/// Per-node Gaussian noise store realizing the tree mechanism.
///
/// All node vectors are sampled eagerly at construction so that queries are
/// pure reads; regeneration from the same seed is bit-identical, and query
/// order can never affect the stored noise.
#[derive(Debug, Clone)]
pub struct TreeNoise {
    /// Requested sequence length; queries beyond it are rejected.
    len: u64,
    /// Storage capacity, `len` rounded up to a power of two.
    capacity: u64,
    sigma: f64,
    dim: usize,
    seed: u64,
    node_noise: BTreeMap<(u64, u64), Vec<f64>>,
}

/// Build a tree for sequences of length `len`, with per-coordinate noise
/// standard deviation `sigma` on every node.
pub fn init_tree(len: u64, dim: usize, sigma: f64, seed: u64) -> Result<TreeNoise> {
    if len < 1 {
        return Err(Error::InvalidParameter {
            name: "len",
            reason: "sequence length must be at least 1".into(),
        });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be finite and nonnegative, got {sigma}"),
        });
    }
    let capacity = next_pow2(len);
    let mut rng = stream_rng(seed, 0x54524545); // "TREE"
    let mut node_noise = BTreeMap::new();
    // Enumerate levels smallest-length first, left to right within a level;
    // the enumeration order is part of the determinism contract.
    let mut node_len = 1u64;
    while node_len <= capacity {
        let mut u = 1u64;
        while u <= capacity {
            let v = u + node_len - 1;
            let noise: Vec<f64> = if sigma == 0.0 {
                vec![0.0; dim]
            } else {
                (0..dim)
                    .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            };
            node_noise.insert((u, v), noise);
            u += node_len;
        }
        node_len *= 2;
    }
    Ok(TreeNoise {
        len,
        capacity,
        sigma,
        dim,
        seed,
        node_noise,
    })
}

impl TreeNoise {
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node_count(&self) -> usize {
        self.node_noise.len()
    }

    pub fn node(&self, u: u64, v: u64) -> Option<&[f64]> {
        self.node_noise.get(&(u, v)).map(|n| n.as_slice())
    }

    /// TREE(t): the total noise on the prefix sum [1,t]. A pure read; the sum
    /// is over the stored decomposition nodes, so re-querying never resamples.
    pub fn noise(&self, t: u64) -> Result<Vec<f64>> {
        if t < 1 || t > self.len {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("must satisfy 1 <= t <= {}, got {t}", self.len),
            });
        }
        let mut out = vec![0.0; self.dim];
        for (u, v) in node_intervals(t, self.capacity)? {
            let node = &self.node_noise[&(u, v)];
            for (o, n) in out.iter_mut().zip(node) {
                *o += n;
            }
        }
        Ok(out)
    }
}

/// Noise scale that makes the mechanism (ε,δ)-differentially private for a
/// per-step sensitivity `s` over a length-`cap` sequence:
/// σ = 4·s·√(ln cap · ln(1/δ))/ε.
pub fn calibrate_sigma(s: f64, cap: u64, eps: f64, delta: f64) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("sensitivity must be finite and nonnegative, got {s}"),
        });
    }
    if cap < 2 {
        return Err(Error::InvalidParameter {
            name: "cap",
            reason: format!("sequence length must be at least 2, got {cap}"),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive, got {eps}"),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must lie in (0,1), got {delta}"),
        });
    }
    Ok(4.0 * s * ((cap as f64).ln() * (1.0 / delta).ln()).sqrt() / eps)
}
