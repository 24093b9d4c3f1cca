//! Stochastic gradient oracles with single-use batch accounting.
//!
//! Two oracles feed the optimizer: O1 returns a fresh mean gradient over a
//! fixed batch b, O2 returns a mean gradient difference over an adaptive
//! batch b_t sized from the norm of the previous estimate. Batches are
//! contiguous unused prefixes of a pre-generated i.i.d. pool, so no sample is
//! ever used twice — the precondition for composing privacy across steps in
//! parallel.
//!
//! Each call also reports the worst-case sensitivity of its output to
//! swapping one batch sample; tree-noise calibration consumes the uniform
//! bound over these.

use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::objective::{Dataset, ProblemSpec};

/// Single-owner wrapper around a dataset, tracking consumption.
#[derive(Debug)]
pub struct OraclePool {
    dataset: Dataset,
}

/// What a single oracle call used and how sensitive its output is.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReceipt {
    pub batch_size: u64,
    /// Index of the first sample consumed (0-based position in the pool).
    pub start_index: u64,
    /// Worst-case output change under a one-sample swap.
    pub sensitivity_bound: f64,
}

impl OraclePool {
    pub fn new(dataset: Dataset) -> Self {
        OraclePool { dataset }
    }

    pub fn remaining(&self) -> u64 {
        self.dataset.remaining()
    }

    pub fn consumed(&self) -> u64 {
        self.dataset.consumed()
    }

    pub fn total(&self) -> u64 {
        self.dataset.len() as u64
    }
}

/// Fresh-gradient oracle: mean of ∇f(x;z) over the next `b` unused samples.
///
/// The iterate is not box-checked: the optimizer keeps evaluating after a
/// flagged box exit. Dimension mismatches still fail.
pub fn oracle1(
    pool: &mut OraclePool,
    spec: &ProblemSpec,
    x: &[f64],
    b: u64,
) -> Result<(Vec<f64>, BatchReceipt)> {
    check_dim(spec, x)?;
    if b < 1 {
        return Err(Error::InvalidParameter {
            name: "b",
            reason: "batch size must be at least 1".into(),
        });
    }
    let start_index = pool.consumed();
    let batch = pool.dataset.take_batch(b)?;
    // Sum then divide, in pool order: the arithmetic order is part of the
    // reproducibility contract.
    let mut acc = vec![0.0; spec.dim];
    for z in batch {
        let g = spec.sample_gradient_raw(z, x);
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += gi;
        }
    }
    for a in &mut acc {
        *a /= b as f64;
    }
    let receipt = BatchReceipt {
        batch_size: b,
        start_index,
        sensitivity_bound: sensitivity_bound_o1(spec.g_lipschitz, b),
    };
    Ok((acc, receipt))
}

/// Gradient-difference oracle: mean of ∇f(x_t;z) − ∇f(x_prev;z) over the
/// next `b_t` unused samples.
pub fn oracle2(
    pool: &mut OraclePool,
    spec: &ProblemSpec,
    x_t: &[f64],
    x_prev: &[f64],
    b_t: u64,
) -> Result<(Vec<f64>, BatchReceipt)> {
    check_dim(spec, x_t)?;
    check_dim(spec, x_prev)?;
    if b_t < 1 {
        return Err(Error::InvalidParameter {
            name: "b_t",
            reason: "batch size must be at least 1".into(),
        });
    }
    let start_index = pool.consumed();
    let batch = pool.dataset.take_batch(b_t)?;
    let mut acc = vec![0.0; spec.dim];
    for z in batch {
        let gt = spec.sample_gradient_raw(z, x_t);
        let gp = spec.sample_gradient_raw(z, x_prev);
        for ((a, t), p) in acc.iter_mut().zip(&gt).zip(&gp) {
            *a += t - p;
        }
    }
    for a in &mut acc {
        *a /= b_t as f64;
    }
    let receipt = BatchReceipt {
        batch_size: b_t,
        start_index,
        sensitivity_bound: sensitivity_bound_o2(spec.m_smooth, dist(x_t, x_prev), b_t),
    };
    Ok((acc, receipt))
}

/// Adaptive batch size for the difference oracle:
/// ⌈max{‖∇̃‖√d/(αε), ‖∇̃‖κ/α², 1}⌉, where ‖∇̃‖ is the estimate that
/// produced the current displacement. The privacy term vanishes as ε→∞.
pub fn adaptive_batch_size(
    step_norm: f64,
    alpha: f64,
    eps: f64,
    dim: usize,
    kappa: f64,
) -> Result<u64> {
    if !(step_norm >= 0.0 && step_norm.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "step_norm",
            reason: format!("must be finite and nonnegative, got {step_norm}"),
        });
    }
    if !(alpha > 0.0) || !(eps > 0.0) || !(kappa > 0.0) || dim < 1 {
        return Err(Error::InvalidParameter {
            name: "adaptive_batch_size",
            reason: "alpha, eps, kappa must be positive and dim >= 1".into(),
        });
    }
    let d = dim as f64;
    let privacy = if eps.is_finite() {
        step_norm * d.sqrt() / (alpha * eps)
    } else {
        0.0
    };
    let variance = step_norm * kappa / (alpha * alpha);
    Ok(privacy.max(variance).max(1.0).ceil() as u64)
}

/// Sensitivity of O1 to a one-sample swap: the swapped summand changes by at
/// most two gradient norms, so the mean moves by at most 2G/b.
pub fn sensitivity_bound_o1(g: f64, b: u64) -> f64 {
    debug_assert!(g > 0.0 && b >= 1);
    2.0 * g / b as f64
}

/// Sensitivity of O2 to a one-sample swap: each summand is a gradient
/// difference of norm ≤ M·‖x_t−x_prev‖, so the mean moves by at most twice
/// that over b_t.
pub fn sensitivity_bound_o2(m: f64, displacement_norm: f64, b_t: u64) -> f64 {
    debug_assert!(m > 0.0 && displacement_norm >= 0.0 && b_t >= 1);
    2.0 * m * displacement_norm / b_t as f64
}

fn check_dim(spec: &ProblemSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            want: spec.dim,
            got: x.len(),
        });
    }
    Ok(())
}
