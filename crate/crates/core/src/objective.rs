//! Synthetic stochastic objective families.
//!
//! Each family gives a population objective F_P with closed-form gradient and
//! Hessian, plus a per-sample perturbation model so that sample gradients are
//! stochastic but their population mean is exactly the base gradient. Ground
//! truth being exact is what lets the verification layer turn tail bounds and
//! descent inequalities into crisp assertions.
//!
//! Families:
//! - `quadratic_bowl`: h(x) = ‖x‖²/2, strongly convex, no negative curvature.
//! - `quartic_saddle`: h(x) = Σ_i (x_i⁴/4 − x_i²/2), a strict saddle at the
//!   origin with curvature −1 in every direction; the canonical escape test.
//!
//! Noise models perturb per-sample gradients:
//! - `linear`: ∇f(x;z) = ∇h(x) + z₁ with z₁ uniform in a ball of radius s_z.
//!   Gradient differences cancel z₁, so variance-reduced oracles see zero
//!   sample variance; useful for isolating privacy-noise effects.
//! - `linear_plus_curvature`: additionally diag(z₂)·x with z₂ coordinates
//!   uniform in [−s_z, s_z], so gradient-difference error scales with the
//!   step length.
//!
//! All regularity constants (gradient bound G, smoothness M, Hessian
//! Lipschitz ρ, initial value gap B) are certified by closed-form suprema
//! over the box |x_i| ≤ R, not asymptotic estimates.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::seeding::stream_rng;

/// Cap on certified constants; a noise scale that pushes any constant past
/// this is rejected at construction rather than producing absurd calibrations.
pub const CONSTANT_CAP: f64 = 1.0e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    QuadraticBowl,
    QuarticSaddle,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::QuadraticBowl => write!(f, "quadratic_bowl"),
            Family::QuarticSaddle => write!(f, "quartic_saddle"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic_bowl" => Ok(Family::QuadraticBowl),
            "quartic_saddle" => Ok(Family::QuarticSaddle),
            other => Err(Error::InvalidConfig(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    Linear,
    LinearPlusCurvature,
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::None => write!(f, "none"),
            NoiseModel::Linear => write!(f, "linear"),
            NoiseModel::LinearPlusCurvature => write!(f, "linear_plus_curvature"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoiseModel::None),
            "linear" => Ok(NoiseModel::Linear),
            "linear_plus_curvature" => Ok(NoiseModel::LinearPlusCurvature),
            other => Err(Error::InvalidConfig(format!("unknown noise model '{other}'"))),
        }
    }
}

/// A stochastic objective with exact population quantities and certified
/// regularity constants on the box |x_i| ≤ domain_radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub family: Family,
    pub dim: usize,
    /// Box half-width R; the feasible region is |x_i| ≤ R per coordinate.
    pub domain_radius: f64,
    pub noise_model: NoiseModel,
    pub noise_scale: f64,
    /// Certified bound on ‖∇f(x;z)‖ over the box, any sample.
    pub g_lipschitz: f64,
    /// Certified smoothness constant: ‖∇²f(x;z)‖ ≤ M over the box.
    pub m_smooth: f64,
    /// Certified Hessian Lipschitz constant of F_P (and every sample).
    pub rho_hessian: f64,
    /// Certified bound on F_P(x0) − inf F_P.
    pub b_gap: f64,
    /// Public initial point.
    pub x0: Vec<f64>,
}

/// One sample's noise record. `linear` is z₁; `curvature` is z₂ and stays
/// empty unless the model is `linear_plus_curvature`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleNoise {
    pub linear: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl SampleNoise {
    fn zero() -> Self {
        SampleNoise {
            linear: Vec::new(),
            curvature: Vec::new(),
        }
    }
}

/// Ordered pool of i.i.d. noise records with a single-use consumption cursor.
/// Never serialized; regeneration from (spec, n, seed) is bit-identical.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<SampleNoise>,
    cursor: usize,
    seed: u64,
}

impl Dataset {
    /// Assemble a pool from explicit records, e.g. for sensitivity tests
    /// that need two pools differing in exactly one sample.
    pub fn from_records(samples: Vec<SampleNoise>, seed: u64) -> Self {
        Dataset {
            samples,
            cursor: 0,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn remaining(&self) -> u64 {
        (self.samples.len() - self.cursor) as u64
    }

    pub fn consumed(&self) -> u64 {
        self.cursor as u64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Read-only view of every record, e.g. for empirical means over the
    /// whole pool. Does not move the cursor.
    pub fn samples(&self) -> &[SampleNoise] {
        &self.samples
    }

    /// Consume the next `k` records. Each record is handed out at most once.
    pub fn take_batch(&mut self, k: u64) -> Result<&[SampleNoise]> {
        let remaining = self.remaining();
        if k > remaining {
            return Err(Error::InsufficientData {
                requested: k,
                remaining,
            });
        }
        let start = self.cursor;
        self.cursor += k as usize;
        Ok(&self.samples[start..self.cursor])
    }
}

/// Build a problem spec with constants certified on the box.
pub fn make_problem(
    family: Family,
    dim: usize,
    noise_model: NoiseModel,
    noise_scale: f64,
) -> Result<ProblemSpec> {
    if dim == 0 {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: "must be at least 1".into(),
        });
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "noise_scale",
            reason: format!("must be finite and nonnegative, got {noise_scale}"),
        });
    }
    let radius = 2.0;
    let d = dim as f64;
    // Base suprema over the box. quartic: |x³−x| ≤ 6 per coordinate on
    // |x| ≤ 2, Hessian diag(3x²−1) ∈ [−1, 11], third derivative |6x| ≤ 12.
    let (g_base, m_base, rho, b_gap, x0) = match family {
        Family::QuadraticBowl => (radius * d.sqrt(), 1.0, 0.0, d / 2.0, vec![1.0; dim]),
        Family::QuarticSaddle => (6.0 * d.sqrt(), 11.0, 12.0, d / 4.0, vec![0.0; dim]),
    };
    let s = match noise_model {
        NoiseModel::None => 0.0,
        _ => noise_scale,
    };
    let (g, m) = match noise_model {
        NoiseModel::None | NoiseModel::Linear => (g_base + s, m_base),
        // diag(z₂)x adds at most s·R√d to the gradient and s to the Hessian.
        NoiseModel::LinearPlusCurvature => (g_base + s + s * radius * d.sqrt(), m_base + s),
    };
    for (name, v) in [("G", g), ("M", m), ("rho", rho), ("B", b_gap)] {
        if v > CONSTANT_CAP {
            let _ = name;
            return Err(Error::NoiseScaleTooLarge {
                scale: noise_scale,
                cap: CONSTANT_CAP,
            });
        }
    }
    Ok(ProblemSpec {
        family,
        dim,
        domain_radius: radius,
        noise_model,
        noise_scale: s,
        g_lipschitz: g,
        m_smooth: m,
        rho_hessian: rho,
        b_gap,
        x0,
    })
}

/// Generate `n` i.i.d. noise records, deterministic given the seed.
pub fn generate_dataset(spec: &ProblemSpec, n: u64, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 0x44415441); // "DATA"
    let d = spec.dim;
    let s = spec.noise_scale;
    let samples = (0..n)
        .map(|_| match spec.noise_model {
            NoiseModel::None => SampleNoise::zero(),
            NoiseModel::Linear => SampleNoise {
                linear: ball_uniform(&mut rng, d, s),
                curvature: Vec::new(),
            },
            NoiseModel::LinearPlusCurvature => SampleNoise {
                linear: ball_uniform(&mut rng, d, s),
                curvature: (0..d).map(|_| rng.gen_range(-s..=s)).collect(),
            },
        })
        .collect();
    Dataset {
        samples,
        cursor: 0,
        seed,
    }
}

/// Uniform draw from the ball of radius `r` in dimension `d`.
fn ball_uniform<R: Rng>(rng: &mut R, d: usize, r: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = crate::linalg::norm(&v);
    let u: f64 = rng.gen();
    if r == 0.0 || norm == 0.0 {
        return vec![0.0; d];
    }
    let scale = r * u.powf(1.0 / d as f64) / norm;
    for c in &mut v {
        *c *= scale;
    }
    v
}

impl ProblemSpec {
    pub fn in_box(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|&c| c.abs() <= self.domain_radius)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                want: self.dim,
                got: x.len(),
            });
        }
        if !self.in_box(x) {
            return Err(Error::OutOfDomain {
                radius: self.domain_radius,
            });
        }
        Ok(())
    }

    /// F_P(x). Population noise means are zero, so this is the base value.
    pub fn population_value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.value_raw(x))
    }

    /// ∇F_P(x), exact.
    pub fn population_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.gradient_raw(x))
    }

    /// ∇²F_P(x), exact.
    pub fn population_hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        self.check_point(x)?;
        Ok(self.hessian_raw(x))
    }

    /// ∇f(x;z) for one sample.
    pub fn sample_gradient(&self, z: &SampleNoise, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.sample_gradient_raw(z, x))
    }

    /// ∇²f(x;z) for one sample; differs from the population Hessian only
    /// under the curvature noise model.
    pub fn sample_hessian(&self, z: &SampleNoise, x: &[f64]) -> Result<SymMatrix> {
        self.check_point(x)?;
        let mut h = self.hessian_raw(x);
        if !z.curvature.is_empty() {
            for (i, &c) in z.curvature.iter().enumerate() {
                h.add(i, i, c);
            }
        }
        Ok(h)
    }

    // Raw closed forms without the box check. The optimizer keeps evaluating
    // after an iterate leaves the box (the run is flagged, not projected), so
    // internal callers need these.

    pub(crate) fn value_raw(&self, x: &[f64]) -> f64 {
        match self.family {
            Family::QuadraticBowl => 0.5 * crate::linalg::dot(x, x),
            Family::QuarticSaddle => x
                .iter()
                .map(|&c| 0.25 * c * c * c * c - 0.5 * c * c)
                .sum(),
        }
    }

    pub(crate) fn gradient_raw(&self, x: &[f64]) -> Vec<f64> {
        match self.family {
            Family::QuadraticBowl => x.to_vec(),
            Family::QuarticSaddle => x.iter().map(|&c| c * c * c - c).collect(),
        }
    }

    pub(crate) fn hessian_raw(&self, x: &[f64]) -> SymMatrix {
        match self.family {
            Family::QuadraticBowl => SymMatrix::identity(self.dim),
            Family::QuarticSaddle => {
                let diag: Vec<f64> = x.iter().map(|&c| 3.0 * c * c - 1.0).collect();
                SymMatrix::from_diag(&diag)
            }
        }
    }

    pub(crate) fn sample_gradient_raw(&self, z: &SampleNoise, x: &[f64]) -> Vec<f64> {
        let mut g = self.gradient_raw(x);
        if !z.linear.is_empty() {
            for (gi, zi) in g.iter_mut().zip(&z.linear) {
                *gi += zi;
            }
        }
        if !z.curvature.is_empty() {
            for ((gi, ci), xi) in g.iter_mut().zip(&z.curvature).zip(x) {
                *gi += ci * xi;
            }
        }
        g
    }

    /// Global minimum of F_P, for value-gap assertions in tests.
    pub fn population_inf(&self) -> f64 {
        match self.family {
            Family::QuadraticBowl => 0.0,
            Family::QuarticSaddle => -(self.dim as f64) / 4.0,
        }
    }
}
