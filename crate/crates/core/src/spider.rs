//! The variance-reduced private optimizer.
//!
//! Each step chooses between a fresh-gradient call (O1, batch b) and a
//! cheaper gradient-difference update (O2, adaptive batch), gated by the
//! accumulated drift of the running estimate. The chosen estimate is
//! privatized with per-epoch tree noise, occasionally perturbed with
//! isotropic Gaussian noise to escape saddle regions (at most once per Γ
//! steps, and only when the previous estimate was small), and used for a
//! plain gradient step x ← x − η∇̃.
//!
//! Loop shape per step t (drift starts at κ so step 0 is forced O1):
//!   1. halt if t = T or the unused pool is not strictly larger than b;
//!   2. drift ≥ κ: ∇ ← O1(x) with batch b, drift ← 0, new tree epoch;
//!      else: ∇ ← ∇ + O2(x, x_prev) with batch b_t from ‖∇̃_{t−1}‖;
//!   3. if ‖∇̃_{t−1}‖ was below the gate threshold and the freeze expired:
//!      reset the freeze to Γ, drift ← 0, add perturbation g ~ N(0, ζ²/d·I);
//!      otherwise the freeze counter just decrements;
//!   4. ∇̃ ← ∇ + TREE(local step) (+ g); x ← x − η∇̃; drift += ‖∇̃‖.
//!
//! Runs are never projected: an iterate leaving the problem box flags the
//! run invalid and the loop keeps going (transient exits can re-enter),
//! stopping early only if the dynamics overflow to non-finite values. Every
//! step is recorded in full, so audits can replay decisions exactly.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::calibrate::Calibration;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, norm};
use crate::objective::{Dataset, ProblemSpec};
use crate::oracles::{adaptive_batch_size, oracle1, oracle2, OraclePool};
use crate::seeding::{derive_seed, stream_rng};
use crate::tree_mech::init_tree;

const PERTURB_STREAM: u64 = 0x50455254; // perturbation draws
const TREE_STREAM_BASE: u64 = 0x5452_0000_0000; // + epoch index

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    O1,
    O2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    /// All T steps executed.
    StepBudget,
    /// The unused pool was no longer strictly larger than the fresh batch b.
    DataExhausted,
    /// A gradient estimate or iterate stopped being finite. Possible only
    /// after the iterate has left the box (inside it every quantity is
    /// bounded), so such a run is already invalid; the partial step is
    /// discarded to keep every recorded value finite.
    Diverged,
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaltReason::StepBudget => write!(f, "step_budget"),
            HaltReason::DataExhausted => write!(f, "data_exhausted"),
            HaltReason::Diverged => write!(f, "diverged"),
        }
    }
}

/// What the drift counter accumulates. The estimator-norm rule is the
/// default; the squared-displacement variant exists for ablations only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftRule {
    #[default]
    EstimatorNorm,
    SquaredDisplacement,
}

impl fmt::Display for DriftRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftRule::EstimatorNorm => write!(f, "estimator_norm"),
            DriftRule::SquaredDisplacement => write!(f, "squared_displacement"),
        }
    }
}

impl FromStr for DriftRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimator_norm" => Ok(DriftRule::EstimatorNorm),
            "squared_displacement" => Ok(DriftRule::SquaredDisplacement),
            other => Err(Error::InvalidConfig(format!("unknown drift rule '{other}'"))),
        }
    }
}

/// Everything one optimizer step did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// Iterate at step entry (x_t).
    pub x: Vec<f64>,
    /// Pre-noise estimate ∇_t.
    pub grad_est: Vec<f64>,
    /// Privatized estimate ∇̃_t that the update used.
    pub noisy_grad: Vec<f64>,
    pub noisy_norm: f64,
    pub branch: Branch,
    pub batch_size: u64,
    /// Pool position of the first sample this step consumed.
    pub batch_start: u64,
    /// Worst-case one-swap sensitivity of this step's oracle output.
    pub sensitivity: f64,
    pub perturbed: bool,
    /// 1-based count of O1 calls so far; identifies the tree instance.
    pub epoch: u64,
    /// Drift value the branch decision saw.
    pub drift_entry: f64,
    /// Freeze counter after this step (Γ on perturbation, else decremented).
    pub frozen_after: i64,
    pub tree_noise_norm: f64,
    /// This step's adaptive batch was capped by the remaining pool.
    pub budget_truncated: bool,
}

/// Complete run record: per-step history plus run-level accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<StepRecord>,
    /// Iterate after the last executed step (the final candidate).
    pub final_x: Vec<f64>,
    pub halt: HaltReason,
    /// Samples consumed from the pool. Equals the sum of per-step batch
    /// sizes, plus the batch of the discarded final step on diverged runs
    /// (those samples were read, so budget accounting must count them).
    pub data_used: u64,
    pub epochs: u64,
    pub perturbation_count: u64,
    /// First candidate index that left the box, if any; such runs are
    /// invalid for certification but still fully recorded.
    pub box_exit: Option<u64>,
    /// Some adaptive batch was capped by the remaining pool.
    pub budget_truncated: bool,
    pub seed: u64,
}

impl Trace {
    /// Number of candidates ({x_1, …, x_t} for t executed steps).
    pub fn candidate_count(&self) -> u64 {
        self.steps.len() as u64
    }

    /// Candidate x_i, 1-based. x_i for i < t is recorded as step i's entry
    /// iterate; x_t is the final iterate.
    pub fn candidate(&self, i: u64) -> Option<&[f64]> {
        let t = self.steps.len() as u64;
        if i < 1 || i > t {
            return None;
        }
        if i < t {
            Some(&self.steps[i as usize].x)
        } else {
            Some(&self.final_x)
        }
    }

    /// All candidates in order.
    pub fn candidates(&self) -> impl Iterator<Item = &[f64]> {
        (1..=self.candidate_count()).map(|i| self.candidate(i).unwrap())
    }

    pub fn perturbed_steps(&self) -> Vec<u64> {
        self.steps
            .iter()
            .filter(|s| s.perturbed)
            .map(|s| s.t)
            .collect()
    }
}

pub fn run_spider(
    spec: &ProblemSpec,
    dataset: Dataset,
    calib: &Calibration,
    seed: u64,
) -> Result<Trace> {
    run_spider_with(spec, dataset, calib, seed, DriftRule::EstimatorNorm)
}

/// [`run_spider`] with an explicit drift rule.
pub fn run_spider_with(
    spec: &ProblemSpec,
    dataset: Dataset,
    calib: &Calibration,
    seed: u64,
    drift_rule: DriftRule,
) -> Result<Trace> {
    if spec.dim != calib.inputs.dim {
        return Err(Error::InvalidParameter {
            name: "calib",
            reason: format!(
                "calibration is for dimension {}, problem has {}",
                calib.inputs.dim, spec.dim
            ),
        });
    }
    let dim = spec.dim;
    let b = calib.batch_o1;
    let t_budget = calib.steps;
    let mut pool = OraclePool::new(dataset);
    let mut perturb_rng = stream_rng(seed, PERTURB_STREAM);

    let mut x = spec.x0.clone();
    let mut prev_x = x.clone();
    let mut grad_est = vec![0.0; dim];
    // drift starts at κ so the first step must take a fresh gradient; the
    // freeze counter starts at 1 so a perturbation cannot fire before t=1.
    let mut drift = calib.kappa;
    let mut frozen: i64 = 1;
    let mut prev_noisy_norm: Option<f64> = None;
    let mut epoch: u64 = 0;
    let mut epoch_step: u64 = 0;
    let mut tree = None;

    let mut steps: Vec<StepRecord> = Vec::new();
    let mut box_exit: Option<u64> = None;
    let mut any_truncated = false;
    let mut t = 0u64;
    let halt = loop {
        if t >= t_budget {
            break HaltReason::StepBudget;
        }
        if pool.remaining() <= b {
            break HaltReason::DataExhausted;
        }
        let drift_entry = drift;
        let (branch, receipt, truncated) = if drift >= calib.kappa {
            let (g, receipt) = oracle1(&mut pool, spec, &x, b)?;
            grad_est = g;
            drift = 0.0;
            epoch += 1;
            epoch_step = 1;
            let tree_seed = derive_seed(seed, TREE_STREAM_BASE.wrapping_add(epoch));
            tree = Some(init_tree(t_budget, dim, calib.sigma, tree_seed)?);
            (Branch::O1, receipt, false)
        } else {
            let prev_norm =
                prev_noisy_norm.expect("O2 cannot run at t=0: drift starts at kappa");
            let requested =
                adaptive_batch_size(prev_norm, calib.alpha, calib.inputs.eps, dim, calib.kappa)?;
            let available = pool.remaining();
            let (b_t, truncated) = if requested > available {
                (available, true)
            } else {
                (requested, false)
            };
            let (dg, receipt) = oracle2(&mut pool, spec, &x, &prev_x, b_t)?;
            for (a, v) in grad_est.iter_mut().zip(&dg) {
                *a += v;
            }
            epoch_step += 1;
            if truncated {
                any_truncated = true;
            }
            (Branch::O2, receipt, truncated)
        };
        let tree_vec = tree
            .as_ref()
            .expect("tree exists from the first (forced O1) step on")
            .noise(epoch_step)?;

        // The gate reads the previous step's record; at t=0 there is none.
        let fire = match prev_noisy_norm {
            Some(nrm) => nrm <= calib.small_grad_threshold && frozen <= 0,
            None => false,
        };
        let mut noisy: Vec<f64> = grad_est.iter().zip(&tree_vec).map(|(g, w)| g + w).collect();
        if fire {
            frozen = calib.frozen_period as i64;
            drift = 0.0;
            if calib.zeta > 0.0 {
                let scale = calib.zeta / (dim as f64).sqrt();
                for v in noisy.iter_mut() {
                    let draw: f64 = perturb_rng.sample(StandardNormal);
                    *v += scale * draw;
                }
            }
        } else {
            frozen -= 1;
        }
        let noisy_norm = norm(&noisy);
        let next_x: Vec<f64> = x
            .iter()
            .zip(&noisy)
            .map(|(xi, gi)| xi - calib.eta * gi)
            .collect();
        // Overflow can only follow a box exit; stop before committing any
        // non-finite value (x stays finite by induction, so oracle outputs
        // can reach ±inf but never NaN before this trips).
        if !noisy_norm.is_finite() || next_x.iter().any(|v| !v.is_finite()) {
            break HaltReason::Diverged;
        }

        steps.push(StepRecord {
            t,
            x: x.clone(),
            grad_est: grad_est.clone(),
            noisy_grad: noisy,
            noisy_norm,
            branch,
            batch_size: receipt.batch_size,
            batch_start: receipt.start_index,
            sensitivity: receipt.sensitivity_bound,
            perturbed: fire,
            epoch,
            drift_entry,
            frozen_after: frozen,
            tree_noise_norm: norm(&tree_vec),
            budget_truncated: truncated,
        });

        match drift_rule {
            DriftRule::EstimatorNorm => drift += noisy_norm,
            DriftRule::SquaredDisplacement => {
                let step_len = calib.eta * noisy_norm;
                drift += step_len * step_len;
            }
        }
        prev_noisy_norm = Some(noisy_norm);
        prev_x = x;
        x = next_x;
        t += 1;
        if box_exit.is_none() && !spec.in_box(&x) {
            box_exit = Some(t);
        }
    };
    // Run-level counters describe the recorded prefix; a diverged final step
    // may have started an epoch or fired a perturbation that was discarded.
    let epochs = steps.iter().filter(|s| s.branch == Branch::O1).count() as u64;
    let perturbation_count = steps.iter().filter(|s| s.perturbed).count() as u64;
    Ok(Trace {
        steps,
        final_x: x,
        halt,
        data_used: pool.consumed(),
        epochs,
        perturbation_count,
        box_exit,
        budget_truncated: any_truncated,
        seed,
    })
}

/// Which candidate a selection chose and why. Selection consults the exact
/// population oracle, so its output must never be reported as private.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDiagnostics {
    /// 1-based candidate index.
    pub candidate_index: u64,
    pub grad_norm: f64,
    pub min_eig: f64,
    /// max(grad_norm/α, normalized curvature violation); 0 means certified.
    pub score: f64,
    /// Always true: the population oracle is not a private mechanism.
    pub non_private: bool,
}

/// Pick the candidate closest to certification: smallest
/// max(‖∇F_P(x)‖/α, ((−λ_min)−√(ρα))⁺/√(ρα)), earliest index on ties.
/// Candidates outside the box are skipped.
pub fn select_best_candidate(
    trace: &Trace,
    spec: &ProblemSpec,
    alpha: f64,
) -> Result<(Vec<f64>, SelectionDiagnostics)> {
    if trace.steps.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be positive and finite, got {alpha}"),
        });
    }
    let threshold = (spec.rho_hessian * alpha).sqrt();
    let mut best: Option<(f64, u64, f64, f64)> = None;
    for (i, cand) in trace.candidates().enumerate() {
        let index = i as u64 + 1;
        if !spec.in_box(cand) {
            continue;
        }
        let grad_norm = norm(&spec.gradient_raw(cand));
        let min_eig = min_eigenvalue(&spec.hessian_raw(cand), 1e-9)?;
        let violation = -min_eig - threshold;
        let curvature_score = if violation <= 0.0 {
            0.0
        } else if threshold > 0.0 {
            violation / threshold
        } else {
            f64::INFINITY
        };
        let score = (grad_norm / alpha).max(curvature_score);
        let better = match &best {
            None => true,
            Some((s, _, _, _)) => score < *s,
        };
        if better {
            best = Some((score, index, grad_norm, min_eig));
        }
    }
    let (score, candidate_index, grad_norm, min_eig) = best.ok_or(Error::OutOfDomain {
        radius: spec.domain_radius,
    })?;
    let point = trace.candidate(candidate_index).unwrap().to_vec();
    Ok((
        point,
        SelectionDiagnostics {
            candidate_index,
            grad_norm,
            min_eig,
            score,
            non_private: true,
        },
    ))
}
