//! Shared helpers for the integration suites.
//!
//! The centerpiece is a from-scratch plain SpiderBoost loop used as a
//! reference: with every noise source at zero, the optimizer must reproduce
//! it bit for bit. The reference deliberately avoids the library's oracle
//! and pool machinery — it walks the raw sample slice with its own cursor —
//! so a bookkeeping bug in either implementation shows up as a mismatch.

use dp_spider::objective::SampleNoise;
use dp_spider::spider::{Branch, HaltReason, Trace};
use dp_spider::{Calibration, ProblemSpec};

pub struct RefStep {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub norm: f64,
    pub fresh: bool,
    pub batch: u64,
    pub perturbed: bool,
}

pub struct RefRun {
    pub steps: Vec<RefStep>,
    pub final_x: Vec<f64>,
    pub data_used: u64,
    /// True when the pool gate stopped the loop, false on step budget.
    pub exhausted: bool,
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Plain SpiderBoost: drift-gated O1/O2 choice, adaptive difference batches,
/// freeze-gated (but zero-magnitude) perturbation events, step x ← x − ηg.
/// Valid only for σ = ζ = 0 calibrations.
pub fn plain_spiderboost(
    spec: &ProblemSpec,
    samples: &[SampleNoise],
    calib: &Calibration,
) -> RefRun {
    assert_eq!(calib.sigma, 0.0, "reference models no tree noise");
    assert_eq!(calib.zeta, 0.0, "reference models no perturbation noise");
    let d = spec.dim;
    let b = calib.batch_o1;
    let eps = calib.inputs.eps;

    // O1 sums then divides, walking the pool in order: the reference must
    // reproduce the library's arithmetic order exactly, not just its value.
    fn mean_grad(
        spec: &ProblemSpec,
        samples: &[SampleNoise],
        cursor: &mut usize,
        x: &[f64],
        count: u64,
    ) -> Vec<f64> {
        let mut acc = vec![0.0; spec.dim];
        for z in &samples[*cursor..*cursor + count as usize] {
            let g = spec.sample_gradient(z, x).expect("reference stays in box");
            for (a, gi) in acc.iter_mut().zip(&g) {
                *a += gi;
            }
        }
        *cursor += count as usize;
        for a in &mut acc {
            *a /= count as f64;
        }
        acc
    }
    // O2 sums per-sample differences before dividing, so the subtraction
    // happens inside the sum — mirrored here for exact arithmetic order.
    fn mean_grad_diff(
        spec: &ProblemSpec,
        samples: &[SampleNoise],
        cursor: &mut usize,
        x: &[f64],
        prev: &[f64],
        count: u64,
    ) -> Vec<f64> {
        let mut acc = vec![0.0; spec.dim];
        for z in &samples[*cursor..*cursor + count as usize] {
            let gt = spec.sample_gradient(z, x).expect("reference stays in box");
            let gp = spec
                .sample_gradient(z, prev)
                .expect("reference stays in box");
            for ((a, t), p) in acc.iter_mut().zip(&gt).zip(&gp) {
                *a += t - p;
            }
        }
        *cursor += count as usize;
        for a in &mut acc {
            *a /= count as f64;
        }
        acc
    }

    let mut cursor = 0usize;

    let mut x = spec.x0.clone();
    let mut prev_x = x.clone();
    let mut grad = vec![0.0; d];
    let mut drift = calib.kappa;
    let mut frozen: i64 = 1;
    let mut prev_norm: Option<f64> = None;
    let mut steps = Vec::new();
    let mut t = 0u64;
    let exhausted = loop {
        if t >= calib.steps {
            break false;
        }
        let remaining = (samples.len() - cursor) as u64;
        if remaining <= b {
            break true;
        }
        let (fresh, batch) = if drift >= calib.kappa {
            grad = mean_grad(spec, samples, &mut cursor, &x, b);
            drift = 0.0;
            (true, b)
        } else {
            let nrm = prev_norm.expect("first step is forced fresh");
            let privacy = if eps.is_finite() {
                nrm * (d as f64).sqrt() / (calib.alpha * eps)
            } else {
                0.0
            };
            let variance = nrm * calib.kappa / (calib.alpha * calib.alpha);
            let requested = privacy.max(variance).max(1.0).ceil() as u64;
            let b_t = requested.min(remaining);
            let diff = mean_grad_diff(spec, samples, &mut cursor, &x, &prev_x, b_t);
            for (a, v) in grad.iter_mut().zip(&diff) {
                *a += v;
            }
            (false, b_t)
        };
        let fire = match prev_norm {
            Some(nrm) => nrm <= calib.small_grad_threshold && frozen <= 0,
            None => false,
        };
        if fire {
            frozen = calib.frozen_period as i64;
            drift = 0.0;
        } else {
            frozen -= 1;
        }
        let nrm = vec_norm(&grad);
        let next: Vec<f64> = x
            .iter()
            .zip(&grad)
            .map(|(xi, gi)| xi - calib.eta * gi)
            .collect();
        steps.push(RefStep {
            x: x.clone(),
            grad: grad.clone(),
            norm: nrm,
            fresh,
            batch,
            perturbed: fire,
        });
        drift += nrm;
        prev_norm = Some(nrm);
        prev_x = x;
        x = next;
        t += 1;
    };
    RefRun {
        steps,
        final_x: x,
        data_used: cursor as u64,
        exhausted,
    }
}

/// Every float compared through its bit pattern: the noise-off trace and the
/// reference loop must be indistinguishable.
pub fn assert_bit_identical(trace: &Trace, reference: &RefRun, label: &str) {
    assert_eq!(
        trace.steps.len(),
        reference.steps.len(),
        "{label}: step counts differ"
    );
    let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
    for (s, r) in trace.steps.iter().zip(&reference.steps) {
        let t = s.t;
        assert_eq!(bits(&s.x), bits(&r.x), "{label}: x at t={t}");
        assert_eq!(bits(&s.grad_est), bits(&r.grad), "{label}: grad at t={t}");
        assert_eq!(
            bits(&s.noisy_grad),
            bits(&r.grad),
            "{label}: zero noise must leave the estimate untouched at t={t}"
        );
        assert_eq!(
            s.noisy_norm.to_bits(),
            r.norm.to_bits(),
            "{label}: norm at t={t}"
        );
        assert_eq!(
            s.branch == Branch::O1,
            r.fresh,
            "{label}: branch at t={t}"
        );
        assert_eq!(s.batch_size, r.batch, "{label}: batch at t={t}");
        assert_eq!(s.perturbed, r.perturbed, "{label}: perturbation at t={t}");
    }
    assert_eq!(
        bits(&trace.final_x),
        bits(&reference.final_x),
        "{label}: final iterate"
    );
    assert_eq!(trace.data_used, reference.data_used, "{label}: data used");
    let expect_halt = if reference.exhausted {
        HaltReason::DataExhausted
    } else {
        HaltReason::StepBudget
    };
    assert_eq!(trace.halt, expect_halt, "{label}: halt reason");
}
