//! Seeded nonparametric bootstrap confidence intervals.
//!
//! Records are resampled with replacement independently within each arm (the
//! two populations are independent by design of the deployment), the chosen
//! estimator is re-evaluated per replicate, and the percentile interval is
//! read off the replicate distribution. Replicate randomness is derived from
//! the master seed by a counter-based stream split, so replicates can be
//! evaluated in any order, or in parallel, with bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::{build_counts, ContingencyCounts};
use crate::error::{Error, Result};
use crate::estimators::{self, Method, Metric, RatioEstimate, SoftSums};
use crate::record::{Arm, ArmTraffic, Dataset, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Confidence level in (0, 1).
    pub level: f64,
    /// Master seed; every replicate derives its own RNG stream from it.
    pub seed: u64,
}

impl BootstrapConfig {
    /// 1000 replicates at the 95% level.
    pub fn new(seed: u64) -> Self {
        BootstrapConfig {
            replicates: 1000,
            level: 0.95,
            seed,
        }
    }
}

/// Which estimator to resample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    DirectRRecall,
    DirectRFpr,
    ApproxRRecall,
    ApproxRFpr,
    SsRRecall,
    SsRFpr,
    /// Classic A/B-test rFPR; requires arm traffic.
    AbTestRFpr,
}

impl Estimator {
    pub fn metric(self) -> Metric {
        match self {
            Estimator::DirectRRecall | Estimator::ApproxRRecall | Estimator::SsRRecall => {
                Metric::RRecall
            }
            _ => Metric::RFpr,
        }
    }

    pub fn method(self) -> Method {
        match self {
            Estimator::DirectRRecall | Estimator::DirectRFpr => Method::Direct,
            Estimator::ApproxRRecall | Estimator::ApproxRFpr => Method::Approx,
            Estimator::SsRRecall | Estimator::SsRFpr => Method::SemiSupervised,
            Estimator::AbTestRFpr => Method::AbTest,
        }
    }

    fn needs_soft_labels(self) -> bool {
        matches!(self, Estimator::SsRRecall | Estimator::SsRFpr)
    }
}

/// A bootstrap interval plus the number of replicates that had to be dropped
/// because the estimator was undefined on the resample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub estimate: RatioEstimate,
    pub dropped_replicates: usize,
}

// Compact per-record state so a replicate never touches strings. Slots:
// 0 unlabeled, 1 pos, 2 pos+cross, 3 neg, 4 neg+cross.
enum CompactArms {
    Counts([Vec<(f64, u8)>; 2]),
    // (w * p, w * (1 - p), cross)
    Soft([Vec<(f64, f64, bool)>; 2]),
}

const MISSING_LIST_CAP: usize = 10;

impl CompactArms {
    fn build(dataset: &Dataset, thresholds: &Thresholds, soft: bool) -> Result<Self> {
        if soft {
            let mut arms = [Vec::new(), Vec::new()];
            let mut missing = Vec::new();
            let mut missing_count = 0usize;
            for rec in dataset.records() {
                let Some(p) = rec.soft_tp_prob else {
                    missing_count += 1;
                    if missing.len() < MISSING_LIST_CAP {
                        missing.push(rec.id.clone());
                    }
                    continue;
                };
                let w = rec.sampling_weight;
                arms[arm_index(rec.arm)].push((
                    w * p,
                    w * (1.0 - p),
                    rec.cross_accepted(thresholds),
                ));
            }
            if missing_count > 0 {
                return Err(Error::MissingSoftLabels {
                    count: missing_count,
                    first: missing,
                });
            }
            Ok(CompactArms::Soft(arms))
        } else {
            let mut arms = [Vec::new(), Vec::new()];
            for rec in dataset.records() {
                let slot = match (rec.hard_label, rec.cross_accepted(thresholds)) {
                    (None, _) => 0u8,
                    (Some(1), false) => 1,
                    (Some(1), true) => 2,
                    (Some(_), false) => 3,
                    (Some(_), true) => 4,
                };
                arms[arm_index(rec.arm)].push((rec.sampling_weight, slot));
            }
            Ok(CompactArms::Counts(arms))
        }
    }
}

fn arm_index(arm: Arm) -> usize {
    match arm {
        Arm::A => 0,
        Arm::B => 1,
    }
}

fn resample_slots(records: &[(f64, u8)], rng: &mut ChaCha8Rng) -> [f64; 5] {
    let n = records.len();
    let mut acc = [0.0f64; 5];
    for _ in 0..n {
        let (w, slot) = records[rng.random_range(0..n)];
        acc[slot as usize] += w;
    }
    acc
}

fn resample_soft(records: &[(f64, f64, bool)], rng: &mut ChaCha8Rng) -> SoftSums {
    let n = records.len();
    let mut sums = SoftSums::default();
    for _ in 0..n {
        let (wp, wq, cross) = records[rng.random_range(0..n)];
        sums.wp_all += wp;
        sums.wq_all += wq;
        if cross {
            sums.wp_cross += wp;
            sums.wq_cross += wq;
        }
    }
    sums
}

fn counts_from_slots(a: [f64; 5], b: [f64; 5]) -> ContingencyCounts {
    ContingencyCounts {
        npos_a: a[1] + a[2],
        ntp_ba_on_a: a[2],
        nneg_a: a[3] + a[4],
        nfp_ba_on_a: a[4],
        npos_b: b[1] + b[2],
        ntp_ab_on_b: b[2],
        nneg_b: b[3] + b[4],
        nfp_ab_on_b: b[4],
        n_unlabeled: 0,
    }
}

fn full_sample_point(
    dataset: &Dataset,
    thresholds: &Thresholds,
    estimator: Estimator,
    traffic: Option<&ArmTraffic>,
) -> Result<f64> {
    match estimator {
        Estimator::SsRRecall => Ok(estimators::ss_rrecall(dataset, thresholds)?.point),
        Estimator::SsRFpr => Ok(estimators::ss_rfpr(dataset, thresholds)?.point),
        _ => {
            let counts = build_counts(dataset, thresholds);
            counts_point(&counts, estimator, traffic)
        }
    }
}

fn counts_point(
    counts: &ContingencyCounts,
    estimator: Estimator,
    traffic: Option<&ArmTraffic>,
) -> Result<f64> {
    match estimator {
        Estimator::DirectRRecall => estimators::rrecall_direct_point(counts),
        Estimator::DirectRFpr => estimators::rfpr_direct_point(counts),
        Estimator::ApproxRRecall => estimators::rrecall_approx_point(counts),
        Estimator::ApproxRFpr => estimators::rfpr_approx_point(counts),
        Estimator::AbTestRFpr => {
            let traffic = traffic.ok_or(Error::InvalidConfig(
                "the ab_test estimator requires arm traffic".to_owned(),
            ))?;
            estimators::rfpr_ab_test_point(counts, traffic)
        }
        Estimator::SsRRecall | Estimator::SsRFpr => unreachable!("soft estimators take sums"),
    }
}

/// Percentile-bootstrap confidence interval for `estimator` over `dataset`.
///
/// The point estimate is the full-sample value, never the replicate mean.
/// Replicates where the estimator is undefined are dropped and counted; when
/// more than half are undefined the whole interval is refused.
pub fn bootstrap_ci(
    dataset: &Dataset,
    thresholds: &Thresholds,
    estimator: Estimator,
    traffic: Option<&ArmTraffic>,
    config: &BootstrapConfig,
) -> Result<BootstrapCi> {
    if config.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be >= 1".to_owned()));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {}",
            config.level
        )));
    }
    if estimator == Estimator::AbTestRFpr && traffic.is_none() {
        return Err(Error::InvalidConfig(
            "the ab_test estimator requires arm traffic".to_owned(),
        ));
    }

    let point = full_sample_point(dataset, thresholds, estimator, traffic)?;
    let compact = CompactArms::build(dataset, thresholds, estimator.needs_soft_labels())?;

    // Replicate k draws from its own counter-derived stream, so the result
    // is identical whether replicates run sequentially or on a pool.
    let replicate = |k: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(k as u64);
        match &compact {
            CompactArms::Counts([a, b]) => {
                let counts =
                    counts_from_slots(resample_slots(a, &mut rng), resample_slots(b, &mut rng));
                counts_point(&counts, estimator, traffic).ok()
            }
            CompactArms::Soft([a, b]) => {
                let sums_a = resample_soft(a, &mut rng);
                let sums_b = resample_soft(b, &mut rng);
                match estimator {
                    Estimator::SsRRecall => estimators::ss_rrecall_point(&sums_a, &sums_b).ok(),
                    _ => estimators::ss_rfpr_point(&sums_a, &sums_b).ok(),
                }
            }
        }
    };
    #[cfg(feature = "parallel")]
    let replicate_values: Vec<Option<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(replicate)
        .collect();
    #[cfg(not(feature = "parallel"))]
    let replicate_values: Vec<Option<f64>> = (0..config.replicates).map(replicate).collect();

    let mut values: Vec<f64> = replicate_values.into_iter().flatten().collect();
    let dropped = config.replicates - values.len();
    if 2 * dropped > config.replicates {
        return Err(Error::BootstrapUnstable {
            undefined: dropped,
            replicates: config.replicates,
        });
    }

    values.sort_by(f64::total_cmp);
    let tail = (1.0 - config.level) / 2.0;
    // Percentile interval, widened if needed so it always brackets the point.
    let ci_low = quantile(&values, tail).min(point);
    let ci_high = quantile(&values, 1.0 - tail).max(point);

    Ok(BootstrapCi {
        estimate: RatioEstimate {
            metric: estimator.metric(),
            method: estimator.method(),
            point,
            ci_low: Some(ci_low),
            ci_high: Some(ci_high),
            ci_level: Some(config.level),
            replicates: Some(values.len()),
        },
        dropped_replicates: dropped,
    })
}

/// Linear-interpolation quantile of an ascending sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}
