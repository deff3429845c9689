//! Point estimators for the relative metrics.
//!
//! Both ratios have the same cross-decode structure: the candidate's rate on
//! baseline-collected data over the baseline's rate on candidate-collected
//! data. Four estimation routes are provided:
//!
//! - *direct*: the plain count ratio;
//! - *approx*: a lower-variance form that assumes the TP:FP ratio inside the
//!   jointly accepted pool is the same in both arms, useful when false
//!   positives are sparse;
//! - *semi-supervised*: soft TP probabilities in place of hard labels;
//! - *ab_test*: the classic baseline, false accepts per unit traffic,
//!   available for rFPR only and blind to recall.
//!
//! Ratios are computed as a single fraction (product of numerators over
//! product of denominators) so that symmetric inputs yield exactly 1.0.

use serde::{Deserialize, Serialize};

use crate::counts::{build_counts, ContingencyCounts};
use crate::error::{Error, Result};
use crate::record::{Arm, ArmTraffic, Dataset, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "rrecall")]
    RRecall,
    #[serde(rename = "rfpr")]
    RFpr,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::RRecall => write!(f, "rRecall"),
            Metric::RFpr => write!(f, "rFPR"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Approx,
    SemiSupervised,
    AbTest,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Direct => write!(f, "direct"),
            Method::Approx => write!(f, "approx"),
            Method::SemiSupervised => write!(f, "semi_supervised"),
            Method::AbTest => write!(f, "ab_test"),
        }
    }
}

/// A point estimate of one relative metric, optionally with a bootstrap
/// confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub metric: Metric,
    pub method: Method,
    pub point: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
}

impl RatioEstimate {
    pub fn point(metric: Metric, method: Method, point: f64) -> Self {
        RatioEstimate {
            metric,
            method,
            point,
            ci_low: None,
            ci_high: None,
            ci_level: None,
            replicates: None,
        }
    }

    pub fn ci_width(&self) -> Option<f64> {
        Some(self.ci_high? - self.ci_low?)
    }
}

fn ensure_positive(value: f64, term: &'static str) -> Result<f64> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::UndefinedRatio { term })
    }
}

pub(crate) fn rrecall_direct_point(c: &ContingencyCounts) -> Result<f64> {
    ensure_positive(c.npos_a, "npos_a")?;
    ensure_positive(c.ntp_ab_on_b, "ntp_ab_on_b")?;
    Ok((c.ntp_ba_on_a * c.npos_b) / (c.npos_a * c.ntp_ab_on_b))
}

pub(crate) fn rfpr_direct_point(c: &ContingencyCounts) -> Result<f64> {
    ensure_positive(c.nneg_a, "nneg_a")?;
    ensure_positive(c.nfp_ab_on_b, "nfp_ab_on_b")?;
    Ok((c.nfp_ba_on_a * c.nneg_b) / (c.nneg_a * c.nfp_ab_on_b))
}

pub(crate) fn rrecall_approx_point(c: &ContingencyCounts) -> Result<f64> {
    let joint = ensure_positive(c.ntp_joint() + c.nfp_joint(), "joint accept pool")?;
    let alpha = (c.ntp_ba_on_a + c.nfp_ba_on_a) / joint;
    let beta = ensure_positive((c.ntp_ab_on_b + c.nfp_ab_on_b) / joint, "beta")?;
    let num = alpha * (c.nmiss_a() + beta * c.ntp_joint());
    let den = ensure_positive(
        beta * (c.nmiss_b() + alpha * c.ntp_joint()),
        "beta * (nmiss_b + alpha * ntp_joint)",
    )?;
    Ok(num / den)
}

pub(crate) fn rfpr_approx_point(c: &ContingencyCounts) -> Result<f64> {
    let joint = ensure_positive(c.ntp_joint() + c.nfp_joint(), "joint accept pool")?;
    let alpha = (c.ntp_ba_on_a + c.nfp_ba_on_a) / joint;
    let beta = ensure_positive((c.ntp_ab_on_b + c.nfp_ab_on_b) / joint, "beta")?;
    let num = alpha * (c.nfp_excl_b() + beta * c.nfp_joint());
    let den = ensure_positive(
        beta * (c.nfp_excl_a() + alpha * c.nfp_joint()),
        "beta * (nfp_excl_a + alpha * nfp_joint)",
    )?;
    Ok(num / den)
}

pub(crate) fn rfpr_ab_test_point(c: &ContingencyCounts, traffic: &ArmTraffic) -> Result<f64> {
    if traffic.streams_a == 0 {
        return Err(Error::UndefinedRatio { term: "streams_a" });
    }
    if traffic.streams_b == 0 {
        return Err(Error::UndefinedRatio { term: "streams_b" });
    }
    ensure_positive(c.nneg_a, "nneg_a")?;
    Ok((c.nneg_b * traffic.streams_a as f64) / (c.nneg_a * traffic.streams_b as f64))
}

/// Relative recall from labeled counts: the candidate's accept rate on the
/// baseline's true positives over the baseline's accept rate on the
/// candidate's true positives.
pub fn rrecall_direct(c: &ContingencyCounts) -> Result<RatioEstimate> {
    Ok(RatioEstimate::point(
        Metric::RRecall,
        Method::Direct,
        rrecall_direct_point(c)?,
    ))
}

/// Relative false-positive rate from labeled counts. False positives are
/// often sparse, making this estimator noisy or undefined; [`rfpr_approx`]
/// is the remedy.
pub fn rfpr_direct(c: &ContingencyCounts) -> Result<RatioEstimate> {
    Ok(RatioEstimate::point(
        Metric::RFpr,
        Method::Direct,
        rfpr_direct_point(c)?,
    ))
}

/// Relative recall under the shared joint-pool composition assumption.
/// Agrees exactly with [`rrecall_direct`] whenever the TP:FP ratio in the
/// jointly accepted pool is identical in both arms.
pub fn rrecall_approx(c: &ContingencyCounts) -> Result<RatioEstimate> {
    Ok(RatioEstimate::point(
        Metric::RRecall,
        Method::Approx,
        rrecall_approx_point(c)?,
    ))
}

/// Low-variance relative FPR under the same assumption. The exclusive
/// false-positive counts (accepted by exactly one model) take the place of
/// the per-model FP totals.
pub fn rfpr_approx(c: &ContingencyCounts) -> Result<RatioEstimate> {
    Ok(RatioEstimate::point(
        Metric::RFpr,
        Method::Approx,
        rfpr_approx_point(c)?,
    ))
}

/// Classic A/B-test baseline: labeled false accepts per unit of arm traffic.
/// Needs no cross-decoding but cannot estimate recall.
pub fn rfpr_ab_test(c: &ContingencyCounts, traffic: &ArmTraffic) -> Result<RatioEstimate> {
    Ok(RatioEstimate::point(
        Metric::RFpr,
        Method::AbTest,
        rfpr_ab_test_point(c, traffic)?,
    ))
}

/// Weighted soft-label sums for one arm.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SoftSums {
    /// Sum of w * p over all records.
    pub wp_all: f64,
    /// Sum of w * p over cross-accepted records.
    pub wp_cross: f64,
    /// Sum of w * (1 - p) over all records.
    pub wq_all: f64,
    /// Sum of w * (1 - p) over cross-accepted records.
    pub wq_cross: f64,
}

impl SoftSums {
    pub(crate) fn add(&mut self, w: f64, p: f64, cross: bool) {
        let wp = w * p;
        let wq = w * (1.0 - p);
        self.wp_all += wp;
        self.wq_all += wq;
        if cross {
            self.wp_cross += wp;
            self.wq_cross += wq;
        }
    }
}

const MISSING_LIST_CAP: usize = 10;

fn soft_sums(dataset: &Dataset, thresholds: &Thresholds) -> Result<(SoftSums, SoftSums)> {
    let mut sums_a = SoftSums::default();
    let mut sums_b = SoftSums::default();
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
        let sums = match rec.arm {
            Arm::A => &mut sums_a,
            Arm::B => &mut sums_b,
        };
        sums.add(rec.sampling_weight, p, rec.cross_accepted(thresholds));
    }
    if missing_count > 0 {
        return Err(Error::MissingSoftLabels {
            count: missing_count,
            first: missing,
        });
    }
    Ok((sums_a, sums_b))
}

pub(crate) fn ss_rrecall_point(a: &SoftSums, b: &SoftSums) -> Result<f64> {
    ensure_positive(a.wp_all, "soft TP mass in arm A")?;
    ensure_positive(a.wp_cross, "cross-accepted soft TP mass in arm A")?;
    ensure_positive(b.wp_all, "soft TP mass in arm B")?;
    ensure_positive(b.wp_cross, "cross-accepted soft TP mass in arm B")?;
    Ok((a.wp_cross * b.wp_all) / (a.wp_all * b.wp_cross))
}

pub(crate) fn ss_rfpr_point(a: &SoftSums, b: &SoftSums) -> Result<f64> {
    ensure_positive(a.wq_all, "soft FP mass in arm A")?;
    ensure_positive(a.wq_cross, "cross-accepted soft FP mass in arm A")?;
    ensure_positive(b.wq_all, "soft FP mass in arm B")?;
    ensure_positive(b.wq_cross, "cross-accepted soft FP mass in arm B")?;
    Ok((a.wq_cross * b.wq_all) / (a.wq_all * b.wq_cross))
}

/// Semi-supervised relative recall: every record contributes its soft TP
/// probability instead of a hard label. Degenerates to [`rrecall_direct`]
/// when all probabilities are 0 or 1.
pub fn ss_rrecall(dataset: &Dataset, thresholds: &Thresholds) -> Result<RatioEstimate> {
    let (a, b) = soft_sums(dataset, thresholds)?;
    Ok(RatioEstimate::point(
        Metric::RRecall,
        Method::SemiSupervised,
        ss_rrecall_point(&a, &b)?,
    ))
}

/// Semi-supervised relative FPR, using 1 - p in place of p.
pub fn ss_rfpr(dataset: &Dataset, thresholds: &Thresholds) -> Result<RatioEstimate> {
    let (a, b) = soft_sums(dataset, thresholds)?;
    Ok(RatioEstimate::point(
        Metric::RFpr,
        Method::SemiSupervised,
        ss_rfpr_point(&a, &b)?,
    ))
}

/// Point metrics over a labeled 2x2 table. Metrics whose denominator is zero
/// come back as `None`; the others are still returned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
    pub fdr: Option<f64>,
}

pub fn base_metrics(tp: f64, fp: f64, false_neg: f64, tn: f64) -> BaseMetrics {
    let frac = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
    let precision = frac(tp, tp + fp);
    BaseMetrics {
        precision,
        recall: frac(tp, tp + false_neg),
        fpr: frac(fp, fp + tn),
        fdr: precision.map(|p| 1.0 - p),
    }
}

/// Quadrant of the operating-point plane relative to the baseline,
/// classified from point estimates alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    BothImprove,
    RecallOnly,
    FprOnly,
    BothDegrade,
}

impl Region {
    pub fn classify(rrecall: f64, rfpr: f64) -> Region {
        match (rrecall >= 1.0, rfpr <= 1.0) {
            (true, true) => Region::BothImprove,
            (true, false) => Region::RecallOnly,
            (false, true) => Region::FprOnly,
            (false, false) => Region::BothDegrade,
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Region::BothImprove => "both_improve",
            Region::RecallOnly => "recall_only",
            Region::FprOnly => "fpr_only",
            Region::BothDegrade => "both_degrade",
        };
        write!(f, "{s}")
    }
}

/// One operating point of a candidate-threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_b: f64,
    pub rfpr: RatioEstimate,
    pub rrecall: RatioEstimate,
    pub region: Region,
}

/// Estimation route for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    Direct,
    Approx,
}

/// Re-evaluates both ratios at each candidate threshold in `grid`.
///
/// Raising `t_b` drops B-arm records whose collector score falls below it and
/// re-thresholds B's offline scores on the A arm. Grid points below
/// `deployment_t_b` are rejected: audio B declined online was never
/// collected, so those operating points cannot be reconstructed.
pub fn threshold_sweep(
    dataset: &Dataset,
    t_a: f64,
    deployment_t_b: f64,
    grid: &[f64],
    method: SweepMethod,
) -> Result<Vec<SweepRow>> {
    if let Some(&bad) = grid.iter().find(|&&g| g < deployment_t_b) {
        return Err(Error::SweepBelowDeployment {
            t_b: bad,
            deployment: deployment_t_b,
        });
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &t_b in grid {
        let kept: Vec<_> = dataset
            .records()
            .iter()
            .filter(|r| r.arm == Arm::A || r.collector_score > t_b)
            .cloned()
            .collect();
        let counts = build_counts(&Dataset::from_validated(kept), &Thresholds { t_a, t_b });
        let at = |res: Result<f64>| {
            res.map_err(|e| match e {
                Error::UndefinedRatio { term } => Error::SweepUndefined { t_b, term },
                other => other,
            })
        };
        let (rrecall, rfpr) = match method {
            SweepMethod::Direct => (
                at(rrecall_direct_point(&counts))?,
                at(rfpr_direct_point(&counts))?,
            ),
            SweepMethod::Approx => (
                at(rrecall_approx_point(&counts))?,
                at(rfpr_approx_point(&counts))?,
            ),
        };
        let method_tag = match method {
            SweepMethod::Direct => Method::Direct,
            SweepMethod::Approx => Method::Approx,
        };
        rows.push(SweepRow {
            t_b,
            rfpr: RatioEstimate::point(Metric::RFpr, method_tag, rfpr),
            rrecall: RatioEstimate::point(Metric::RRecall, method_tag, rrecall),
            region: Region::classify(rrecall, rfpr),
        });
    }
    Ok(rows)
}

/// What the candidate threshold should optimize for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionGoal {
    /// Hold the FPR (rFPR nearest 1 from below), take the recall gain.
    MatchFpr,
    /// Hold the recall (rRecall nearest 1 from above), take the FPR gain.
    MatchRecall,
    /// Strictly improve both metrics.
    Dominate,
}

/// Picks the best operating point for a goal, or `None` when no row
/// qualifies.
pub fn select_threshold(rows: &[SweepRow], goal: SelectionGoal) -> Option<&SweepRow> {
    match goal {
        SelectionGoal::MatchFpr => rows.iter().filter(|r| r.rfpr.point <= 1.0).max_by(|x, y| {
            x.rfpr
                .point
                .total_cmp(&y.rfpr.point)
                .then(x.rrecall.point.total_cmp(&y.rrecall.point))
        }),
        SelectionGoal::MatchRecall => {
            rows.iter()
                .filter(|r| r.rrecall.point >= 1.0)
                .min_by(|x, y| {
                    x.rrecall
                        .point
                        .total_cmp(&y.rrecall.point)
                        .then(x.rfpr.point.total_cmp(&y.rfpr.point))
                })
        }
        SelectionGoal::Dominate => rows
            .iter()
            .filter(|r| r.rrecall.point > 1.0 && r.rfpr.point < 1.0)
            .max_by(|x, y| {
                x.rrecall
                    .point
                    .total_cmp(&y.rrecall.point)
                    .then(y.rfpr.point.total_cmp(&x.rfpr.point))
            }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::UtteranceRecord;
    use approx::assert_relative_eq;

    #[allow(clippy::too_many_arguments)]
    fn counts(
        npos_a: f64,
        nneg_a: f64,
        ntp_ba_on_a: f64,
        nfp_ba_on_a: f64,
        npos_b: f64,
        nneg_b: f64,
        ntp_ab_on_b: f64,
        nfp_ab_on_b: f64,
    ) -> ContingencyCounts {
        ContingencyCounts::from_parts(
            npos_a,
            nneg_a,
            ntp_ba_on_a,
            nfp_ba_on_a,
            npos_b,
            nneg_b,
            ntp_ab_on_b,
            nfp_ab_on_b,
        )
        .unwrap()
    }

    /// Worked table satisfying the joint-pool assumption exactly (9/90 = 6/60).
    fn consistent_counts() -> ContingencyCounts {
        counts(100.0, 20.0, 90.0, 9.0, 70.0, 10.0, 60.0, 6.0)
    }

    #[test]
    fn rrecall_direct_substitution() {
        let c = counts(100.0, 1.0, 95.0, 1.0, 100.0, 1.0, 80.0, 1.0);
        assert_relative_eq!(rrecall_direct(&c).unwrap().point, 1.1875);
    }

    #[test]
    fn rrecall_direct_symmetric_counts_give_one() {
        let c = counts(50.0, 10.0, 40.0, 5.0, 50.0, 10.0, 40.0, 5.0);
        assert_eq!(rrecall_direct(&c).unwrap().point, 1.0);
    }

    #[test]
    fn rrecall_direct_zero_denominator_names_term() {
        let c = counts(0.0, 10.0, 0.0, 5.0, 50.0, 10.0, 40.0, 5.0);
        match rrecall_direct(&c).unwrap_err() {
            Error::UndefinedRatio { term } => assert_eq!(term, "npos_a"),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn rfpr_direct_substitution() {
        let c = counts(1.0, 20.0, 1.0, 9.0, 1.0, 10.0, 1.0, 6.0);
        assert_relative_eq!(rfpr_direct(&c).unwrap().point, 0.75);
    }

    #[test]
    fn rfpr_direct_symmetric_counts_give_one() {
        let c = counts(50.0, 10.0, 40.0, 5.0, 50.0, 10.0, 40.0, 5.0);
        assert_eq!(rfpr_direct(&c).unwrap().point, 1.0);
    }

    #[test]
    fn approx_estimators_match_direct_under_joint_pool_assumption() {
        let c = consistent_counts();
        assert!((c.alpha() - 0.6).abs() < 1e-12);
        assert!((c.beta() - 0.4).abs() < 1e-12);
        assert_relative_eq!(
            rrecall_approx(&c).unwrap().point,
            1.05,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            rrecall_approx(&c).unwrap().point,
            rrecall_direct(&c).unwrap().point,
            max_relative = 1e-12
        );
        assert_relative_eq!(rfpr_approx(&c).unwrap().point, 0.75, max_relative = 1e-12);
        assert_relative_eq!(
            rfpr_approx(&c).unwrap().point,
            rfpr_direct(&c).unwrap().point,
            max_relative = 1e-12
        );
    }

    #[test]
    fn approx_estimators_on_symmetric_counts_give_one() {
        let c = counts(50.0, 10.0, 40.0, 5.0, 50.0, 10.0, 40.0, 5.0);
        assert_eq!(rrecall_approx(&c).unwrap().point, 1.0);
        assert_eq!(rfpr_approx(&c).unwrap().point, 1.0);
    }

    #[test]
    fn ab_test_equal_traffic_equal_negatives_gives_one() {
        let c = counts(1.0, 10.0, 1.0, 1.0, 1.0, 10.0, 1.0, 1.0);
        let traffic = ArmTraffic {
            streams_a: 5000,
            streams_b: 5000,
        };
        assert_eq!(rfpr_ab_test(&c, &traffic).unwrap().point, 1.0);
    }

    #[test]
    fn ab_test_normalizes_by_traffic() {
        let c = counts(1.0, 10.0, 1.0, 1.0, 1.0, 10.0, 1.0, 1.0);
        let traffic = ArmTraffic {
            streams_a: 1000,
            streams_b: 2000,
        };
        assert_relative_eq!(rfpr_ab_test(&c, &traffic).unwrap().point, 0.5);
        let zero = ArmTraffic {
            streams_a: 0,
            streams_b: 2000,
        };
        assert!(rfpr_ab_test(&c, &zero).is_err());
    }

    fn soft_record(id: usize, arm: Arm, p: f64, cross: bool, w: f64) -> UtteranceRecord {
        UtteranceRecord {
            id: format!("s{id}"),
            arm,
            collector_score: 0.9,
            cross_score: if cross { 0.9 } else { 0.1 },
            hard_label: Some(if p >= 0.5 { 1 } else { 0 }),
            soft_tp_prob: Some(p),
            stratum: "default".to_owned(),
            sampling_weight: w,
        }
    }

    #[test]
    fn ss_estimators_degenerate_to_direct_on_hard_soft_labels() {
        let records = vec![
            soft_record(1, Arm::A, 1.0, true, 1.0),
            soft_record(2, Arm::A, 1.0, false, 2.0),
            soft_record(3, Arm::A, 0.0, true, 1.0),
            soft_record(4, Arm::A, 0.0, false, 1.5),
            soft_record(5, Arm::B, 1.0, true, 1.0),
            soft_record(6, Arm::B, 1.0, true, 0.5),
            soft_record(7, Arm::B, 0.0, true, 1.0),
            soft_record(8, Arm::B, 0.0, false, 1.0),
        ];
        let ds = Dataset::from_records(records).unwrap();
        let t = Thresholds { t_a: 0.5, t_b: 0.5 };
        let c = build_counts(&ds, &t);
        assert_relative_eq!(
            ss_rrecall(&ds, &t).unwrap().point,
            rrecall_direct(&c).unwrap().point,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            ss_rfpr(&ds, &t).unwrap().point,
            rfpr_direct(&c).unwrap().point,
            max_relative = 1e-12
        );
    }

    #[test]
    fn ss_estimators_all_cross_accepted_give_exactly_one() {
        let records = vec![
            soft_record(1, Arm::A, 0.9, true, 1.0),
            soft_record(2, Arm::A, 0.3, true, 2.0),
            soft_record(3, Arm::B, 0.7, true, 1.0),
            soft_record(4, Arm::B, 0.2, true, 1.0),
        ];
        let ds = Dataset::from_records(records).unwrap();
        let t = Thresholds { t_a: 0.5, t_b: 0.5 };
        assert_eq!(ss_rrecall(&ds, &t).unwrap().point, 1.0);
        assert_eq!(ss_rfpr(&ds, &t).unwrap().point, 1.0);
    }

    #[test]
    fn ss_missing_soft_labels_lists_ids() {
        let mut rec = soft_record(1, Arm::A, 0.9, true, 1.0);
        rec.soft_tp_prob = None;
        let ds = Dataset::from_records(vec![rec, soft_record(2, Arm::B, 0.5, true, 1.0)]).unwrap();
        match ss_rrecall(&ds, &Thresholds { t_a: 0.5, t_b: 0.5 }).unwrap_err() {
            Error::MissingSoftLabels { count, first } => {
                assert_eq!(count, 1);
                assert_eq!(first, vec!["s1".to_owned()]);
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn base_metrics_always_positive_model() {
        let m = base_metrics(90.0, 10.0, 0.0, 0.0);
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.precision, Some(0.9));
        assert_eq!(m.fpr, Some(1.0));
        assert_relative_eq!(m.fdr.unwrap(), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn base_metrics_balanced_table() {
        let m = base_metrics(25.0, 25.0, 25.0, 25.0);
        assert_eq!(m.precision, Some(0.5));
        assert_eq!(m.recall, Some(0.5));
        assert_eq!(m.fpr, Some(0.5));
        assert_eq!(m.fdr, Some(0.5));
    }

    #[test]
    fn base_metrics_substitution() {
        let m = base_metrics(8.0, 2.0, 2.0, 88.0);
        assert_relative_eq!(m.precision.unwrap(), 0.8);
        assert_relative_eq!(m.recall.unwrap(), 0.8);
        assert_relative_eq!(m.fpr.unwrap(), 2.0 / 90.0);
        assert_relative_eq!(m.fdr.unwrap(), 0.2, max_relative = 1e-12);
    }

    #[test]
    fn base_metrics_flags_undefined_individually() {
        let m = base_metrics(0.0, 0.0, 5.0, 95.0);
        assert_eq!(m.precision, None);
        assert_eq!(m.fdr, None);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.fpr, Some(0.0));
    }

    /// Operating points shaped like a typical sweep: sensitive at low t_b,
    /// conservative at high t_b.
    fn sweep_fixture() -> Vec<SweepRow> {
        [
            (0.1, 1.5, 1.20),
            (0.2, 1.0, 1.05),
            (0.3, 0.8, 1.01),
            (0.4, 0.7, 0.98),
        ]
        .into_iter()
        .map(|(t_b, rfpr, rrecall)| SweepRow {
            t_b,
            rfpr: RatioEstimate::point(Metric::RFpr, Method::Direct, rfpr),
            rrecall: RatioEstimate::point(Metric::RRecall, Method::Direct, rrecall),
            region: Region::classify(rrecall, rfpr),
        })
        .collect()
    }

    #[test]
    fn select_match_fpr_holds_fpr_and_takes_recall() {
        let rows = sweep_fixture();
        let row = select_threshold(&rows, SelectionGoal::MatchFpr).unwrap();
        assert_eq!(row.t_b, 0.2);
    }

    #[test]
    fn select_match_recall_holds_recall_and_takes_fpr() {
        let rows = sweep_fixture();
        let row = select_threshold(&rows, SelectionGoal::MatchRecall).unwrap();
        assert_eq!(row.t_b, 0.3);
    }

    #[test]
    fn select_dominate_requires_strict_improvement_on_both() {
        let rows = sweep_fixture();
        let row = select_threshold(&rows, SelectionGoal::Dominate).unwrap();
        assert_eq!(row.t_b, 0.3);
    }

    #[test]
    fn select_dominate_none_when_no_row_qualifies() {
        let rows = vec![SweepRow {
            t_b: 0.1,
            rfpr: RatioEstimate::point(Metric::RFpr, Method::Direct, 1.5),
            rrecall: RatioEstimate::point(Metric::RRecall, Method::Direct, 0.9),
            region: Region::classify(0.9, 1.5),
        }];
        assert!(select_threshold(&rows, SelectionGoal::Dominate).is_none());
    }

    #[test]
    fn region_classification_quadrants() {
        assert_eq!(Region::classify(1.05, 1.0), Region::BothImprove);
        assert_eq!(Region::classify(1.2, 1.5), Region::RecallOnly);
        assert_eq!(Region::classify(0.98, 0.7), Region::FprOnly);
        assert_eq!(Region::classify(0.9, 1.1), Region::BothDegrade);
    }

    fn sweep_record(id: usize, arm: Arm, label: u8, collector: f64, cross: f64) -> UtteranceRecord {
        UtteranceRecord {
            id: format!("w{id}"),
            arm,
            collector_score: collector,
            cross_score: cross,
            hard_label: Some(label),
            soft_tp_prob: None,
            stratum: "default".to_owned(),
            sampling_weight: 1.0,
        }
    }

    fn sweep_dataset() -> Dataset {
        // Positives carry higher cross scores than negatives so that raising
        // t_b sheds false positives faster than true positives.
        let mut records = Vec::new();
        let mut id = 0;
        for i in 0..10 {
            let high = 0.55 + 0.04 * i as f64;
            let low = 0.51 + 0.02 * i as f64;
            id += 1;
            records.push(sweep_record(id, Arm::A, 1, 0.9, high));
            id += 1;
            records.push(sweep_record(id, Arm::A, 0, 0.9, low));
            id += 1;
            records.push(sweep_record(id, Arm::B, 1, high, 0.9));
            id += 1;
            records.push(sweep_record(id, Arm::B, 0, low, 0.9));
        }
        Dataset::from_records(records).unwrap()
    }

    #[test]
    fn sweep_at_deployment_threshold_equals_base_estimate() {
        let ds = sweep_dataset();
        let rows = threshold_sweep(&ds, 0.5, 0.5, &[0.5], SweepMethod::Direct).unwrap();
        assert_eq!(rows.len(), 1);
        let base = build_counts(&ds, &Thresholds { t_a: 0.5, t_b: 0.5 });
        assert_eq!(rows[0].rrecall.point, rrecall_direct(&base).unwrap().point);
        assert_eq!(rows[0].rfpr.point, rfpr_direct(&base).unwrap().point);
    }

    #[test]
    fn sweep_rejects_grid_below_deployment_threshold() {
        let ds = sweep_dataset();
        let err = threshold_sweep(&ds, 0.5, 0.5, &[0.4, 0.6], SweepMethod::Direct).unwrap_err();
        assert!(matches!(err, Error::SweepBelowDeployment { .. }));
    }

    #[test]
    fn sweep_joint_counts_are_non_increasing_along_the_grid() {
        let ds = sweep_dataset();
        // Stay below 0.66 so both arms keep false positives and every grid
        // point has defined ratios.
        let grid: Vec<f64> = (0..6).map(|i| 0.5 + 0.03 * i as f64).collect();
        // Brute-force the counts at each grid point and check monotonicity.
        let mut last_tp = f64::INFINITY;
        let mut last_fp = f64::INFINITY;
        for &t_b in &grid {
            let c = build_counts(&ds, &Thresholds { t_a: 0.5, t_b });
            assert!(c.ntp_ba_on_a <= last_tp);
            assert!(c.nfp_ba_on_a <= last_fp);
            last_tp = c.ntp_ba_on_a;
            last_fp = c.nfp_ba_on_a;
        }
        // The sweep itself stays defined across the same grid.
        let rows = threshold_sweep(&ds, 0.5, 0.5, &grid, SweepMethod::Direct).unwrap();
        assert_eq!(rows.len(), grid.len());
    }
}
