//! Thresholded aggregation of a dataset into weighted contingency counts.
//!
//! All counts are sums of `sampling_weight`, so stratified annotation plans
//! reweight transparently. Aggregation is a commutative fold: the result does
//! not depend on record order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Arm, Dataset, Thresholds};

/// Weighted count aggregates for one deployment.
///
/// The `_a` / `_b` suffix is the collecting arm. `ntp_ba_on_a` counts A-arm
/// true positives that model B also accepted offline; `nfp_ab_on_b` counts
/// B-arm false positives that model A also accepted offline.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContingencyCounts {
    pub npos_a: f64,
    pub nneg_a: f64,
    pub npos_b: f64,
    pub nneg_b: f64,
    pub ntp_ba_on_a: f64,
    pub nfp_ba_on_a: f64,
    pub ntp_ab_on_b: f64,
    pub nfp_ab_on_b: f64,
    /// Records excluded from aggregation because they carry no hard label.
    #[serde(default)]
    pub n_unlabeled: usize,
}

impl ContingencyCounts {
    /// Builds counts from raw values, checking the structural invariants
    /// (non-negative, joint counts bounded by their totals).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        npos_a: f64,
        nneg_a: f64,
        ntp_ba_on_a: f64,
        nfp_ba_on_a: f64,
        npos_b: f64,
        nneg_b: f64,
        ntp_ab_on_b: f64,
        nfp_ab_on_b: f64,
    ) -> Result<Self> {
        let counts = ContingencyCounts {
            npos_a,
            nneg_a,
            npos_b,
            nneg_b,
            ntp_ba_on_a,
            nfp_ba_on_a,
            ntp_ab_on_b,
            nfp_ab_on_b,
            n_unlabeled: 0,
        };
        counts.check()?;
        Ok(counts)
    }

    fn check(&self) -> Result<()> {
        let fields = [
            ("npos_a", self.npos_a),
            ("nneg_a", self.nneg_a),
            ("npos_b", self.npos_b),
            ("nneg_b", self.nneg_b),
            ("ntp_ba_on_a", self.ntp_ba_on_a),
            ("nfp_ba_on_a", self.nfp_ba_on_a),
            ("ntp_ab_on_b", self.ntp_ab_on_b),
            ("nfp_ab_on_b", self.nfp_ab_on_b),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "count {name} must be finite and >= 0, got {value}"
                )));
            }
        }
        let bounds = [
            ("ntp_ba_on_a", self.ntp_ba_on_a, "npos_a", self.npos_a),
            ("nfp_ba_on_a", self.nfp_ba_on_a, "nneg_a", self.nneg_a),
            ("ntp_ab_on_b", self.ntp_ab_on_b, "npos_b", self.npos_b),
            ("nfp_ab_on_b", self.nfp_ab_on_b, "nneg_b", self.nneg_b),
        ];
        for (joint, jv, total, tv) in bounds {
            if jv > tv {
                return Err(Error::InvalidConfig(format!(
                    "joint count {joint} = {jv} exceeds its total {total} = {tv}"
                )));
            }
        }
        Ok(())
    }

    /// True positives of model B rejected by model A (on B-collected data).
    pub fn nmiss_a(&self) -> f64 {
        self.npos_b - self.ntp_ab_on_b
    }

    /// True positives of model A rejected by model B (on A-collected data).
    pub fn nmiss_b(&self) -> f64 {
        self.npos_a - self.ntp_ba_on_a
    }

    /// False positives accepted only by model A.
    pub fn nfp_excl_a(&self) -> f64 {
        self.nneg_a - self.nfp_ba_on_a
    }

    /// False positives accepted only by model B.
    pub fn nfp_excl_b(&self) -> f64 {
        self.nneg_b - self.nfp_ab_on_b
    }

    /// True positives accepted by both models, pooled over arms.
    pub fn ntp_joint(&self) -> f64 {
        self.ntp_ba_on_a + self.ntp_ab_on_b
    }

    /// False positives accepted by both models, pooled over arms.
    pub fn nfp_joint(&self) -> f64 {
        self.nfp_ba_on_a + self.nfp_ab_on_b
    }

    /// A-arm share of the jointly accepted pool. NaN when the pool is empty.
    pub fn alpha(&self) -> f64 {
        (self.ntp_ba_on_a + self.nfp_ba_on_a) / (self.ntp_joint() + self.nfp_joint())
    }

    /// B-arm share of the jointly accepted pool. NaN when the pool is empty.
    pub fn beta(&self) -> f64 {
        (self.ntp_ab_on_b + self.nfp_ab_on_b) / (self.ntp_joint() + self.nfp_joint())
    }

    /// The same deployment with the arm labels exchanged.
    pub fn swap_arms(&self) -> ContingencyCounts {
        ContingencyCounts {
            npos_a: self.npos_b,
            nneg_a: self.nneg_b,
            npos_b: self.npos_a,
            nneg_b: self.nneg_a,
            ntp_ba_on_a: self.ntp_ab_on_b,
            nfp_ba_on_a: self.nfp_ab_on_b,
            ntp_ab_on_b: self.ntp_ba_on_a,
            nfp_ab_on_b: self.nfp_ba_on_a,
            n_unlabeled: self.n_unlabeled,
        }
    }
}

/// Folds a dataset into weighted contingency counts at the given thresholds.
///
/// Records without a hard label are excluded and tallied in `n_unlabeled`;
/// partially annotated datasets are the normal case under stratified
/// annotation. Degenerate all-zero counts are legal output.
pub fn build_counts(dataset: &Dataset, thresholds: &Thresholds) -> ContingencyCounts {
    let mut c = ContingencyCounts::default();
    for rec in dataset.records() {
        let Some(label) = rec.hard_label else {
            c.n_unlabeled += 1;
            continue;
        };
        let w = rec.sampling_weight;
        let cross = rec.cross_accepted(thresholds);
        match (rec.arm, label) {
            (Arm::A, 1) => {
                c.npos_a += w;
                if cross {
                    c.ntp_ba_on_a += w;
                }
            }
            (Arm::A, _) => {
                c.nneg_a += w;
                if cross {
                    c.nfp_ba_on_a += w;
                }
            }
            (Arm::B, 1) => {
                c.npos_b += w;
                if cross {
                    c.ntp_ab_on_b += w;
                }
            }
            (Arm::B, _) => {
                c.nneg_b += w;
                if cross {
                    c.nfp_ab_on_b += w;
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::UtteranceRecord;

    fn rec(id: usize, arm: Arm, label: u8, cross_score: f64, weight: f64) -> UtteranceRecord {
        UtteranceRecord {
            id: format!("r{id}"),
            arm,
            collector_score: 0.9,
            cross_score,
            hard_label: Some(label),
            soft_tp_prob: None,
            stratum: "default".to_owned(),
            sampling_weight: weight,
        }
    }

    /// A: (1,.9) (1,.2) (0,.9) (0,.2); B: (1,.9) (1,.2) (0,.9); t = 0.5.
    fn seven_record_dataset(weight: f64) -> Dataset {
        let records = vec![
            rec(1, Arm::A, 1, 0.9, weight),
            rec(2, Arm::A, 1, 0.2, weight),
            rec(3, Arm::A, 0, 0.9, weight),
            rec(4, Arm::A, 0, 0.2, weight),
            rec(5, Arm::B, 1, 0.9, weight),
            rec(6, Arm::B, 1, 0.2, weight),
            rec(7, Arm::B, 0, 0.9, weight),
        ];
        Dataset::from_records(records).unwrap()
    }

    #[test]
    fn hand_enumerated_counts() {
        let ds = seven_record_dataset(1.0);
        let c = build_counts(&ds, &Thresholds { t_a: 0.5, t_b: 0.5 });
        assert_eq!(c.npos_a, 2.0);
        assert_eq!(c.nneg_a, 2.0);
        assert_eq!(c.ntp_ba_on_a, 1.0);
        assert_eq!(c.nfp_ba_on_a, 1.0);
        assert_eq!(c.npos_b, 2.0);
        assert_eq!(c.nneg_b, 1.0);
        assert_eq!(c.ntp_ab_on_b, 1.0);
        assert_eq!(c.nfp_ab_on_b, 1.0);
        assert_eq!(c.nmiss_a(), 1.0);
        assert_eq!(c.nmiss_b(), 1.0);
        assert_eq!(c.n_unlabeled, 0);
    }

    #[test]
    fn score_at_threshold_counts_as_rejected() {
        let ds = Dataset::from_records(vec![rec(1, Arm::A, 1, 0.5, 1.0)]).unwrap();
        let c = build_counts(&ds, &Thresholds { t_a: 0.5, t_b: 0.5 });
        assert_eq!(c.npos_a, 1.0);
        assert_eq!(c.ntp_ba_on_a, 0.0);
    }

    #[test]
    fn doubling_weights_doubles_every_count() {
        let t = Thresholds { t_a: 0.5, t_b: 0.5 };
        let c1 = build_counts(&seven_record_dataset(1.0), &t);
        let c2 = build_counts(&seven_record_dataset(2.0), &t);
        assert_eq!(c2.npos_a, 2.0 * c1.npos_a);
        assert_eq!(c2.nneg_a, 2.0 * c1.nneg_a);
        assert_eq!(c2.npos_b, 2.0 * c1.npos_b);
        assert_eq!(c2.nneg_b, 2.0 * c1.nneg_b);
        assert_eq!(c2.ntp_ba_on_a, 2.0 * c1.ntp_ba_on_a);
        assert_eq!(c2.nfp_ba_on_a, 2.0 * c1.nfp_ba_on_a);
        assert_eq!(c2.ntp_ab_on_b, 2.0 * c1.ntp_ab_on_b);
        assert_eq!(c2.nfp_ab_on_b, 2.0 * c1.nfp_ab_on_b);
    }

    #[test]
    fn unlabeled_records_excluded_and_reported() {
        let mut records = seven_record_dataset(1.0).records().to_vec();
        records[1].hard_label = None;
        let ds = Dataset::from_records(records).unwrap();
        let c = build_counts(&ds, &Thresholds { t_a: 0.5, t_b: 0.5 });
        assert_eq!(c.n_unlabeled, 1);
        assert_eq!(c.npos_a, 1.0);
    }

    #[test]
    fn alpha_beta_sum_to_one() {
        let c = build_counts(
            &seven_record_dataset(1.5),
            &Thresholds { t_a: 0.5, t_b: 0.5 },
        );
        assert!((c.alpha() + c.beta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exclusive_plus_joint_equals_total() {
        let c = build_counts(
            &seven_record_dataset(1.0),
            &Thresholds { t_a: 0.5, t_b: 0.5 },
        );
        assert_eq!(c.nfp_excl_a() + c.nfp_ba_on_a, c.nneg_a);
        assert_eq!(c.nfp_excl_b() + c.nfp_ab_on_b, c.nneg_b);
        assert_eq!(c.nmiss_b() + c.ntp_ba_on_a, c.npos_a);
        assert_eq!(c.nmiss_a() + c.ntp_ab_on_b, c.npos_b);
    }

    #[test]
    fn raising_t_b_never_increases_a_side_joint_counts() {
        let ds = seven_record_dataset(1.0);
        let mut last = f64::INFINITY;
        let mut last_fp = f64::INFINITY;
        for t_b in [0.1, 0.3, 0.5, 0.7, 0.95] {
            let c = build_counts(&ds, &Thresholds { t_a: 0.5, t_b });
            assert!(c.ntp_ba_on_a <= last);
            assert!(c.nfp_ba_on_a <= last_fp);
            last = c.ntp_ba_on_a;
            last_fp = c.nfp_ba_on_a;
        }
    }

    #[test]
    fn from_parts_rejects_joint_exceeding_total() {
        let err = ContingencyCounts::from_parts(10.0, 5.0, 11.0, 1.0, 10.0, 5.0, 8.0, 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn swap_arms_is_an_involution() {
        let c = build_counts(
            &seven_record_dataset(1.0),
            &Thresholds { t_a: 0.5, t_b: 0.5 },
        );
        assert_eq!(c.swap_arms().swap_arms(), c);
        assert_eq!(c.swap_arms().npos_a, c.npos_b);
        assert_eq!(c.swap_arms().ntp_ba_on_a, c.ntp_ab_on_b);
    }
}
