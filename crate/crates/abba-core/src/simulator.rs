//! Seeded Monte Carlo generators for end-to-end validation.
//!
//! Two generators emit standard datasets: a full deployment simulation with
//! known true ratios, and a soft-label simulation whose label machines draw
//! TP probabilities from per-(arm, class) Beta distributions. Both are fully
//! reproducible from their seed.
//!
//! Emitted scores are synthetic: acceptance is decided by the configured
//! probabilities, and scores are then drawn consistently with those
//! decisions at [`SIMULATED_THRESHOLD`]: accepted scores above it, rejected
//! below. Within each side positives are tilted higher than negatives so
//! that re-thresholding sweeps behave like a real score distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Arm, ArmTraffic, Dataset, UtteranceRecord};

/// Deployment threshold baked into emitted scores; evaluate simulated
/// datasets at `t_a = t_b = SIMULATED_THRESHOLD`.
pub const SIMULATED_THRESHOLD: f64 = 0.5;

/// True relative metrics implied by a simulation config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rrecall: f64,
    pub rfpr: f64,
}

/// Configuration of the deployment simulation.
///
/// Streams arrive positive with `p_positive`; the collecting model accepts
/// per its recall/FPR; model B's offline acceptance of A's collected audio
/// follows the two `cross_*` probabilities. The reverse direction (A run on
/// B's audio) is not free: both populations share one joint acceptance law,
/// which pins P(A accepts | B accepted, class); see
/// [`derived_reverse_conditionals`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbbaSimConfig {
    pub p_positive: f64,
    pub recall_a: f64,
    pub fpr_a: f64,
    pub recall_b: f64,
    pub fpr_b: f64,
    /// P(B accepts | A collected, true positive).
    pub cross_tp_given_a: f64,
    /// P(B accepts | A collected, false positive).
    pub cross_fp_given_a: f64,
    pub n_streams: u64,
    /// Fraction of streams routed to arm A.
    #[serde(default = "default_arm_split")]
    pub arm_split: f64,
    /// Accepted records that receive a hard label, sampled uniformly across
    /// both arms' accepts (clamped to the number of accepts).
    pub n_labeled: u64,
    pub seed: u64,
}

fn default_arm_split() -> f64 {
    0.5
}

/// Reverse cross-acceptance probabilities (P(A=1|B=1,L=1), P(A=1|B=1,L=0))
/// implied by joint-law consistency. Errors when the config puts either
/// outside (0, 1].
pub fn derived_reverse_conditionals(cfg: &AbbaSimConfig) -> Result<(f64, f64)> {
    let tp = cfg.recall_a * cfg.cross_tp_given_a / cfg.recall_b;
    let fp = cfg.fpr_a * cfg.cross_fp_given_a / cfg.fpr_b;
    if !(tp > 0.0 && tp <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "derived P(A=1|B=1,L=1) = recall_a * cross_tp_given_a / recall_b = {tp:.6} \
             lies outside (0, 1]; recall_b is inconsistent with the A-side cross rate"
        )));
    }
    if !(fp > 0.0 && fp <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "derived P(A=1|B=1,L=0) = fpr_a * cross_fp_given_a / fpr_b = {fp:.6} \
             lies outside (0, 1]; fpr_b is inconsistent with the A-side cross rate"
        )));
    }
    Ok((tp, fp))
}

impl AbbaSimConfig {
    fn validate(&self) -> Result<()> {
        let unit_open = [
            ("p_positive", self.p_positive),
            ("recall_a", self.recall_a),
            ("fpr_a", self.fpr_a),
            ("recall_b", self.recall_b),
            ("fpr_b", self.fpr_b),
            ("arm_split", self.arm_split),
        ];
        for (name, v) in unit_open {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside (0, 1)")));
            }
        }
        for (name, v) in [
            ("cross_tp_given_a", self.cross_tp_given_a),
            ("cross_fp_given_a", self.cross_fp_given_a),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside (0, 1]")));
            }
        }
        if self.n_streams == 0 {
            return Err(Error::InvalidConfig(
                "n_streams must be positive".to_owned(),
            ));
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            rrecall: self.recall_b / self.recall_a,
            rfpr: self.fpr_b / self.fpr_a,
        }
    }
}

/// Score consistent with an accept decision at [`SIMULATED_THRESHOLD`]:
/// accepted scores land in (0.5, 1), rejected in (0, 0.5), positives tilted
/// higher than negatives on both sides.
fn synth_score(rng: &mut ChaCha8Rng, accepted: bool, positive: bool) -> f64 {
    let (a, b) = if positive { (5.0, 2.0) } else { (2.0, 5.0) };
    let tilt = Beta::new(a, b).expect("fixed shape parameters").sample(rng);
    if accepted {
        SIMULATED_THRESHOLD + (1.0 - SIMULATED_THRESHOLD) * tilt
    } else {
        SIMULATED_THRESHOLD * tilt
    }
}

/// Runs the deployment simulation: returns the emitted dataset, the per-arm
/// traffic, and the true ratios. Identical configs produce byte-identical
/// datasets.
pub fn simulate_abba(cfg: &AbbaSimConfig) -> Result<(Dataset, ArmTraffic, GroundTruth)> {
    cfg.validate()?;
    let (rev_tp, rev_fp) = derived_reverse_conditionals(cfg)?;
    let n_a = (cfg.n_streams as f64 * cfg.arm_split).round() as u64;
    let n_b = cfg.n_streams - n_a;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::new();
    let mut true_labels: Vec<u8> = Vec::new();
    for stream in 0..cfg.n_streams {
        let arm = if stream < n_a { Arm::A } else { Arm::B };
        let positive = rng.random_bool(cfg.p_positive);
        let (accept_p, cross_p) = match (arm, positive) {
            (Arm::A, true) => (cfg.recall_a, cfg.cross_tp_given_a),
            (Arm::A, false) => (cfg.fpr_a, cfg.cross_fp_given_a),
            (Arm::B, true) => (cfg.recall_b, rev_tp),
            (Arm::B, false) => (cfg.fpr_b, rev_fp),
        };
        if !rng.random_bool(accept_p) {
            continue;
        }
        let cross = rng.random_bool(cross_p);
        let collector_score = synth_score(&mut rng, true, positive);
        let cross_score = synth_score(&mut rng, cross, positive);
        records.push(UtteranceRecord {
            id: format!("{}-{stream:08}", if arm == Arm::A { 'a' } else { 'b' }),
            arm,
            collector_score,
            cross_score,
            hard_label: None,
            soft_tp_prob: None,
            stratum: "default".to_owned(),
            sampling_weight: 1.0,
        });
        true_labels.push(positive as u8);
    }

    let n_labeled = (cfg.n_labeled as usize).min(records.len());
    for idx in rand::seq::index::sample(&mut rng, records.len(), n_labeled) {
        records[idx].hard_label = Some(true_labels[idx]);
    }

    let dataset = Dataset::from_records(records)?;
    let traffic = ArmTraffic {
        streams_a: n_a,
        streams_b: n_b,
    };
    Ok((dataset, traffic, cfg.ground_truth()))
}

/// Shape parameters of one Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        BetaParams { alpha, beta }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{name}: Beta parameters must be positive, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        Beta::new(self.alpha, self.beta)
            .expect("validated parameters")
            .sample(rng)
            .clamp(0.0, 1.0)
    }
}

/// A simulated label machine: one Beta distribution of emitted TP
/// probabilities per (collecting arm, true class).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMachineSpec {
    pub arm_a_pos: BetaParams,
    pub arm_a_neg: BetaParams,
    pub arm_b_pos: BetaParams,
    pub arm_b_neg: BetaParams,
}

impl LabelMachineSpec {
    /// The same accuracy on every slice: `pos` for true positives, `neg` for
    /// false positives, in both arms.
    pub fn symmetric(pos: BetaParams, neg: BetaParams) -> Self {
        LabelMachineSpec {
            arm_a_pos: pos,
            arm_a_neg: neg,
            arm_b_pos: pos,
            arm_b_neg: neg,
        }
    }

    fn validate(&self) -> Result<()> {
        self.arm_a_pos.validate("arm_a_pos")?;
        self.arm_a_neg.validate("arm_a_neg")?;
        self.arm_b_pos.validate("arm_b_pos")?;
        self.arm_b_neg.validate("arm_b_neg")?;
        Ok(())
    }

    fn params(&self, arm: Arm, positive: bool) -> &BetaParams {
        match (arm, positive) {
            (Arm::A, true) => &self.arm_a_pos,
            (Arm::A, false) => &self.arm_a_neg,
            (Arm::B, true) => &self.arm_b_pos,
            (Arm::B, false) => &self.arm_b_neg,
        }
    }
}

/// Configuration of the soft-label simulation. All four cross-acceptance
/// conditionals are free parameters here; the expected ratios are
/// cross_tp_given_a / cross_tp_given_b and cross_fp_given_a /
/// cross_fp_given_b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsSimConfig {
    /// Fraction of arm-A collected utterances that are true positives.
    pub tp_fraction_a: f64,
    /// Fraction of arm-B collected utterances that are true positives.
    pub tp_fraction_b: f64,
    /// P(B accepts | A collected, true positive).
    pub cross_tp_given_a: f64,
    /// P(B accepts | A collected, false positive).
    pub cross_fp_given_a: f64,
    /// P(A accepts | B collected, true positive).
    pub cross_tp_given_b: f64,
    /// P(A accepts | B collected, false positive).
    pub cross_fp_given_b: f64,
    pub n_per_arm: u64,
    pub machine: LabelMachineSpec,
    pub seed: u64,
}

impl SsSimConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tp_fraction_a", self.tp_fraction_a),
            ("tp_fraction_b", self.tp_fraction_b),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside (0, 1)")));
            }
        }
        for (name, v) in [
            ("cross_tp_given_a", self.cross_tp_given_a),
            ("cross_fp_given_a", self.cross_fp_given_a),
            ("cross_tp_given_b", self.cross_tp_given_b),
            ("cross_fp_given_b", self.cross_fp_given_b),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside (0, 1]")));
            }
        }
        if self.n_per_arm == 0 {
            return Err(Error::InvalidConfig(
                "n_per_arm must be positive".to_owned(),
            ));
        }
        self.machine.validate()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            rrecall: self.cross_tp_given_a / self.cross_tp_given_b,
            rfpr: self.cross_fp_given_a / self.cross_fp_given_b,
        }
    }
}

/// Runs the soft-label simulation. Every record carries both the machine's
/// soft TP probability and the true class as a hard label, so semi-supervised
/// estimates can be compared against their fully supervised counterparts on
/// the same data.
pub fn simulate_ss(cfg: &SsSimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(2 * cfg.n_per_arm as usize);
    for arm in [Arm::A, Arm::B] {
        let (tp_fraction, cross_tp, cross_fp) = match arm {
            Arm::A => (
                cfg.tp_fraction_a,
                cfg.cross_tp_given_a,
                cfg.cross_fp_given_a,
            ),
            Arm::B => (
                cfg.tp_fraction_b,
                cfg.cross_tp_given_b,
                cfg.cross_fp_given_b,
            ),
        };
        for i in 0..cfg.n_per_arm {
            let positive = rng.random_bool(tp_fraction);
            let cross = rng.random_bool(if positive { cross_tp } else { cross_fp });
            let soft = cfg.machine.params(arm, positive).sample(&mut rng);
            records.push(UtteranceRecord {
                id: format!("{}-{i:08}", if arm == Arm::A { 'a' } else { 'b' }),
                arm,
                collector_score: synth_score(&mut rng, true, positive),
                cross_score: synth_score(&mut rng, cross, positive),
                hard_label: Some(positive as u8),
                soft_tp_prob: Some(soft),
                stratum: "default".to_owned(),
                sampling_weight: 1.0,
            });
        }
    }
    Dataset::from_records(records)
}
