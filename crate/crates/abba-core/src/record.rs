//! Record model: one collected utterance per line, validated into a [`Dataset`].
//!
//! Records arrive as line-delimited JSON, one object per line, with the
//! fields of [`UtteranceRecord`]. A record exists because the deployed model
//! of its arm accepted the audio online; `collector_score` is that model's
//! score and `cross_score` is the score the *other* model produced when run
//! offline over the same audio.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deployment arm: population A runs the baseline model, population B the
/// candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

impl Arm {
    pub fn opposite(self) -> Arm {
        match self {
            Arm::A => Arm::B,
            Arm::B => Arm::A,
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arm::A => write!(f, "A"),
            Arm::B => write!(f, "B"),
        }
    }
}

/// One collected audio event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub arm: Arm,
    /// Score from the model that collected the utterance online.
    pub collector_score: f64,
    /// Score from the opposite model, decoded offline.
    pub cross_score: f64,
    /// Human annotation: 1 = true positive, 0 = false positive.
    #[serde(default)]
    pub hard_label: Option<u8>,
    /// Machine-generated probability that the utterance is a true positive.
    #[serde(default)]
    pub soft_tp_prob: Option<f64>,
    #[serde(default = "default_stratum")]
    pub stratum: String,
    /// Inverse-probability weight from stratified annotation.
    #[serde(default = "default_weight")]
    pub sampling_weight: f64,
}

fn default_stratum() -> String {
    "default".to_owned()
}

fn default_weight() -> f64 {
    1.0
}

impl UtteranceRecord {
    /// Whether the opposite model also accepted this utterance at the given
    /// thresholds. Acceptance is strict: a score equal to the threshold
    /// rejects.
    pub fn cross_accepted(&self, thresholds: &Thresholds) -> bool {
        self.cross_score > thresholds.cross_cutoff(self.arm)
    }

    fn validate(&self) -> Result<()> {
        if let Some(label) = self.hard_label {
            if label > 1 {
                return Err(Error::invalid_record(
                    &self.id,
                    format!("hard_label must be 0 or 1, got {label}"),
                ));
            }
        }
        if let Some(p) = self.soft_tp_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid_record(
                    &self.id,
                    format!("soft_tp_prob {p} outside [0, 1]"),
                ));
            }
        }
        if !self.sampling_weight.is_finite() || self.sampling_weight < 0.0 {
            return Err(Error::invalid_record(
                &self.id,
                format!(
                    "sampling_weight must be finite and >= 0, got {}",
                    self.sampling_weight
                ),
            ));
        }
        if !self.collector_score.is_finite() || !self.cross_score.is_finite() {
            return Err(Error::invalid_record(&self.id, "scores must be finite"));
        }
        Ok(())
    }
}

/// Acceptance thresholds for the two models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_a: f64,
    pub t_b: f64,
}

impl Thresholds {
    /// Threshold the *opposite* model applies to an utterance collected in
    /// `arm`: A-arm audio is decoded offline by model B and vice versa.
    pub fn cross_cutoff(&self, arm: Arm) -> f64 {
        match arm {
            Arm::A => self.t_b,
            Arm::B => self.t_a,
        }
    }

    pub fn swapped(&self) -> Thresholds {
        Thresholds {
            t_a: self.t_b,
            t_b: self.t_a,
        }
    }
}

/// Total online opportunities (collected plus rejected) per arm. Needed only
/// by the classic A/B-test baseline, which normalizes false accepts by
/// traffic rather than by labeled negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmTraffic {
    pub streams_a: u64,
    pub streams_b: u64,
}

/// A validated, immutable collection of records with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<UtteranceRecord>,
}

impl Dataset {
    /// Validates per-record fields and id uniqueness.
    pub fn from_records(records: Vec<UtteranceRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for rec in &records {
            rec.validate()?;
            if !seen.insert(rec.id.as_str()) {
                return Err(Error::DuplicateId(rec.id.clone()));
            }
        }
        drop(seen);
        Ok(Dataset { records })
    }

    /// Records that bypassed validation because they come from an already
    /// validated dataset (filtering, relabeling).
    pub(crate) fn from_validated(records: Vec<UtteranceRecord>) -> Self {
        Dataset { records }
    }

    /// Reads the line-delimited record format. Blank lines are skipped;
    /// malformed lines report their 1-based line number.
    pub fn ingest<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: UtteranceRecord = serde_json::from_str(&line).map_err(|e| Error::Format {
                line: idx + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Dataset::from_records(records)
    }

    /// Writes the line-delimited record format (UTF-8, LF).
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut writer, rec)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn arm_count(&self, arm: Arm) -> usize {
        self.records.iter().filter(|r| r.arm == arm).count()
    }

    pub fn iter_arm(&self, arm: Arm) -> impl Iterator<Item = &UtteranceRecord> {
        self.records.iter().filter(move |r| r.arm == arm)
    }

    /// Relabels every record with the opposite arm. Thresholds must be
    /// swapped alongside (see [`Thresholds::swapped`]) for the cross-decode
    /// semantics to stay coherent.
    pub fn swapped_arms(&self) -> Dataset {
        let records = self
            .records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.arm = r.arm.opposite();
                r
            })
            .collect();
        Dataset::from_validated(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, arm: Arm) -> UtteranceRecord {
        UtteranceRecord {
            id: id.to_owned(),
            arm,
            collector_score: 0.8,
            cross_score: 0.6,
            hard_label: Some(1),
            soft_tp_prob: None,
            stratum: "default".to_owned(),
            sampling_weight: 1.0,
        }
    }

    #[test]
    fn ingest_empty_source() {
        let ds = Dataset::ingest(std::io::Cursor::new("")).unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.arm_count(Arm::A), 0);
        assert_eq!(ds.arm_count(Arm::B), 0);
    }

    #[test]
    fn ingest_two_records_one_per_arm() {
        let lines = concat!(
            r#"{"id":"u1","arm":"A","collector_score":0.9,"cross_score":0.7,"hard_label":1,"soft_tp_prob":null,"stratum":"default","sampling_weight":1}"#,
            "\n",
            r#"{"id":"u2","arm":"B","collector_score":0.8,"cross_score":0.2,"hard_label":0,"soft_tp_prob":0.1,"stratum":"agree","sampling_weight":2.5}"#,
            "\n",
        );
        let ds = Dataset::ingest(std::io::Cursor::new(lines)).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.arm_count(Arm::A), 1);
        assert_eq!(ds.arm_count(Arm::B), 1);
        assert_eq!(ds.records()[1].sampling_weight, 2.5);
        assert_eq!(ds.records()[1].stratum, "agree");
    }

    #[test]
    fn ingest_applies_defaults() {
        let line = r#"{"id":"u1","arm":"A","collector_score":0.9,"cross_score":0.7}"#;
        let ds = Dataset::ingest(std::io::Cursor::new(line)).unwrap();
        let rec = &ds.records()[0];
        assert_eq!(rec.hard_label, None);
        assert_eq!(rec.soft_tp_prob, None);
        assert_eq!(rec.stratum, "default");
        assert_eq!(rec.sampling_weight, 1.0);
    }

    #[test]
    fn soft_tp_prob_out_of_range_names_the_record() {
        let mut rec = record("u7", Arm::A);
        rec.soft_tp_prob = Some(1.3);
        let err = Dataset::from_records(vec![rec]).unwrap_err();
        match err {
            Error::InvalidRecord { id, message } => {
                assert_eq!(id, "u7");
                assert!(message.contains("1.3"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err =
            Dataset::from_records(vec![record("u1", Arm::A), record("u1", Arm::B)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "u1"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let lines = concat!(
            r#"{"id":"u1","arm":"A","collector_score":0.9,"cross_score":0.7}"#,
            "\n",
            "not json\n",
        );
        let err = Dataset::ingest(std::io::Cursor::new(lines)).unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }));
    }

    #[test]
    fn negative_weight_rejected() {
        let mut rec = record("u1", Arm::A);
        rec.sampling_weight = -0.5;
        assert!(Dataset::from_records(vec![rec]).is_err());
    }

    #[test]
    fn cross_acceptance_is_strict_and_uses_opposite_threshold() {
        let t = Thresholds { t_a: 0.3, t_b: 0.6 };
        let mut rec = record("u1", Arm::A);
        rec.cross_score = 0.6;
        assert!(!rec.cross_accepted(&t), "score equal to threshold rejects");
        rec.cross_score = 0.6000001;
        assert!(rec.cross_accepted(&t));
        rec.arm = Arm::B;
        rec.cross_score = 0.31;
        assert!(rec.cross_accepted(&t), "B-arm records compare against t_a");
    }

    #[test]
    fn jsonl_round_trip() {
        let mut rec = record("u1", Arm::B);
        rec.soft_tp_prob = Some(0.25);
        let ds = Dataset::from_records(vec![rec]).unwrap();
        let mut buf = Vec::new();
        ds.write_jsonl(&mut buf).unwrap();
        let back = Dataset::ingest(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, ds);
    }
}
