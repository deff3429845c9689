//! Machine-readable run reports and their table rendering.

use abba_core::{AllocationPlan, RatioEstimate, SweepRow, Thresholds};
use serde::{Deserialize, Serialize};

/// Everything one command run produced. Serializes losslessly to JSON; the
/// table rendering is for humans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Subcommand that produced the report.
    pub command: String,
    pub version: String,
    /// SHA-256 of the primary input file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<RatioEstimate>,
    /// Records skipped by supervised counting because they have no hard
    /// label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_unlabeled: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<SweepRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratum_weights: Option<Vec<StratumWeight>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumWeight {
    pub name: String,
    pub sampling_weight: f64,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_digest: None,
            seed: None,
            thresholds: None,
            estimates: Vec::new(),
            excluded_unlabeled: None,
            warnings: Vec::new(),
            sweep: None,
            selected: None,
            allocation: None,
            stratum_weights: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let mut push = |line: String| {
            out.push_str(&line);
            out.push('\n');
        };
        push(format!("# {} (v{})", self.command, self.version));
        if let Some(t) = &self.thresholds {
            push(format!("thresholds: t_a = {}, t_b = {}", t.t_a, t.t_b));
        }
        if let Some(seed) = self.seed {
            push(format!("seed: {seed}"));
        }
        if let Some(n) = self.excluded_unlabeled {
            if n > 0 {
                push(format!("excluded (no hard label): {n}"));
            }
        }
        if !self.estimates.is_empty() {
            push(format!(
                "{:<10} {:<16} {:>9} {:>22} {:>6}",
                "metric", "method", "point", "interval", "reps"
            ));
            for e in &self.estimates {
                push(format!(
                    "{:<10} {:<16} {:>9.4} {:>22} {:>6}",
                    e.metric.to_string(),
                    e.method.to_string(),
                    e.point,
                    match (e.ci_low, e.ci_high, e.ci_level) {
                        (Some(lo), Some(hi), Some(level)) => format!("[{lo:.4}, {hi:.4}] @{level}"),
                        _ => "-".to_owned(),
                    },
                    e.replicates.map_or("-".to_owned(), |r| r.to_string()),
                ));
            }
        }
        if let Some(rows) = &self.sweep {
            push(format!(
                "{:<8} {:>9} {:>9}  {}",
                "t_b", "rFPR", "rRecall", "region"
            ));
            for row in rows {
                push(format!(
                    "{:<8} {:>9.4} {:>9.4}  {}",
                    row.t_b, row.rfpr.point, row.rrecall.point, row.region
                ));
            }
        }
        if let Some(sel) = &self.selected {
            push(format!(
                "selected: t_b = {} (rFPR {:.4}, rRecall {:.4}, {})",
                sel.t_b, sel.rfpr.point, sel.rrecall.point, sel.region
            ));
        }
        if let Some(plan) = &self.allocation {
            push(format!(
                "budget {} | efficiency {:.2}% | overall FPR {:.4}{}",
                plan.budget,
                100.0 * plan.efficiency,
                plan.overall_fpr,
                if plan.overall_fpr_overridden {
                    " (override)"
                } else {
                    " (pooled)"
                }
            ));
            push(format!(
                "{:<16} {:>9} {:>10}",
                "stratum", "count", "fraction"
            ));
            for a in &plan.allocations {
                push(format!(
                    "{:<16} {:>9} {:>9.2}%",
                    a.name,
                    a.count,
                    100.0 * a.fraction
                ));
            }
        }
        if let Some(weights) = &self.stratum_weights {
            push(format!("{:<16} {:>16}", "stratum", "sampling_weight"));
            for w in weights {
                push(format!("{:<16} {:>16.6}", w.name, w.sampling_weight));
            }
        }
        for w in &self.warnings {
            push(format!("warning: {w}"));
        }
        out
    }
}
