//! Annotation-budget planning across agreement strata.
//!
//! Cross-decoding splits collected utterances into agreement and disagreement
//! strata with very different expected false-positive rates. Allocating the
//! annotation budget proportionally to w_j * sqrt(p_j (1 - p_j)) minimizes
//! the variance of the pooled rate estimate; the efficiency figure says how
//! much budget random sampling would waste for the same variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One population stratum with its anticipated false-positive rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub name: String,
    /// Population proportion in [0, 1]; proportions sum to 1 across strata.
    pub weight: f64,
    /// Anticipated FPR in (0, 1), e.g. from previously annotated data.
    pub expected_fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumAllocation {
    pub name: String,
    /// Annotations assigned after integer rounding.
    pub count: u64,
    /// Exact optimal share of the budget before rounding.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub budget: u64,
    pub allocations: Vec<StratumAllocation>,
    /// Fractional variance reduction versus simple random sampling, in [0, 1).
    pub efficiency: f64,
    /// Overall FPR used in the efficiency denominator.
    pub overall_fpr: f64,
    /// Whether `overall_fpr` was supplied by the caller rather than pooled
    /// from the strata.
    pub overall_fpr_overridden: bool,
}

fn validate_strata(strata: &[StratumSpec]) -> Result<()> {
    if strata.is_empty() {
        return Err(Error::InvalidConfig("no strata given".to_owned()));
    }
    let mut total = 0.0;
    for s in strata {
        if !(s.weight >= 0.0 && s.weight <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stratum `{}`: weight {} outside [0, 1]",
                s.name, s.weight
            )));
        }
        if !(s.expected_fpr > 0.0 && s.expected_fpr < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stratum `{}`: expected_fpr {} outside (0, 1)",
                s.name, s.expected_fpr
            )));
        }
        total += s.weight;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "stratum weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Optimal annotation counts per stratum for a fixed budget.
///
/// Fractional shares are computed exactly, then rounded by largest remainder
/// so the counts sum to the budget. `overall_fpr`, when given, overrides the
/// pooled rate in the efficiency denominator.
pub fn neyman_allocate(
    budget: u64,
    strata: &[StratumSpec],
    overall_fpr: Option<f64>,
) -> Result<AllocationPlan> {
    validate_strata(strata)?;
    if budget < strata.len() as u64 {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} is smaller than the number of strata {}",
            strata.len()
        )));
    }
    if let Some(p) = overall_fpr {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "overall_fpr {p} outside (0, 1)"
            )));
        }
    }

    let spread: Vec<f64> = strata
        .iter()
        .map(|s| s.weight * (s.expected_fpr * (1.0 - s.expected_fpr)).sqrt())
        .collect();
    let spread_total: f64 = spread.iter().sum();
    if spread_total <= 0.0 {
        return Err(Error::InvalidConfig(
            "every stratum has zero weight; nothing to allocate".to_owned(),
        ));
    }
    let fractions: Vec<f64> = spread.iter().map(|v| v / spread_total).collect();

    // Largest-remainder rounding keeps the total exactly at the budget.
    let targets: Vec<f64> = fractions.iter().map(|f| f * budget as f64).collect();
    let mut counts: Vec<u64> = targets.iter().map(|t| t.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = targets[i] - targets[i].floor();
        let rj = targets[j] - targets[j].floor();
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().take((budget - assigned) as usize) {
        counts[i] += 1;
    }

    let pooled: f64 = strata.iter().map(|s| s.weight * s.expected_fpr).sum();
    let p = overall_fpr.unwrap_or(pooled);
    let efficiency = 1.0 - spread_total * spread_total / (p * (1.0 - p));

    Ok(AllocationPlan {
        budget,
        allocations: strata
            .iter()
            .zip(counts.iter().zip(fractions.iter()))
            .map(|(s, (&count, &fraction))| StratumAllocation {
                name: s.name.clone(),
                count,
                fraction,
            })
            .collect(),
        efficiency,
        overall_fpr: p,
        overall_fpr_overridden: overall_fpr.is_some(),
    })
}

/// Inverse-probability record weights that make weighted counts from a
/// stratified annotation unbiased for the population counts: stratum j gets
/// weight w_j / (annotated share of j).
pub fn derive_weights(strata: &[StratumSpec], annotated: &[u64]) -> Result<Vec<f64>> {
    validate_strata(strata)?;
    if annotated.len() != strata.len() {
        return Err(Error::InvalidConfig(format!(
            "{} annotated counts for {} strata",
            annotated.len(),
            strata.len()
        )));
    }
    let total: u64 = annotated.iter().sum();
    if total == 0 {
        return Err(Error::InvalidConfig("no annotations at all".to_owned()));
    }
    strata
        .iter()
        .zip(annotated)
        .map(|(s, &n)| {
            if n == 0 {
                if s.weight > 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "stratum `{}` has population weight {} but zero annotations",
                        s.name, s.weight
                    )));
                }
                return Ok(0.0);
            }
            Ok(s.weight * total as f64 / n as f64)
        })
        .collect()
}
