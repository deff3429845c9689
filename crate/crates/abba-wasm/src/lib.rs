//! Browser bindings for the interactive demo page.
//!
//! Three operations back the static page in `www/`: a deployment simulator
//! with estimates against known ground truth, a candidate-threshold sweep,
//! and an annotation-budget planner. Requests and responses travel as JSON
//! strings so the page needs no generated glue types; every response is
//! `{"ok": true, ...}` or `{"ok": false, "error": "..."}`.

use abba_core::{
    bootstrap_ci, build_counts, neyman_allocate, rfpr_ab_test, rfpr_approx, rfpr_direct,
    rrecall_approx, rrecall_direct, select_threshold, simulate_abba, threshold_sweep,
    AbbaSimConfig, Arm, BootstrapConfig, Estimator, RatioEstimate, SelectionGoal, StratumSpec,
    SweepMethod, Thresholds, SIMULATED_THRESHOLD,
};
use serde::Deserialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn respond(result: Result<serde_json::Value, String>) -> String {
    let value = match result {
        Ok(mut value) => {
            value["ok"] = json!(true);
            value
        }
        Err(error) => json!({ "ok": false, "error": error }),
    };
    value.to_string()
}

fn parse<'a, T: Deserialize<'a>>(json: &'a str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))
}

const T: Thresholds = Thresholds {
    t_a: SIMULATED_THRESHOLD,
    t_b: SIMULATED_THRESHOLD,
};

#[derive(Deserialize)]
struct SimulateEstimateRequest {
    config: AbbaSimConfig,
    /// Bootstrap replicates per estimator; point estimates only when absent.
    #[serde(default)]
    bootstrap_replicates: Option<usize>,
    #[serde(default)]
    bootstrap_seed: Option<u64>,
}

fn estimate_value(est: &RatioEstimate) -> serde_json::Value {
    json!({
        "metric": est.metric,
        "method": est.method,
        "point": est.point,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
    })
}

fn simulate_estimate_impl(request: &str) -> Result<serde_json::Value, String> {
    let req: SimulateEstimateRequest = parse(request)?;
    let (dataset, traffic, truth) = simulate_abba(&req.config).map_err(|e| e.to_string())?;
    let counts = build_counts(&dataset, &T);

    let mut estimates = Vec::new();
    match req.bootstrap_replicates {
        Some(replicates) => {
            let seed = req.bootstrap_seed.ok_or("bootstrap_seed is required")?;
            let config = BootstrapConfig {
                replicates,
                level: 0.95,
                seed,
            };
            for estimator in [
                Estimator::DirectRRecall,
                Estimator::DirectRFpr,
                Estimator::ApproxRRecall,
                Estimator::ApproxRFpr,
                Estimator::AbTestRFpr,
            ] {
                match bootstrap_ci(&dataset, &T, estimator, Some(&traffic), &config) {
                    Ok(ci) => estimates.push(estimate_value(&ci.estimate)),
                    Err(e) => estimates.push(json!({
                        "metric": estimator.metric(),
                        "method": estimator.method(),
                        "error": e.to_string(),
                    })),
                }
            }
        }
        None => {
            let point_estimates = [
                rrecall_direct(&counts),
                rfpr_direct(&counts),
                rrecall_approx(&counts),
                rfpr_approx(&counts),
                rfpr_ab_test(&counts, &traffic),
            ];
            for outcome in point_estimates {
                match outcome {
                    Ok(est) => estimates.push(estimate_value(&est)),
                    Err(e) => estimates.push(json!({ "error": e.to_string() })),
                }
            }
        }
    }

    Ok(json!({
        "records": dataset.len(),
        "arm_a": dataset.arm_count(Arm::A),
        "arm_b": dataset.arm_count(Arm::B),
        "labeled": dataset.records().iter().filter(|r| r.hard_label.is_some()).count(),
        "ground_truth": truth,
        "estimates": estimates,
    }))
}

/// Simulates a deployment and estimates both ratios on it.
#[wasm_bindgen]
pub fn simulate_estimate(request: &str) -> String {
    respond(simulate_estimate_impl(request))
}

#[derive(Deserialize)]
struct SweepRequest {
    config: AbbaSimConfig,
    grid_lo: f64,
    grid_hi: f64,
    grid_step: f64,
    #[serde(default)]
    approx: bool,
}

fn sweep_curve_impl(request: &str) -> Result<serde_json::Value, String> {
    let req: SweepRequest = parse(request)?;
    let ascending = req.grid_lo.is_finite()
        && req.grid_hi.is_finite()
        && req.grid_step.is_finite()
        && req.grid_step > 0.0
        && req.grid_hi >= req.grid_lo;
    if !ascending {
        return Err("grid must ascend with a positive step".to_owned());
    }
    let count = ((req.grid_hi - req.grid_lo) / req.grid_step + 1e-9).floor() as usize + 1;
    if count > 1000 {
        return Err(format!("grid spans {count} points (limit 1000)"));
    }
    let (dataset, _, truth) = simulate_abba(&req.config).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..count)
        .map(|i| req.grid_lo + req.grid_step * i as f64)
        .collect();
    let method = if req.approx {
        SweepMethod::Approx
    } else {
        SweepMethod::Direct
    };
    let rows = threshold_sweep(&dataset, T.t_a, SIMULATED_THRESHOLD, &grid, method)
        .map_err(|e| e.to_string())?;

    let selections: serde_json::Value = json!({
        "match_fpr": select_threshold(&rows, SelectionGoal::MatchFpr).map(|r| r.t_b),
        "match_recall": select_threshold(&rows, SelectionGoal::MatchRecall).map(|r| r.t_b),
        "dominate": select_threshold(&rows, SelectionGoal::Dominate).map(|r| r.t_b),
    });
    Ok(json!({
        "ground_truth": truth,
        "rows": rows.iter().map(|r| json!({
            "t_b": r.t_b,
            "rfpr": r.rfpr.point,
            "rrecall": r.rrecall.point,
            "region": r.region,
        })).collect::<Vec<_>>(),
        "selections": selections,
    }))
}

/// Re-estimates both ratios across a grid of candidate thresholds on a
/// simulated deployment.
#[wasm_bindgen]
pub fn sweep_curve(request: &str) -> String {
    respond(sweep_curve_impl(request))
}

#[derive(Deserialize)]
struct PlanRequest {
    budget: u64,
    strata: Vec<StratumSpec>,
    #[serde(default)]
    overall_fpr: Option<f64>,
}

fn plan_annotation_impl(request: &str) -> Result<serde_json::Value, String> {
    let req: PlanRequest = parse(request)?;
    let plan =
        neyman_allocate(req.budget, &req.strata, req.overall_fpr).map_err(|e| e.to_string())?;
    Ok(json!({ "plan": plan }))
}

/// Plans an annotation budget across strata.
#[wasm_bindgen]
pub fn plan_annotation(request: &str) -> String {
    respond(plan_annotation_impl(request))
}
