//! Command implementations.

use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use abba_core::{
    annotate_soft, bootstrap_ci, build_counts, derive_weights, neyman_allocate, rfpr_ab_test,
    rfpr_approx, rfpr_direct, rrecall_approx, rrecall_direct, select_threshold, simulate_abba,
    simulate_ss, ss_rfpr, ss_rrecall, threshold_sweep, AbbaSimConfig, Arm, ArmTraffic,
    BootstrapConfig, CalibrationModel, Dataset, Estimator, GroundTruth, RatioEstimate,
    SelectionGoal, SsSimConfig, StratumSpec, SweepMethod, Thresholds, SIMULATED_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::report::{Report, StratumWeight};
use crate::{
    AllocateArgs, AppError, CalibrateArgs, EstimateArgs, GoalArg, MethodArg, OutputFormat, SimKind,
    SimulateArgs, SsEstimateArgs, SweepArgs, SweepMethodArg,
};

type CmdResult = Result<(), AppError>;

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").expect("writing to a String");
    }
    hex
}

fn read_file(path: &Path) -> Result<Vec<u8>, AppError> {
    fs::read(path).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<(Dataset, String), AppError> {
    let bytes = read_file(path)?;
    let digest = sha256_hex(&bytes);
    let dataset = Dataset::ingest(BufReader::new(bytes.as_slice())).map_err(AppError::from)?;
    Ok((dataset, digest))
}

fn emit(report: &Report, format: OutputFormat) {
    match format {
        OutputFormat::Json => println!("{}", report.to_json()),
        OutputFormat::Table => print!("{}", report.render_table()),
    }
}

/// Sidecar written next to every simulated dataset.
#[derive(Debug, Serialize, Deserialize)]
struct SimSidecar {
    kind: String,
    seed: u64,
    config_digest: String,
    thresholds: Thresholds,
    ground_truth: GroundTruth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arm_traffic: Option<ArmTraffic>,
}

fn sidecar_path(output: &Path) -> PathBuf {
    match output.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => output.with_extension("meta.json"),
        _ => {
            let mut name = output.as_os_str().to_owned();
            name.push(".meta.json");
            PathBuf::from(name)
        }
    }
}

pub fn simulate(args: SimulateArgs) -> CmdResult {
    let config_bytes = read_file(&args.config)?;
    let config_digest = sha256_hex(&config_bytes);
    let thresholds = Thresholds {
        t_a: SIMULATED_THRESHOLD,
        t_b: SIMULATED_THRESHOLD,
    };

    let (dataset, sidecar) = match args.kind {
        SimKind::Abba => {
            let cfg: AbbaSimConfig = serde_json::from_slice(&config_bytes)
                .map_err(|e| AppError::Input(format!("{}: {e}", args.config.display())))?;
            let (dataset, traffic, truth) = simulate_abba(&cfg)?;
            let sidecar = SimSidecar {
                kind: "abba".to_owned(),
                seed: cfg.seed,
                config_digest: config_digest.clone(),
                thresholds,
                ground_truth: truth,
                arm_traffic: Some(traffic),
            };
            (dataset, sidecar)
        }
        SimKind::Ss => {
            let cfg: SsSimConfig = serde_json::from_slice(&config_bytes)
                .map_err(|e| AppError::Input(format!("{}: {e}", args.config.display())))?;
            let dataset = simulate_ss(&cfg)?;
            let sidecar = SimSidecar {
                kind: "ss".to_owned(),
                seed: cfg.seed,
                config_digest: config_digest.clone(),
                thresholds,
                ground_truth: cfg.ground_truth(),
                arm_traffic: None,
            };
            (dataset, sidecar)
        }
    };

    let mut out = Vec::new();
    dataset.write_jsonl(&mut out).map_err(AppError::from)?;
    fs::write(&args.output, out)
        .map_err(|e| AppError::Input(format!("{}: {e}", args.output.display())))?;
    let meta = sidecar_path(&args.output);
    fs::write(
        &meta,
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
    )
    .map_err(|e| AppError::Input(format!("{}: {e}", meta.display())))?;

    let labeled = dataset
        .records()
        .iter()
        .filter(|r| r.hard_label.is_some())
        .count();
    let mut report = Report::new("simulate");
    report.config_digest = Some(config_digest);
    report.seed = Some(sidecar.seed);
    report.thresholds = Some(thresholds);
    report.warnings = Vec::new();
    match args.format {
        OutputFormat::Json => {
            let summary = serde_json::json!({
                "command": "simulate",
                "kind": sidecar.kind,
                "output": args.output.display().to_string(),
                "records": dataset.len(),
                "arm_a": dataset.arm_count(Arm::A),
                "arm_b": dataset.arm_count(Arm::B),
                "labeled": labeled,
                "ground_truth": sidecar.ground_truth,
                "seed": sidecar.seed,
                "config_digest": report.config_digest,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
        }
        OutputFormat::Table => {
            println!(
                "wrote {} records ({} arm A, {} arm B, {labeled} labeled) to {}",
                dataset.len(),
                dataset.arm_count(Arm::A),
                dataset.arm_count(Arm::B),
                args.output.display()
            );
            println!(
                "ground truth: rRecall {:.4}, rFPR {:.4} (sidecar {})",
                sidecar.ground_truth.rrecall,
                sidecar.ground_truth.rfpr,
                meta.display()
            );
        }
    }
    Ok(())
}

fn load_traffic(path: &Path) -> Result<ArmTraffic, AppError> {
    let bytes = read_file(path)?;
    if let Ok(traffic) = serde_json::from_slice::<ArmTraffic>(&bytes) {
        return Ok(traffic);
    }
    // Accept a simulation sidecar as the traffic source.
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value["arm_traffic"].clone())
        .map_err(|_| AppError::Input(format!("{}: no arm traffic found", path.display())))
}

fn validated_thresholds(t_a: f64, t_b: f64) -> Result<Thresholds, AppError> {
    if !(t_a.is_finite() && t_b.is_finite()) {
        return Err(AppError::Input(format!(
            "thresholds must be finite, got --ta {t_a} --tb {t_b}"
        )));
    }
    Ok(Thresholds { t_a, t_b })
}

pub fn estimate(args: EstimateArgs) -> CmdResult {
    let (dataset, digest) = load_dataset(&args.input)?;
    let thresholds = validated_thresholds(args.ta, args.tb)?;
    let mut methods = Vec::new();
    for method in &args.methods {
        if !methods.contains(method) {
            methods.push(*method);
        }
    }
    let traffic = match &args.traffic {
        Some(path) => Some(load_traffic(path)?),
        None => None,
    };
    if methods.contains(&MethodArg::Abtest) && traffic.is_none() {
        return Err(AppError::Input(
            "--method abtest requires --traffic".to_owned(),
        ));
    }

    let counts = build_counts(&dataset, &thresholds);
    let mut report = Report::new("estimate");
    report.config_digest = Some(digest);
    report.seed = args.seed;
    report.thresholds = Some(thresholds);
    report.excluded_unlabeled = Some(counts.n_unlabeled);
    if let Some(traffic) = &traffic {
        for (streams, arm) in [(traffic.streams_a, Arm::A), (traffic.streams_b, Arm::B)] {
            let collected = dataset.arm_count(arm) as u64;
            if streams < collected {
                report.warnings.push(format!(
                    "traffic for arm {arm} ({streams} streams) is below the {collected} collected records"
                ));
            }
        }
    }

    let mut requested: Vec<(Estimator, &str)> = Vec::new();
    for method in &methods {
        match method {
            MethodArg::Direct => {
                requested.push((Estimator::DirectRRecall, "rRecall/direct"));
                requested.push((Estimator::DirectRFpr, "rFPR/direct"));
            }
            MethodArg::Approx => {
                requested.push((Estimator::ApproxRRecall, "rRecall/approx"));
                requested.push((Estimator::ApproxRFpr, "rFPR/approx"));
            }
            MethodArg::Abtest => requested.push((Estimator::AbTestRFpr, "rFPR/ab_test")),
        }
    }

    let mut first_error: Option<AppError> = None;
    for (estimator, label) in requested {
        let outcome: Result<RatioEstimate, abba_core::Error> = match args.bootstrap {
            Some(replicates) => {
                let config = BootstrapConfig {
                    replicates,
                    level: args.level,
                    seed: args.seed.expect("clap enforces --seed with --bootstrap"),
                };
                bootstrap_ci(&dataset, &thresholds, estimator, traffic.as_ref(), &config).map(
                    |ci| {
                        if ci.dropped_replicates > 0 {
                            report.warnings.push(format!(
                                "{label}: {} of {replicates} replicates undefined, dropped",
                                ci.dropped_replicates
                            ));
                        }
                        ci.estimate
                    },
                )
            }
            None => match estimator {
                Estimator::DirectRRecall => rrecall_direct(&counts),
                Estimator::DirectRFpr => rfpr_direct(&counts),
                Estimator::ApproxRRecall => rrecall_approx(&counts),
                Estimator::ApproxRFpr => rfpr_approx(&counts),
                Estimator::AbTestRFpr => {
                    rfpr_ab_test(&counts, traffic.as_ref().expect("checked above"))
                }
                _ => unreachable!("ss estimators are not reachable from estimate"),
            },
        };
        match outcome {
            Ok(estimate) => report.estimates.push(estimate),
            Err(err) => {
                let hint = if matches!(
                    err,
                    abba_core::Error::UndefinedRatio { .. }
                        | abba_core::Error::BootstrapUnstable { .. }
                ) {
                    "; the approx method handles sparse false positives"
                } else {
                    ""
                };
                report.warnings.push(format!("{label}: {err}{hint}"));
                first_error.get_or_insert(AppError::from(err));
            }
        }
    }

    if report.estimates.is_empty() {
        if let Some(err) = first_error {
            return Err(err);
        }
        return Err(AppError::Input("no estimation method requested".to_owned()));
    }
    emit(&report, args.format);
    Ok(())
}

pub fn ss_estimate(args: SsEstimateArgs) -> CmdResult {
    let (mut dataset, digest) = load_dataset(&args.input)?;
    let thresholds = validated_thresholds(args.ta, args.tb)?;

    if let (Some(model_path), Some(scores_path)) = (&args.calibration, &args.scores) {
        let model_bytes = read_file(model_path)?;
        let model = CalibrationModel::from_json(
            std::str::from_utf8(&model_bytes)
                .map_err(|e| AppError::Input(format!("{}: {e}", model_path.display())))?,
        )?;
        let scores_bytes = read_file(scores_path)?;
        let scores: HashMap<String, f64> = serde_json::from_slice(&scores_bytes)
            .map_err(|e| AppError::Input(format!("{}: {e}", scores_path.display())))?;
        dataset = annotate_soft(&dataset, &model, &scores)?;
    }

    let mut report = Report::new("ss-estimate");
    report.config_digest = Some(digest);
    report.seed = args.seed;
    report.thresholds = Some(thresholds);

    match args.bootstrap {
        Some(replicates) => {
            let config = BootstrapConfig {
                replicates,
                level: args.level,
                seed: args.seed.expect("clap enforces --seed with --bootstrap"),
            };
            for estimator in [Estimator::SsRRecall, Estimator::SsRFpr] {
                let ci = bootstrap_ci(&dataset, &thresholds, estimator, None, &config)?;
                if ci.dropped_replicates > 0 {
                    report.warnings.push(format!(
                        "{}/{}: {} of {replicates} replicates undefined, dropped",
                        ci.estimate.metric, ci.estimate.method, ci.dropped_replicates
                    ));
                }
                report.estimates.push(ci.estimate);
            }
        }
        None => {
            report.estimates.push(ss_rrecall(&dataset, &thresholds)?);
            report.estimates.push(ss_rfpr(&dataset, &thresholds)?);
        }
    }
    emit(&report, args.format);
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CalibrationPair {
    score: f64,
    label: u8,
    #[serde(default)]
    weight: Option<f64>,
}

pub fn calibrate(args: CalibrateArgs) -> CmdResult {
    let bytes = read_file(&args.input)?;
    let digest = sha256_hex(&bytes);
    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    let mut any_weight = false;
    for (idx, line) in std::str::from_utf8(&bytes)
        .map_err(|e| AppError::Input(format!("{}: {e}", args.input.display())))?
        .lines()
        .enumerate()
    {
        if line.trim().is_empty() {
            continue;
        }
        let pair: CalibrationPair = serde_json::from_str(line)
            .map_err(|e| AppError::Input(format!("line {}: {e}", idx + 1)))?;
        pairs.push((pair.score, pair.label));
        any_weight |= pair.weight.is_some();
        weights.push(pair.weight.unwrap_or(1.0));
    }
    let model = CalibrationModel::fit(&pairs, if any_weight { Some(&weights) } else { None })?;
    fs::write(&args.output, model.to_json().map_err(AppError::from)?)
        .map_err(|e| AppError::Input(format!("{}: {e}", args.output.display())))?;

    match args.format {
        OutputFormat::Json => {
            let summary = serde_json::json!({
                "command": "calibrate",
                "pairs": pairs.len(),
                "model": args.output.display().to_string(),
                "coefficients": model.coefficients,
                "score_domain": model.score_domain,
                "monotone": model.monotone_on_domain,
                "config_digest": digest,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
        }
        OutputFormat::Table => {
            println!(
                "fitted cubic on {} pairs over [{:.4}, {:.4}]; monotone: {}; wrote {}",
                pairs.len(),
                model.score_domain.0,
                model.score_domain.1,
                model.monotone_on_domain,
                args.output.display()
            );
            if !model.monotone_on_domain {
                println!("warning: fitted mapping is not monotone over the domain");
            }
        }
    }
    Ok(())
}

pub fn allocate(args: AllocateArgs) -> CmdResult {
    let bytes = read_file(&args.strata)?;
    let strata: Vec<StratumSpec> = serde_json::from_slice(&bytes)
        .map_err(|e| AppError::Input(format!("{}: {e}", args.strata.display())))?;
    let plan = neyman_allocate(args.budget, &strata, args.overall_fpr)?;

    let mut report = Report::new("allocate");
    report.config_digest = Some(sha256_hex(&bytes));
    report.allocation = Some(plan);
    if let Some(annotated) = &args.annotated {
        let weights = derive_weights(&strata, annotated)?;
        report.stratum_weights = Some(
            strata
                .iter()
                .zip(weights)
                .map(|(s, w)| StratumWeight {
                    name: s.name.clone(),
                    sampling_weight: w,
                })
                .collect(),
        );
    }
    emit(&report, args.format);
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, AppError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(AppError::Input(format!(
            "--tb-grid `{spec}` is not lo:hi:step"
        )));
    };
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| AppError::Input(format!("--tb-grid `{spec}`: {e}")))
    };
    let (lo, hi, step) = (parse(lo)?, parse(hi)?, parse(step)?);
    let ascending = lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo;
    if !ascending {
        return Err(AppError::Input(format!(
            "--tb-grid `{spec}` is not an ascending range"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > MAX_GRID_POINTS {
        return Err(AppError::Input(format!(
            "--tb-grid `{spec}` spans {count} points (limit {MAX_GRID_POINTS})"
        )));
    }
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

const MAX_GRID_POINTS: usize = 10_000;

pub fn sweep(args: SweepArgs) -> CmdResult {
    let (dataset, digest) = load_dataset(&args.input)?;
    let thresholds = validated_thresholds(args.ta, args.tb)?;
    let grid = parse_grid(&args.tb_grid)?;
    let method = match args.method {
        SweepMethodArg::Direct => SweepMethod::Direct,
        SweepMethodArg::Approx => SweepMethod::Approx,
    };
    let rows = threshold_sweep(&dataset, thresholds.t_a, thresholds.t_b, &grid, method)?;

    let mut report = Report::new("sweep");
    report.config_digest = Some(digest);
    report.thresholds = Some(thresholds);
    if let Some(goal) = args.goal {
        let goal = match goal {
            GoalArg::MatchFpr => SelectionGoal::MatchFpr,
            GoalArg::MatchRecall => SelectionGoal::MatchRecall,
            GoalArg::Dominate => SelectionGoal::Dominate,
        };
        match select_threshold(&rows, goal) {
            Some(row) => report.selected = Some(row.clone()),
            None => report
                .warnings
                .push("no operating point satisfies the goal".to_owned()),
        }
    }
    report.sweep = Some(rows);
    emit(&report, args.format);
    Ok(())
}
