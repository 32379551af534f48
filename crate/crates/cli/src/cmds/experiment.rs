use std::path::Path;

use chansynth_core::metrics::{
    extrapolate_max_channels, fit_line, paired_win_rate, run_selection_experiment_detailed,
    ExperimentMethod, ExperimentParams, LossReport,
};
use chansynth_core::stacks::load_raw;
use chansynth_core::{AnalysisScalar, Result};
use serde_json::json;

use crate::cmds::Ctx;
use crate::manifest::Emitter;

fn report_json(report: &LossReport) -> serde_json::Value {
    json!({
        "per_channel": report.per_channel(),
        "total": report.total(),
        "n_prediction_channels": report.n_prediction_channels(),
        "normalized": report.normalized(),
    })
}

pub struct ExperimentFlags {
    pub fractions: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    pub holdout: Option<f64>,
    pub threshold: f64,
}

pub fn run(ctx: &Ctx, input: &Path, flags: &ExperimentFlags) -> Result<serde_json::Value> {
    let mut em = Emitter::new(&ctx.out)?;
    em.record_input(input)?;

    let storage = em.stage("load", || load_raw(input))?;
    let stack = storage.convert::<AnalysisScalar>();

    let params = ExperimentParams::<AnalysisScalar> {
        fractions: flags.fractions.clone().unwrap_or_else(|| ctx.cfg.fractions.clone()),
        seeds: flags.seeds.clone().unwrap_or_else(|| ctx.cfg.seeds.clone()),
        train: ctx.cfg.train_config(0),
        window: ctx.cfg.window_spec()?,
        constants: ctx.cfg.ssim_constants()?,
        linkage: ctx.cfg.linkage,
        patch_radius: ctx.cfg.radius,
        patch_stride: ctx.cfg.stride,
        holdout: flags.holdout.unwrap_or(ctx.cfg.holdout),
    };

    let detail = em.stage("experiment", || run_selection_experiment_detailed(&stack, &params))?;
    em.write_text("experiment.csv", &detail.table.to_csv())?;

    let reports: Vec<serde_json::Value> = detail
        .reports
        .iter()
        .map(|r| {
            json!({
                "fraction": r.fraction,
                "method": r.method.label(),
                "seed": r.seed,
                "conditioning_count": r.conditioning_count,
                "train": report_json(&r.train),
                "test": report_json(&r.test),
            })
        })
        .collect();
    em.write_text(
        "loss_reports.json",
        &serde_json::to_string_pretty(&json!(reports)).expect("serializes"),
    )?;

    // Loss vs conditioning-channel count, over the cluster-guided cells.
    let points: Vec<(f64, f64)> = detail
        .reports
        .iter()
        .filter(|r| r.method == ExperimentMethod::Cluster)
        .map(|r| (r.conditioning_count as f64, r.test.normalized()))
        .collect();
    let fit = em.stage("regression", || Ok(fit_line(&points)))?;
    let regression_doc = match &fit {
        Ok(f) => json!({
            "fit": serde_json::from_str::<serde_json::Value>(&f.to_json())
                .expect("fit json parses"),
        }),
        Err(e) => json!({ "fit": null, "reason": e.to_string() }),
    };
    em.write_text(
        "regression.json",
        &serde_json::to_string_pretty(&regression_doc).expect("serializes"),
    )?;

    let threshold = flags.threshold;
    let extrapolation_doc = match &fit {
        Ok(f) => match extrapolate_max_channels(f, threshold) {
            Ok(n) => json!({ "threshold": threshold, "max_channels": n }),
            Err(e) => {
                json!({ "threshold": threshold, "max_channels": null, "reason": e.to_string() })
            }
        },
        Err(e) => json!({
            "threshold": threshold,
            "max_channels": null,
            "reason": format!("no regression available: {e}"),
        }),
    };
    em.write_text(
        "extrapolation.json",
        &serde_json::to_string_pretty(&extrapolation_doc).expect("serializes"),
    )?;

    let win_rate = paired_win_rate(&detail.table);
    let cells = params.fractions.len() * params.seeds.len();

    let mut echo = ctx.echo();
    echo.insert("args.input".into(), input.display().to_string());
    echo.insert(
        "args.fractions".into(),
        params.fractions.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
    );
    echo.insert(
        "args.seeds".into(),
        params.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    );
    echo.insert("args.holdout".into(), params.holdout.to_string());
    echo.insert("args.threshold".into(), threshold.to_string());
    let outputs = em.finish("experiment", echo)?;

    Ok(json!({
        "command": "experiment",
        "cells": cells,
        "rows": detail.table.rows().len(),
        "win_rate": win_rate,
        "outputs": outputs,
    }))
}
