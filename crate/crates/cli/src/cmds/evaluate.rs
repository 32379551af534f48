use std::collections::BTreeMap;
use std::path::Path;

use chansynth_core::metrics::{pixel_variance_map, LossReport};
use chansynth_core::predictor::l1_loss;
use chansynth_core::stacks::{load_raw, save_raw};
use chansynth_core::{AnalysisScalar, ChannelStack, Result};
use serde_json::json;

use crate::cmds::predict::{load_model, predict_stack};
use crate::cmds::Ctx;
use crate::manifest::Emitter;

pub const VARIANCE_NAME: &str = "variance.mcs1";

pub fn run(
    ctx: &Ctx,
    input: &Path,
    model_path: &Path,
    crop_border: usize,
) -> Result<serde_json::Value> {
    let mut em = Emitter::new(&ctx.out)?;
    em.record_input(input)?;
    em.record_input(model_path)?;

    let (model, _cfg, geom) = em.stage("load_model", || load_model(model_path))?;
    let storage = em.stage("load", || load_raw(input))?;
    let stack = storage.convert::<AnalysisScalar>();

    let mut predicted = em.stage("predict", || predict_stack(&model, &stack, &geom))?;
    // Ground truth aligned to the prediction's valid interior.
    let mut truth = stack.select_channels(&geom.target_indices)?.crop_border(geom.radius)?;
    if crop_border > 0 {
        predicted = predicted.crop_border(crop_border)?;
        truth = truth.crop_border(crop_border)?;
    }

    let names = truth.channel_names().to_vec();
    let mut per_channel = BTreeMap::new();
    let mut variance_summary = serde_json::Map::new();
    let mut variance_planes: Vec<AnalysisScalar> =
        Vec::with_capacity(truth.pixels_per_channel() * truth.channel_count());
    for (c, name) in names.iter().enumerate() {
        let l1 = l1_loss(predicted.channel(c), truth.channel(c))?;
        per_channel.insert(name.clone(), l1);
        let (map, mean, max) = pixel_variance_map(truth.channel(c), predicted.channel(c))?;
        variance_planes.extend(map);
        variance_summary.insert(name.clone(), json!({ "mean": mean, "max": max }));
    }
    let report = LossReport::new(per_channel)?;
    let variance_stack =
        ChannelStack::new(truth.height(), truth.width(), names.clone(), variance_planes)?;
    let variance_path = em.path(VARIANCE_NAME);
    em.stage("save", || save_raw(&variance_stack.convert(), &variance_path))?;
    em.add_output(VARIANCE_NAME);

    let report_doc = json!({
        "l1": {
            "per_channel": report.per_channel(),
            "total": report.total(),
            "n_prediction_channels": report.n_prediction_channels(),
            "normalized": report.normalized(),
        },
        "variance": variance_summary,
        "crop_border": crop_border,
        "height": truth.height(),
        "width": truth.width(),
    });
    em.write_text("report.json", &serde_json::to_string_pretty(&report_doc).expect("serializes"))?;

    let mut echo = ctx.echo();
    echo.insert("args.input".into(), input.display().to_string());
    echo.insert("args.model".into(), model_path.display().to_string());
    echo.insert("args.crop_border".into(), crop_border.to_string());
    let outputs = em.finish("evaluate", echo)?;

    Ok(json!({
        "command": "evaluate",
        "normalized_l1": report.normalized(),
        "channels": names,
        "outputs": outputs,
    }))
}
