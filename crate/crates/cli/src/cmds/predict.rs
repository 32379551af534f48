use std::fs;
use std::path::Path;

use chansynth_core::predictor::{model_from_json, predict_linear, predict_mlp, PatchGeometry};
use chansynth_core::stacks::{load_raw, save_raw};
use chansynth_core::{AnalysisScalar, ChannelStack, Error, Result, TrainConfig, TrainedModel};
use serde_json::json;

use crate::cmds::Ctx;
use crate::manifest::Emitter;

pub const PREDICTED_NAME: &str = "predicted.mcs1";

pub fn load_model(
    path: &Path,
) -> Result<(TrainedModel<AnalysisScalar>, TrainConfig, PatchGeometry)> {
    let text = fs::read_to_string(path)?;
    model_from_json::<AnalysisScalar>(&text)
}

/// Dense predicted target channels over the stack's valid interior.
/// Only stride-1 models cover every interior pixel, so anything else
/// cannot be rendered as an image.
pub fn predict_stack(
    model: &TrainedModel<AnalysisScalar>,
    stack: &ChannelStack<AnalysisScalar>,
    geom: &PatchGeometry,
) -> Result<ChannelStack<AnalysisScalar>> {
    if geom.stride != 1 {
        return Err(Error::validation(format!(
            "model was trained at stride {}; image prediction needs stride 1",
            geom.stride
        )));
    }
    match model {
        TrainedModel::Linear(m) => predict_linear(
            m,
            stack,
            &geom.source_indices,
            &geom.target_indices,
            geom.radius,
            1,
        ),
        TrainedModel::Adversarial { generator, .. } => predict_mlp(
            generator,
            stack,
            &geom.source_indices,
            &geom.target_indices,
            geom.radius,
            1,
        ),
    }
}

pub fn run(ctx: &Ctx, input: &Path, model_path: &Path) -> Result<serde_json::Value> {
    let mut em = Emitter::new(&ctx.out)?;
    em.record_input(input)?;
    em.record_input(model_path)?;

    let (model, _cfg, geom) = em.stage("load_model", || load_model(model_path))?;
    let storage = em.stage("load", || load_raw(input))?;
    let stack = storage.convert::<AnalysisScalar>();

    let predicted = em.stage("predict", || predict_stack(&model, &stack, &geom))?;
    let path = em.path(PREDICTED_NAME);
    em.stage("save", || save_raw(&predicted.convert(), &path))?;
    em.add_output(PREDICTED_NAME);

    let mut echo = ctx.echo();
    echo.insert("args.input".into(), input.display().to_string());
    echo.insert("args.model".into(), model_path.display().to_string());
    let outputs = em.finish("predict", echo)?;

    Ok(json!({
        "command": "predict",
        "output": path.display().to_string(),
        "height": predicted.height(),
        "width": predicted.width(),
        "channels": predicted.channel_names(),
        "outputs": outputs,
    }))
}
