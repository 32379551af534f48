use std::fs;
use std::path::{Path, PathBuf};

use chansynth_core::predictor::{
    extract_patches, history_to_csv, model_to_json, train_adversarial, train_linear_l1,
    PatchGeometry, TrainedModel,
};
use chansynth_core::stacks::load_raw;
use chansynth_core::{AnalysisScalar, Error, Result};
use serde_json::json;

use crate::cmds::Ctx;
use crate::manifest::Emitter;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Adversarial,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Adversarial => "adversarial",
        }
    }
}

pub struct TrainFlags {
    pub kind: ModelKind,
    pub sources: Option<Vec<usize>>,
    pub selection: Option<PathBuf>,
    pub radius: Option<usize>,
    pub stride: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub lambda_l1: Option<f64>,
    pub d_steps: Option<usize>,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
}

/// Conditioning indices from --sources, or from a selection file
/// written by `analyze`.
fn resolve_sources(flags: &TrainFlags, em: &mut Emitter) -> Result<Vec<usize>> {
    match (&flags.sources, &flags.selection) {
        (Some(_), Some(_)) => {
            Err(Error::validation("pass either --sources or --selection, not both"))
        }
        (Some(list), None) => Ok(list.clone()),
        (None, Some(path)) => {
            em.record_input(path)?;
            let text = fs::read_to_string(path)?;
            let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
                Error::format(format!("selection file {}: {e}", path.display()))
            })?;
            let indices = doc
                .get("indices")
                .and_then(|v| v.as_array())
                .ok_or_else(|| {
                    Error::format(format!(
                        "selection file {} has no \"indices\" array",
                        path.display()
                    ))
                })?;
            indices
                .iter()
                .map(|v| {
                    v.as_u64().map(|n| n as usize).ok_or_else(|| {
                        Error::format("selection indices must be non-negative integers")
                    })
                })
                .collect()
        }
        (None, None) => {
            Err(Error::validation("training needs conditioning channels: --sources or --selection"))
        }
    }
}

pub fn run(ctx: &Ctx, input: &Path, flags: &TrainFlags) -> Result<serde_json::Value> {
    let mut em = Emitter::new(&ctx.out)?;
    em.record_input(input)?;
    let sources = resolve_sources(flags, &mut em)?;

    let storage = em.stage("load", || load_raw(input))?;
    let stack = storage.convert::<AnalysisScalar>();
    let targets: Vec<usize> =
        (0..stack.channel_count()).filter(|c| !sources.contains(c)).collect();

    let radius = flags.radius.unwrap_or(ctx.cfg.radius);
    let stride = flags.stride.unwrap_or(ctx.cfg.stride);
    let data =
        em.stage("patches", || extract_patches(&stack, &sources, &targets, radius, stride))?;

    let mut cfg = ctx.cfg.train_config(ctx.seed);
    if let Some(v) = flags.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = flags.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = flags.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.lambda_l1 {
        cfg.lambda_l1 = v;
    }
    if let Some(v) = flags.d_steps {
        cfg.d_steps_per_g_step = v;
    }

    let (model, history) = match flags.kind {
        ModelKind::Linear => {
            let (m, h) = em.stage("train", || train_linear_l1(&data, &cfg))?;
            (TrainedModel::Linear(m), h)
        }
        ModelKind::Adversarial => {
            let mut g_spec = vec![data.feature_dim()];
            g_spec.extend(&flags.g_hidden);
            g_spec.push(data.target_count());
            let mut d_spec = vec![data.feature_dim() + data.target_count()];
            d_spec.extend(&flags.d_hidden);
            d_spec.push(1);
            let (g, d, h) =
                em.stage("train", || train_adversarial(&data, &g_spec, &d_spec, &cfg))?;
            (TrainedModel::Adversarial { generator: g, discriminator: d }, h)
        }
    };

    let geometry = PatchGeometry {
        radius,
        stride,
        source_indices: sources.clone(),
        target_indices: targets.clone(),
    };
    em.write_text("model.json", &model_to_json(&model, &cfg, &geometry))?;
    em.write_text("history.csv", &history_to_csv(&history))?;

    let final_row = history.last().expect("training always records epochs");
    let mut echo = ctx.echo();
    echo.insert("args.input".into(), input.display().to_string());
    echo.insert("args.kind".into(), flags.kind.label().to_string());
    echo.insert(
        "args.sources".into(),
        sources.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    let outputs = em.finish("train", echo)?;

    Ok(json!({
        "command": "train",
        "kind": flags.kind.label(),
        "rows": data.len(),
        "feature_dim": data.feature_dim(),
        "target_count": data.target_count(),
        "epochs": cfg.epochs,
        "final_l1": final_row.l1,
        "final_objective": final_row.objective,
        "outputs": outputs,
    }))
}
