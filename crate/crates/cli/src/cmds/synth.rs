use chansynth_core::stacks::{generate_synthetic, save_raw};
use chansynth_core::{Result, SyntheticSpec};
use serde_json::json;

use crate::cmds::Ctx;
use crate::manifest::Emitter;

pub const STACK_NAME: &str = "stack.mcs1";
pub const LABELS_NAME: &str = "labels.json";

#[derive(Debug, Clone, Copy, Default)]
pub struct SynthOverrides {
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub channels: Option<usize>,
    pub templates: Option<usize>,
    pub noise: Option<f64>,
    pub blobs: Option<usize>,
    pub gain: Option<(f64, f64)>,
    pub offset: Option<(f64, f64)>,
}

pub fn run(ctx: &Ctx, ov: &SynthOverrides) -> Result<serde_json::Value> {
    let defaults = SyntheticSpec::default();
    let spec = SyntheticSpec {
        height: ov.height.unwrap_or(defaults.height),
        width: ov.width.unwrap_or(defaults.width),
        channel_count: ov.channels.unwrap_or(defaults.channel_count),
        template_count: ov.templates.unwrap_or(defaults.template_count),
        gain_range: ov.gain.unwrap_or(defaults.gain_range),
        offset_range: ov.offset.unwrap_or(defaults.offset_range),
        noise_sigma: ov.noise.unwrap_or(defaults.noise_sigma),
        blob_count: ov.blobs.unwrap_or(defaults.blob_count),
        seed: ctx.seed,
    };

    let mut em = Emitter::new(&ctx.out)?;
    let (stack, labels) = em.stage("generate", || generate_synthetic::<f32>(&spec))?;
    let path = em.path(STACK_NAME);
    em.stage("save", || save_raw(&stack, &path))?;
    em.add_output(STACK_NAME);
    let labels_doc = json!({
        "template_count": spec.template_count,
        "labels": labels,
    });
    em.write_text(LABELS_NAME, &serde_json::to_string_pretty(&labels_doc).expect("serializes"))?;

    let mut echo = ctx.echo();
    echo.insert("args.height".into(), spec.height.to_string());
    echo.insert("args.width".into(), spec.width.to_string());
    echo.insert("args.channels".into(), spec.channel_count.to_string());
    echo.insert("args.templates".into(), spec.template_count.to_string());
    echo.insert("args.noise".into(), spec.noise_sigma.to_string());
    echo.insert("args.blobs".into(), spec.blob_count.to_string());
    echo.insert("args.gain".into(), format!("{} {}", spec.gain_range.0, spec.gain_range.1));
    echo.insert("args.offset".into(), format!("{} {}", spec.offset_range.0, spec.offset_range.1));
    let outputs = em.finish("synth", echo)?;

    Ok(json!({
        "command": "synth",
        "output": path.display().to_string(),
        "height": spec.height,
        "width": spec.width,
        "channels": spec.channel_count,
        "templates": spec.template_count,
        "seed": ctx.seed,
        "outputs": outputs,
    }))
}
