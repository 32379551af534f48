use std::path::Path;

use chansynth_core::stacks::{downsample_area, import_tiff, normalize_minmax, save_raw};
use chansynth_core::Result;
use serde_json::json;

use crate::cmds::Ctx;
use crate::manifest::Emitter;

pub const STACK_NAME: &str = "stack.mcs1";

pub fn run(
    ctx: &Ctx,
    input: &Path,
    downsample: Option<(usize, usize)>,
    normalize: bool,
) -> Result<serde_json::Value> {
    let mut em = Emitter::new(&ctx.out)?;
    em.record_input(input)?;

    let mut stack = em.stage("load", || import_tiff(input))?;
    if let Some((h, w)) = downsample {
        stack = em.stage("downsample", || downsample_area(&stack, h, w))?;
    }
    if normalize {
        stack = em.stage("normalize", || Ok(normalize_minmax(&stack)))?;
    }

    let path = em.path(STACK_NAME);
    em.stage("save", || save_raw(&stack, &path))?;
    em.add_output(STACK_NAME);

    let mut echo = ctx.echo();
    echo.insert("args.input".into(), input.display().to_string());
    if let Some((h, w)) = downsample {
        echo.insert("args.downsample".into(), format!("{h} {w}"));
    }
    echo.insert("args.normalize".into(), normalize.to_string());
    let outputs = em.finish("import", echo)?;

    Ok(json!({
        "command": "import",
        "output": path.display().to_string(),
        "height": stack.height(),
        "width": stack.width(),
        "channels": stack.channel_count(),
        "names": stack.channel_names(),
        "outputs": outputs,
    }))
}
