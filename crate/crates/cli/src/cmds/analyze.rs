use std::path::Path;

use chansynth_core::cluster::{
    agglomerate, cut, default_cluster_count, select_by_cluster, to_distance,
};
use chansynth_core::ssim::{pearson_matrix, ssim_matrix};
use chansynth_core::stacks::{load_raw, normalize_minmax};
use chansynth_core::{AnalysisScalar, Result};
use serde_json::json;

use crate::cmds::Ctx;
use crate::config::ClusterCountMode;
use crate::manifest::Emitter;

pub fn run(
    ctx: &Ctx,
    input: &Path,
    k_flag: Option<usize>,
    select_flag: Option<usize>,
    normalize: bool,
) -> Result<serde_json::Value> {
    let mut em = Emitter::new(&ctx.out)?;
    em.record_input(input)?;

    let storage = em.stage("load", || load_raw(input))?;
    let mut stack = storage.convert::<AnalysisScalar>();
    if normalize {
        stack = normalize_minmax(&stack);
    }
    let names = stack.channel_names().to_vec();

    let window = ctx.cfg.window_spec()?;
    let constants = ctx.cfg.ssim_constants::<AnalysisScalar>()?;
    let m = em.stage("ssim", || ssim_matrix(&stack, &window, &constants))?;
    em.write_text("ssim.csv", &m.to_csv())?;
    let p = em.stage("pearson", || pearson_matrix(&stack))?;
    em.write_text("pearson.csv", &p.to_csv())?;

    let d = to_distance(&m);
    let tree = em.stage("cluster", || agglomerate(&d, ctx.cfg.linkage))?;
    em.write_text("dendrogram.json", &tree.to_json())?;
    em.write_text("dendrogram.newick", &tree.to_newick(&names)?)?;

    let fixed = k_flag.or(match ctx.cfg.cluster_k {
        ClusterCountMode::Fixed(k) => Some(k),
        ClusterCountMode::Silhouette => None,
    });
    let (k, k_mode) = match fixed {
        Some(k) => (k, "fixed"),
        None => (default_cluster_count(&d, &tree)?, "silhouette"),
    };
    let assignment = cut(&tree, k)?;
    em.write_text("clusters.json", &assignment.to_json(&names)?)?;

    let count = select_flag.unwrap_or(k);
    let selection = em.stage("select", || select_by_cluster(&assignment, &m, count))?;
    em.write_text("selection.json", &selection.to_json(&names)?)?;

    let mut echo = ctx.echo();
    echo.insert("args.input".into(), input.display().to_string());
    echo.insert("args.k".into(), format!("{k} ({k_mode})"));
    echo.insert("args.select".into(), count.to_string());
    echo.insert("args.normalize".into(), normalize.to_string());
    let outputs = em.finish("analyze", echo)?;

    Ok(json!({
        "command": "analyze",
        "channels": stack.channel_count(),
        "k": k,
        "k_mode": k_mode,
        "selection_count": count,
        "selected": selection.indices(),
        "outputs": outputs,
    }))
}
