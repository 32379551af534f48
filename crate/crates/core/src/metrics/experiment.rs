//! Paired cluster-vs-random conditioning experiment: for each
//! (fraction, seed) cell, train the linear baseline on channels chosen
//! by similarity clustering and on channels chosen at random, and
//! record held-out L1 for both.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::cluster::{
    agglomerate, cut, default_cluster_count, select_by_cluster, select_random, to_distance,
    Linkage,
};
use crate::error::{Error, Result};
use crate::metrics::LossReport;
use crate::predictor::{extract_patches, l1_loss, train_linear_l1, PatchDataset, TrainConfig};
use crate::rng::{seeded_rng, shuffled_indices};
use crate::scalar::Scalar;
use crate::ssim::{ssim_matrix, SsimConstants, WindowSpec};
use crate::stacks::ChannelStack;

/// Keeps the row-split stream distinct from the channel-draw stream,
/// which is seeded with the bare cell seed.
const SPLIT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentMethod {
    Cluster,
    Random,
}

impl ExperimentMethod {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentMethod::Cluster => "cluster",
            ExperimentMethod::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub fraction: f64,
    pub method: ExperimentMethod,
    pub seed: u64,
    pub test_l1: f64,
}

/// Paired experiment results, sorted by (fraction, method, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    rows: Vec<ExperimentRow>,
}

impl ExperimentTable {
    pub fn rows(&self) -> &[ExperimentRow] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,method,seed,test_l1\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.fraction, r.method.label(), r.seed, r.test_l1));
        }
        out
    }
}

/// Everything the experiment needs beyond the stack itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams<S: Scalar> {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub window: WindowSpec,
    pub constants: SsimConstants<S>,
    pub linkage: Linkage,
    pub patch_radius: usize,
    pub patch_stride: usize,
    /// Share of patch rows held out for the test loss.
    pub holdout: f64,
}

impl<S: Scalar> Default for ExperimentParams<S> {
    fn default() -> Self {
        ExperimentParams {
            fractions: vec![0.25, 0.5],
            seeds: (0..20).collect(),
            train: TrainConfig {
                epochs: 40,
                learning_rate: 0.05,
                batch_size: 32,
                ..TrainConfig::default()
            },
            window: WindowSpec::default_gaussian(),
            constants: SsimConstants::unit_range(),
            linkage: Linkage::Average,
            patch_radius: 0,
            patch_stride: 1,
            holdout: 0.2,
        }
    }
}

fn selected_count(fraction: f64, channels: usize) -> Result<usize> {
    if !fraction.is_finite() || fraction <= 0.0 || fraction > 1.0 {
        return Err(Error::validation(format!("fraction {fraction} must lie in (0, 1]")));
    }
    let count = (fraction * channels as f64).round() as usize;
    if count == 0 || count >= channels {
        return Err(Error::validation(format!(
            "fraction {fraction} of {channels} channels selects {count}; need 1..={}",
            channels - 1
        )));
    }
    Ok(count)
}

/// Train-set and test-set losses for one trained cell, with the
/// per-channel breakdown behind each.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub fraction: f64,
    pub method: ExperimentMethod,
    pub seed: u64,
    pub conditioning_count: usize,
    pub train: LossReport,
    pub test: LossReport,
}

/// Experiment table plus the per-cell loss reports it was built from,
/// in matching (fraction, method, seed) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDetail {
    pub table: ExperimentTable,
    pub reports: Vec<CellReport>,
}

fn per_channel_l1<S: Scalar>(
    model: &crate::predictor::LinearModel<S>,
    data: &PatchDataset<S>,
    names: &[String],
) -> Result<LossReport> {
    let t = data.target_count();
    let mut sums = vec![0.0_f64; t];
    for i in 0..data.len() {
        let pred = model.predict_row(data.feature_row(i))?;
        let want = data.target_row(i);
        for (c, (&p, &w)) in pred.iter().zip(want).enumerate() {
            sums[c] += (p - w).into_f64().abs();
        }
    }
    let mut per_channel = BTreeMap::new();
    for (c, sum) in sums.into_iter().enumerate() {
        per_channel.insert(names[c].clone(), sum / data.len() as f64);
    }
    LossReport::new(per_channel)
}

/// Trains the linear baseline conditioned on `sources` over a seeded
/// row split; returns flat test L1 plus both split reports.
fn cell_outcome<S: Scalar>(
    stack: &ChannelStack<S>,
    sources: &[usize],
    seed: u64,
    params: &ExperimentParams<S>,
) -> Result<(f64, LossReport, LossReport)> {
    let targets: Vec<usize> =
        (0..stack.channel_count()).filter(|c| !sources.contains(c)).collect();
    let names: Vec<String> =
        targets.iter().map(|&c| stack.channel_name(c).to_string()).collect();
    let data =
        extract_patches(stack, sources, &targets, params.patch_radius, params.patch_stride)?;
    let n = data.len();
    let n_test = ((n as f64 * params.holdout).round() as usize).clamp(1, n - 1);
    let order = shuffled_indices(n, &mut seeded_rng(seed ^ SPLIT_STREAM));
    let test = data.subset(&order[..n_test])?;
    let train = data.subset(&order[n_test..])?;

    let cfg = TrainConfig { seed, ..params.train.clone() };
    let (model, _) = train_linear_l1(&train, &cfg)?;
    let mut preds = Vec::with_capacity(test.len() * test.target_count());
    for i in 0..test.len() {
        preds.extend(model.predict_row(test.feature_row(i))?);
    }
    let test_l1 = l1_loss(&preds, test.targets())?.into_f64();
    let train_report = per_channel_l1(&model, &train, &names)?;
    let test_report = per_channel_l1(&model, &test, &names)?;
    Ok((test_l1, train_report, test_report))
}

/// Runs the paired experiment over every (fraction, seed) cell. Cells
/// are independent and run in parallel; the table is assembled in a
/// fixed order afterwards, so thread scheduling never changes output.
pub fn run_selection_experiment<S: Scalar>(
    stack: &ChannelStack<S>,
    params: &ExperimentParams<S>,
) -> Result<ExperimentTable> {
    run_selection_experiment_detailed(stack, params).map(|d| d.table)
}

/// [`run_selection_experiment`] plus the per-cell train/test loss
/// reports gathered during the same pass.
pub fn run_selection_experiment_detailed<S: Scalar>(
    stack: &ChannelStack<S>,
    params: &ExperimentParams<S>,
) -> Result<ExperimentDetail> {
    let channels = stack.channel_count();
    if channels < 4 {
        return Err(Error::validation(format!(
            "the experiment needs at least 4 channels, got {channels}"
        )));
    }
    if params.fractions.is_empty() || params.seeds.is_empty() {
        return Err(Error::validation("need at least one fraction and one seed"));
    }
    if !(params.holdout.is_finite() && params.holdout > 0.0 && params.holdout < 1.0) {
        return Err(Error::validation("holdout share must lie strictly between 0 and 1"));
    }
    if params.patch_stride == 0 {
        return Err(Error::validation("stride must be at least 1"));
    }
    params.train.validate()?;
    let counts: Vec<usize> = params
        .fractions
        .iter()
        .map(|&f| selected_count(f, channels))
        .collect::<Result<_>>()?;

    // Clustering is shared by every cell: the stack does not change.
    let m = ssim_matrix(stack, &params.window, &params.constants)?;
    let d = to_distance(&m);
    let tree = agglomerate(&d, params.linkage)?;
    let k = default_cluster_count(&d, &tree)?;
    let assignment = cut(&tree, k)?;

    let cells: Vec<(f64, usize, u64)> = params
        .fractions
        .iter()
        .zip(&counts)
        .flat_map(|(&f, &c)| params.seeds.iter().map(move |&s| (f, c, s)))
        .collect();

    let mut cell_results: Vec<(ExperimentRow, CellReport)> = cells
        .par_iter()
        .map(|&(fraction, count, seed)| -> Result<Vec<(ExperimentRow, CellReport)>> {
            let cluster_sel = select_by_cluster(&assignment, &m, count)?;
            let random_sel = select_random(channels, count, seed)?;
            let mut out = Vec::with_capacity(2);
            for (method, sel) in [
                (ExperimentMethod::Cluster, cluster_sel.indices()),
                (ExperimentMethod::Random, random_sel.indices()),
            ] {
                let (test_l1, train, test) = cell_outcome(stack, sel, seed, params)?;
                out.push((
                    ExperimentRow { fraction, method, seed, test_l1 },
                    CellReport { fraction, method, seed, conditioning_count: count, train, test },
                ));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    cell_results.sort_by(|(a, _), (b, _)| {
        a.fraction
            .total_cmp(&b.fraction)
            .then(a.method.cmp(&b.method))
            .then(a.seed.cmp(&b.seed))
    });
    let (rows, reports) = cell_results.into_iter().unzip();
    Ok(ExperimentDetail { table: ExperimentTable { rows }, reports })
}

/// Share of (fraction, seed) cells where the cluster-guided selection
/// beats the random one strictly.
pub fn paired_win_rate(table: &ExperimentTable) -> f64 {
    let mut wins = 0_usize;
    let mut cells = 0_usize;
    for row in table.rows() {
        if row.method != ExperimentMethod::Cluster {
            continue;
        }
        let partner = table.rows().iter().find(|r| {
            r.method == ExperimentMethod::Random
                && r.seed == row.seed
                && r.fraction.to_bits() == row.fraction.to_bits()
        });
        if let Some(partner) = partner {
            cells += 1;
            if row.test_l1 < partner.test_l1 {
                wins += 1;
            }
        }
    }
    if cells == 0 {
        return 0.0;
    }
    wins as f64 / cells as f64
}
