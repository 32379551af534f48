//! Patch-level conditional synthesis: datasets cut from channel stacks, a
//! linear L1 baseline, and a small adversarial generator/discriminator
//! pair with hand-derived gradients.

mod adversarial;
mod io;
mod linear;
mod mlp;

pub use adversarial::train_adversarial;
pub use io::{model_from_json, model_to_json, TrainedModel};
pub use linear::{predict_linear, train_linear_l1, LinearModel};
pub use mlp::{grad_check, mlp_backward, mlp_forward, predict_mlp, Activation, ForwardCache, Mlp, MlpGradients};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stacks::ChannelStack;

/// Probabilities are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] before
/// logarithms so losses stay finite at the degenerate corners.
pub(crate) const PROB_CLAMP: f64 = 1e-7;

/// Leaky-rectifier slope used by every hidden layer.
pub(crate) const LEAKY_SLOPE: f64 = 0.01;

/// Supervised rows cut from a stack: per valid patch center, the stacked
/// source-channel neighborhoods and the center pixel of each target
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset<S: Scalar> {
    feature_dim: usize,
    target_count: usize,
    features: Vec<S>,
    targets: Vec<S>,
    radius: usize,
    stride: usize,
    source_indices: Vec<usize>,
    target_indices: Vec<usize>,
}

impl<S: Scalar> PatchDataset<S> {
    pub fn len(&self) -> usize {
        if self.feature_dim == 0 {
            0
        } else {
            self.features.len() / self.feature_dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    pub fn feature_row(&self, i: usize) -> &[S] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn target_row(&self, i: usize) -> &[S] {
        &self.targets[i * self.target_count..(i + 1) * self.target_count]
    }

    pub fn targets(&self) -> &[S] {
        &self.targets
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn target_indices(&self) -> &[usize] {
        &self.target_indices
    }

    pub fn geometry(&self) -> PatchGeometry {
        PatchGeometry {
            radius: self.radius,
            stride: self.stride,
            source_indices: self.source_indices.clone(),
            target_indices: self.target_indices.clone(),
        }
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<PatchDataset<S>> {
        if rows.is_empty() {
            return Err(Error::validation("a subset needs at least one row"));
        }
        let n = self.len();
        let mut features = Vec::with_capacity(rows.len() * self.feature_dim);
        let mut targets = Vec::with_capacity(rows.len() * self.target_count);
        for &i in rows {
            if i >= n {
                return Err(Error::validation(format!("row {i} out of range for {n} rows")));
            }
            features.extend_from_slice(self.feature_row(i));
            targets.extend_from_slice(self.target_row(i));
        }
        Ok(PatchDataset { features, targets, ..self.clone() })
    }
}

/// Everything needed to cut the same patches again from another stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub radius: usize,
    pub stride: usize,
    pub source_indices: Vec<usize>,
    pub target_indices: Vec<usize>,
}

/// Writes the (2r+1)^2 neighborhood of every source channel around
/// (cy, cx), channel-major, into `out`.
pub(crate) fn push_patch_features<S: Scalar>(
    stack: &ChannelStack<S>,
    sources: &[usize],
    r: usize,
    cy: usize,
    cx: usize,
    out: &mut Vec<S>,
) {
    let w = stack.width();
    for &c in sources {
        let plane = stack.channel(c);
        for y in cy - r..=cy + r {
            let row = &plane[y * w..(y + 1) * w];
            out.extend_from_slice(&row[cx - r..=cx + r]);
        }
    }
}

/// Cuts supervised patch rows from a stack. Centers run row-major over
/// every position whose full patch fits inside the image, stepping by
/// `stride` on both axes.
pub fn extract_patches<S: Scalar>(
    stack: &ChannelStack<S>,
    sources: &[usize],
    targets: &[usize],
    radius: usize,
    stride: usize,
) -> Result<PatchDataset<S>> {
    if sources.is_empty() || targets.is_empty() {
        return Err(Error::validation("need at least one source and one target channel"));
    }
    if stride == 0 {
        return Err(Error::validation("stride must be at least 1"));
    }
    for &c in sources.iter().chain(targets) {
        if c >= stack.channel_count() {
            return Err(Error::validation(format!("channel index {c} out of range")));
        }
    }
    if targets.iter().any(|t| sources.contains(t)) {
        return Err(Error::validation("source and target channels overlap"));
    }
    let side = 2 * radius + 1;
    if stack.height() < side || stack.width() < side {
        return Err(Error::validation(format!(
            "radius {radius} patches do not fit a {}x{} image",
            stack.height(),
            stack.width()
        )));
    }

    let feature_dim = sources.len() * side * side;
    let mut features = Vec::new();
    let mut target_rows = Vec::new();
    let mut cy = radius;
    while cy + radius < stack.height() {
        let mut cx = radius;
        while cx + radius < stack.width() {
            push_patch_features(stack, sources, radius, cy, cx, &mut features);
            for &t in targets {
                target_rows.push(stack.value(t, cy, cx));
            }
            cx += stride;
        }
        cy += stride;
    }

    Ok(PatchDataset {
        feature_dim,
        target_count: targets.len(),
        features,
        targets: target_rows,
        radius,
        stride,
        source_indices: sources.to_vec(),
        target_indices: targets.to_vec(),
    })
}

/// Mean absolute deviation over all entries.
pub fn l1_loss<S: Scalar>(predicted: &[S], actual: &[S]) -> Result<S> {
    if predicted.is_empty() || predicted.len() != actual.len() {
        return Err(Error::validation(format!(
            "cannot compare {} predictions against {} references",
            predicted.len(),
            actual.len()
        )));
    }
    let total: S = predicted.iter().zip(actual).map(|(&p, &a)| (p - a).abs()).sum();
    Ok(total / S::from_f64_lossy(predicted.len() as f64))
}

/// Discriminator score of Eq-style adversarial evaluation:
/// mean log of real scores plus mean log of one minus fake scores, with
/// scores clamped away from 0 and 1 first.
pub fn gan_loss<S: Scalar>(d_real: &[S], d_fake: &[S]) -> Result<S> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::validation("score lists must be non-empty"));
    }
    let check = |vals: &[S]| -> Result<()> {
        for &v in vals {
            let f = v.into_f64();
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::validation(format!("score {f} outside [0, 1]")));
            }
        }
        Ok(())
    };
    check(d_real)?;
    check(d_fake)?;

    let lo = S::from_f64_lossy(PROB_CLAMP);
    let hi = S::from_f64_lossy(1.0 - PROB_CLAMP);
    let clamp = |v: S| v.max(lo).min(hi);
    let real: S = d_real.iter().map(|&v| clamp(v).ln()).sum();
    let fake: S = d_fake.iter().map(|&v| clamp(S::one() - v).ln()).sum();
    Ok(real / S::from_f64_lossy(d_real.len() as f64)
        + fake / S::from_f64_lossy(d_fake.len() as f64))
}

/// Reporting form of the adversarial objective: gan + lambda * l1.
pub fn combined_objective<S: Scalar>(gan: S, l1: S, lambda: S) -> S {
    gan + lambda * l1
}

/// Shared training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lambda_l1: f64,
    pub seed: u64,
    pub d_steps_per_g_step: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            learning_rate: 0.01,
            batch_size: 32,
            lambda_l1: 100.0,
            seed: 0,
            d_steps_per_g_step: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::validation("learning rate must be positive and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be at least 1"));
        }
        if !(self.lambda_l1.is_finite() && self.lambda_l1 >= 0.0) {
            return Err(Error::validation("lambda must be non-negative and finite"));
        }
        if self.d_steps_per_g_step == 0 {
            return Err(Error::validation("need at least one discriminator step"));
        }
        Ok(())
    }
}

/// Full-dataset losses measured after each epoch. Linear training has no
/// discriminator, so its gan column is zero and the objective reduces to
/// lambda * l1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub gan: f64,
    pub l1: f64,
    pub objective: f64,
}

pub fn history_to_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,gan,l1,objective\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.gan, r.l1, r.objective));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AnalysisStack;

    fn stack4(h: usize, w: usize) -> AnalysisStack {
        let names: Vec<String> = (0..4).map(|i| format!("ch{i}")).collect();
        let mut data = Vec::with_capacity(4 * h * w);
        let mut v = 0.37_f64;
        for _ in 0..4 * h * w {
            v = (v * 997.0 + 0.123).fract();
            data.push(v);
        }
        AnalysisStack::new(h, w, names, data).unwrap()
    }

    #[test]
    fn center_only_patches_have_one_feature_per_source() {
        let s = stack4(8, 8);
        let d = extract_patches(&s, &[0, 2], &[3], 0, 1).unwrap();
        assert_eq!(d.feature_dim(), 2);
        assert_eq!(d.len(), 64);
        assert_eq!(d.target_count(), 1);
        // Row 9 is center (1, 1): features are the raw pixels there.
        assert_eq!(d.feature_row(9), &[s.value(0, 1, 1), s.value(2, 1, 1)]);
        assert_eq!(d.target_row(9), &[s.value(3, 1, 1)]);
    }

    #[test]
    fn radius_one_patches_stack_nine_values_per_source() {
        let s = stack4(8, 8);
        let d = extract_patches(&s, &[0, 1, 2], &[3], 1, 1).unwrap();
        assert_eq!(d.feature_dim(), 27);
        assert_eq!(d.len(), 36);
        // First row centers on (1, 1); its first 9 features walk channel
        // 0 rows 0..3 x cols 0..3.
        let row = d.feature_row(0);
        let mut want = Vec::new();
        for y in 0..3 {
            for x in 0..3 {
                want.push(s.value(0, y, x));
            }
        }
        assert_eq!(&row[..9], &want[..]);
        assert_eq!(row[9], s.value(1, 0, 0));
        assert_eq!(d.target_row(0), &[s.value(3, 1, 1)]);
    }

    #[test]
    fn stride_skips_centers() {
        let s = stack4(8, 8);
        let d = extract_patches(&s, &[0], &[3], 1, 2).unwrap();
        // Valid centers 1..=6 stepped by 2: 1, 3, 5 on each axis.
        assert_eq!(d.len(), 9);
        assert_eq!(d.target_row(1), &[s.value(3, 1, 3)]);
    }

    #[test]
    fn subsetting_keeps_rows_and_geometry() {
        let s = stack4(8, 8);
        let d = extract_patches(&s, &[0, 2], &[3], 1, 1).unwrap();
        let sub = d.subset(&[5, 0, 11]).unwrap();
        assert_eq!(sub.len(), 3);
        assert_eq!(sub.feature_row(0), d.feature_row(5));
        assert_eq!(sub.feature_row(1), d.feature_row(0));
        assert_eq!(sub.target_row(2), d.target_row(11));
        assert_eq!(sub.geometry(), d.geometry());
        assert!(d.subset(&[]).is_err());
        assert!(d.subset(&[d.len()]).is_err());
    }

    #[test]
    fn patch_extraction_validates_inputs() {
        let s = stack4(8, 8);
        assert!(extract_patches(&s, &[0, 1], &[1], 1, 1).is_err());
        assert!(extract_patches(&s, &[], &[1], 1, 1).is_err());
        assert!(extract_patches(&s, &[0], &[], 1, 1).is_err());
        assert!(extract_patches(&s, &[0], &[9], 1, 1).is_err());
        assert!(extract_patches(&s, &[0], &[1], 4, 1).is_err());
        assert!(extract_patches(&s, &[0], &[1], 0, 0).is_err());
        assert!(extract_patches(&s, &[0], &[1], 3, 1).is_ok());
    }

    #[test]
    fn l1_matches_direct_arithmetic() {
        assert_eq!(l1_loss(&[0.5_f64, 0.25], &[0.5, 0.25]).unwrap(), 0.0);
        assert_eq!(l1_loss(&[0.0_f64, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        let got = l1_loss(&[0.2_f64, 0.4, 0.9], &[0.0, 0.5, 1.0]).unwrap();
        assert!((got - 0.4 / 3.0).abs() < 1e-15);
        assert!(l1_loss::<f64>(&[], &[]).is_err());
        assert!(l1_loss(&[0.1_f64], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn gan_loss_matches_the_frozen_midpoint_value() {
        let got: f64 = gan_loss(&[0.5], &[0.5]).unwrap();
        assert!((got - (-1.3862943611198906)).abs() < 1e-15, "{got}");
    }

    #[test]
    fn gan_loss_is_clamped_at_the_corners() {
        let got: f64 = gan_loss(&[1.0], &[0.0]).unwrap();
        // Both terms hit ln(1 - 1e-7).
        assert!(got < 0.0 && got > -3e-7, "{got}");
    }

    #[test]
    fn gan_loss_matches_a_direct_summation_oracle() {
        let got: f64 = gan_loss(&[0.9, 0.8], &[0.1, 0.3]).unwrap();
        let want = (0.9_f64.ln() + 0.8_f64.ln()) / 2.0
            + ((1.0_f64 - 0.1).ln() + (1.0_f64 - 0.3).ln()) / 2.0;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn gan_loss_rejects_non_probabilities() {
        assert!(gan_loss(&[1.1_f64], &[0.5]).is_err());
        assert!(gan_loss(&[0.5_f64], &[-0.01]).is_err());
        assert!(gan_loss(&[f64::NAN], &[0.5]).is_err());
        assert!(gan_loss::<f64>(&[], &[0.5]).is_err());
    }

    #[test]
    fn gan_loss_is_monotone_toward_the_discriminator_optimum() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for pair in grid.windows(2) {
            let lo: f64 = gan_loss(&[pair[0]], &[0.5]).unwrap();
            let hi: f64 = gan_loss(&[pair[1]], &[0.5]).unwrap();
            assert!(hi > lo, "not increasing in real score at {pair:?}");
            let lo: f64 = gan_loss(&[0.5], &[pair[0]]).unwrap();
            let hi: f64 = gan_loss(&[0.5], &[pair[1]]).unwrap();
            assert!(hi < lo, "not decreasing in fake score at {pair:?}");
        }
    }

    #[test]
    fn objective_weights_l1_linearly() {
        assert_eq!(combined_objective(-0.75_f64, 0.5, 0.0), -0.75);
        assert_eq!(combined_objective(-0.75_f64, 0.0, 123.0), -0.75);
        let got = combined_objective(-1.386294_f64, 0.5, 100.0);
        assert!((got - 48.613706).abs() < 1e-12);
        // Power-of-two operands make the linearity identity exact.
        for (gan, l1, lambda, a) in
            [(0.5_f64, 0.5, 4.0, 0.25), (-2.0, 0.125, 8.0, 2.0), (1.0, 0.25, 2.0, 0.5)]
        {
            let diff = combined_objective(gan, a * l1, lambda) - combined_objective(gan, 0.0, lambda);
            assert_eq!(diff, lambda * (a * l1));
        }
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { epochs: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { learning_rate: f64::NAN, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { lambda_l1: -1.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { d_steps_per_g_step: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn history_csv_has_one_line_per_epoch() {
        let rows = vec![
            HistoryRow { epoch: 0, gan: -1.5, l1: 0.25, objective: 23.5 },
            HistoryRow { epoch: 1, gan: -1.25, l1: 0.125, objective: 11.25 },
        ];
        let csv = history_to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,gan,l1,objective");
        assert_eq!(lines[1], "0,-1.5,0.25,23.5");
        assert_eq!(lines.len(), 3);
    }
}
