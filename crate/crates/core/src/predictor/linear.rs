//! Linear patch regressor trained with minibatch L1 subgradients.

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, shuffled_indices};
use crate::scalar::Scalar;
use crate::stacks::ChannelStack;

use super::{
    combined_objective, l1_loss, push_patch_features, HistoryRow, PatchDataset, TrainConfig,
};

/// Affine map from patch features to target center values. Weights are
/// row-major over features: `weights[f * target_count + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<S: Scalar> {
    feature_dim: usize,
    target_count: usize,
    weights: Vec<S>,
    bias: Vec<S>,
}

impl<S: Scalar> LinearModel<S> {
    pub fn zeros(feature_dim: usize, target_count: usize) -> Result<Self> {
        if feature_dim == 0 || target_count == 0 {
            return Err(Error::validation("model dimensions must be positive"));
        }
        Ok(LinearModel {
            feature_dim,
            target_count,
            weights: vec![S::zero(); feature_dim * target_count],
            bias: vec![S::zero(); target_count],
        })
    }

    pub fn from_parts(
        feature_dim: usize,
        target_count: usize,
        weights: Vec<S>,
        bias: Vec<S>,
    ) -> Result<Self> {
        if feature_dim == 0 || target_count == 0 {
            return Err(Error::validation("model dimensions must be positive"));
        }
        if weights.len() != feature_dim * target_count || bias.len() != target_count {
            return Err(Error::validation(format!(
                "parameter shapes {}x{} do not match {} weights and {} biases",
                feature_dim,
                target_count,
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::validation("model parameters must be finite"));
        }
        Ok(LinearModel { feature_dim, target_count, weights, bias })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn bias(&self) -> &[S] {
        &self.bias
    }

    pub fn predict_row(&self, features: &[S]) -> Result<Vec<S>> {
        if features.len() != self.feature_dim {
            return Err(Error::validation(format!(
                "expected {} features, got {}",
                self.feature_dim,
                features.len()
            )));
        }
        let mut out = self.bias.clone();
        for (f, &x) in features.iter().enumerate() {
            let row = &self.weights[f * self.target_count..(f + 1) * self.target_count];
            for (o, &w) in out.iter_mut().zip(row) {
                *o = *o + w * x;
            }
        }
        Ok(out)
    }
}

fn subgrad_sign<S: Scalar>(diff: S) -> S {
    if diff > S::zero() {
        S::one()
    } else if diff < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

/// Minibatch subgradient descent on mean absolute deviation, from zero
/// initialization. The step size decays as lr / (1 + epoch) so late
/// epochs settle instead of bouncing around the optimum. Returns the
/// model together with full-dataset losses measured after each epoch.
pub fn train_linear_l1<S: Scalar>(
    data: &PatchDataset<S>,
    cfg: &TrainConfig,
) -> Result<(LinearModel<S>, Vec<HistoryRow>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::validation("cannot train on an empty dataset"));
    }
    let n = data.len();
    let t_count = data.target_count();
    let mut model = LinearModel::zeros(data.feature_dim(), t_count)?;
    let mut rng = seeded_rng(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);

    let mut grad_w = vec![S::zero(); model.weights.len()];
    let mut grad_b = vec![S::zero(); t_count];
    for epoch in 0..cfg.epochs {
        let lr = S::from_f64_lossy(cfg.learning_rate / (1.0 + epoch as f64));
        let order = shuffled_indices(n, &mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad_w.iter_mut().for_each(|g| *g = S::zero());
            grad_b.iter_mut().for_each(|g| *g = S::zero());
            for &i in batch {
                let x = data.feature_row(i);
                let pred = model.predict_row(x)?;
                let want = data.target_row(i);
                for t in 0..t_count {
                    let s = subgrad_sign(pred[t] - want[t]);
                    if s == S::zero() {
                        continue;
                    }
                    grad_b[t] += s;
                    for (f, &xf) in x.iter().enumerate() {
                        grad_w[f * t_count + t] += s * xf;
                    }
                }
            }
            let scale = lr / S::from_f64_lossy((batch.len() * t_count) as f64);
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w = *w - scale * *g;
            }
            for (b, g) in model.bias.iter_mut().zip(&grad_b) {
                *b = *b - scale * *g;
            }
        }

        let mut preds = Vec::with_capacity(n * t_count);
        for i in 0..n {
            preds.extend(model.predict_row(data.feature_row(i))?);
        }
        let l1 = l1_loss(&preds, data.targets())?.into_f64();
        history.push(HistoryRow {
            epoch,
            gan: 0.0,
            l1,
            objective: combined_objective(0.0, l1, cfg.lambda_l1),
        });
    }
    Ok((model, history))
}

/// Applies a patch model over every center whose patch fits, producing a
/// stack of the predicted target channels on the strided center grid.
/// With stride 1 that grid is the input cropped by `radius` on each side.
pub fn predict_linear<S: Scalar>(
    model: &LinearModel<S>,
    stack: &ChannelStack<S>,
    sources: &[usize],
    targets: &[usize],
    radius: usize,
    stride: usize,
) -> Result<ChannelStack<S>> {
    predict_with(stack, sources, targets, radius, stride, model.feature_dim, model.target_count, |x| {
        model.predict_row(x)
    })
}

pub(crate) fn predict_with<S: Scalar>(
    stack: &ChannelStack<S>,
    sources: &[usize],
    targets: &[usize],
    radius: usize,
    stride: usize,
    feature_dim: usize,
    target_count: usize,
    mut f: impl FnMut(&[S]) -> Result<Vec<S>>,
) -> Result<ChannelStack<S>> {
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
    if feature_dim != sources.len() * side * side {
        return Err(Error::validation(format!(
            "model expects {} features but {} sources at radius {} give {}",
            feature_dim,
            sources.len(),
            radius,
            sources.len() * side * side
        )));
    }
    if target_count != targets.len() {
        return Err(Error::validation(format!(
            "model predicts {} channels but {} targets were named",
            target_count,
            targets.len()
        )));
    }

    let centers = |extent: usize| (extent - 2 * radius).div_ceil(stride);
    let out_h = centers(stack.height());
    let out_w = centers(stack.width());
    let mut planes = vec![Vec::with_capacity(out_h * out_w); targets.len()];
    let mut features = Vec::with_capacity(feature_dim);
    let mut cy = radius;
    while cy + radius < stack.height() {
        let mut cx = radius;
        while cx + radius < stack.width() {
            features.clear();
            push_patch_features(stack, sources, radius, cy, cx, &mut features);
            let pred = f(&features)?;
            for (plane, &v) in planes.iter_mut().zip(&pred) {
                plane.push(v);
            }
            cx += stride;
        }
        cy += stride;
    }

    let names: Vec<String> =
        targets.iter().map(|&t| stack.channel_names()[t].clone()).collect();
    let mut data = Vec::with_capacity(targets.len() * out_h * out_w);
    for plane in planes {
        data.extend(plane);
    }
    ChannelStack::new(out_h, out_w, names, data)
}

#[cfg(test)]
mod tests {
    use super::super::extract_patches;
    use super::*;
    use crate::AnalysisStack;

    fn noise_stack(h: usize, w: usize, channels: usize) -> AnalysisStack {
        let names: Vec<String> = (0..channels).map(|i| format!("ch{i}")).collect();
        let mut data = Vec::with_capacity(channels * h * w);
        let mut v = 0.52_f64;
        for _ in 0..channels * h * w {
            v = (v * 613.0 + 0.217).fract();
            data.push(v);
        }
        AnalysisStack::new(h, w, names, data).unwrap()
    }

    /// Channel 1 duplicates channel 0, so a perfect center-only predictor
    /// exists (w = 1, b = 0).
    fn identity_stack(h: usize, w: usize) -> AnalysisStack {
        let base = noise_stack(h, w, 1);
        let mut data = base.channel(0).to_vec();
        data.extend_from_slice(base.channel(0));
        AnalysisStack::new(h, w, vec!["src".into(), "copy".into()], data).unwrap()
    }

    #[test]
    fn construction_validates_shapes_and_values() {
        assert!(LinearModel::<f64>::zeros(0, 1).is_err());
        assert!(LinearModel::from_parts(2, 1, vec![0.1, 0.2, 0.3], vec![0.0]).is_err());
        assert!(LinearModel::from_parts(2, 1, vec![0.1, f64::NAN], vec![0.0]).is_err());
        let m = LinearModel::from_parts(2, 1, vec![0.1, 0.2], vec![0.0]).unwrap();
        assert!(m.predict_row(&[1.0]).is_err());
    }

    #[test]
    fn predict_row_matches_hand_arithmetic() {
        let m = LinearModel::<f64>::from_parts(
            2,
            2,
            vec![0.5, -0.25, 0.125, 2.0],
            vec![0.1, -0.2],
        )
        .unwrap();
        let got = m.predict_row(&[0.4, 0.8]).unwrap();
        assert!((got[0] - (0.1 + 0.5 * 0.4 + 0.125 * 0.8)).abs() < 1e-15);
        assert!((got[1] - (-0.2 - 0.25 * 0.4 + 2.0 * 0.8)).abs() < 1e-15);
    }

    #[test]
    fn training_drives_the_copy_fixture_below_1e3() {
        let stack = identity_stack(8, 8);
        let data = extract_patches(&stack, &[0], &[1], 0, 1).unwrap();
        // Per-sample updates: with the 1/(1+epoch) decay, larger batches
        // would run out of step budget before reaching the optimum.
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let (model, history) = train_linear_l1(&data, &cfg).unwrap();
        assert!(history.last().unwrap().l1 < 1e-3, "{:?}", history.last());
        assert!((model.weights()[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn the_trained_copy_model_generalizes_to_a_fresh_stack() {
        let stack = identity_stack(8, 8);
        let data = extract_patches(&stack, &[0], &[1], 0, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let (model, _) = train_linear_l1(&data, &cfg).unwrap();

        // Same copy structure, unseen pixel values.
        let base = noise_stack(9, 9, 1);
        let fresh: Vec<f64> = base.channel(0).iter().map(|v| (v * 7.7).fract()).collect();
        let mut data = fresh.clone();
        data.extend(fresh);
        let test_stack =
            AnalysisStack::new(9, 9, vec!["src".into(), "copy".into()], data).unwrap();
        let got = predict_linear(&model, &test_stack, &[0], &[1], 0, 1).unwrap();
        let l1 = crate::predictor::l1_loss(got.channel(0), test_stack.channel(1)).unwrap();
        assert!(l1 < 1e-2, "test L1 {l1}");
    }

    #[test]
    fn epoch_losses_do_not_increase_across_ten_epoch_windows() {
        let stack = identity_stack(8, 8);
        let data = extract_patches(&stack, &[0], &[1], 1, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 120,
            learning_rate: 0.05,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (_, history) = train_linear_l1(&data, &cfg).unwrap();
        for e in 10..history.len() {
            assert!(
                history[e].l1 <= history[e - 10].l1 + 1e-12,
                "loss rose from epoch {} ({}) to {} ({})",
                e - 10,
                history[e - 10].l1,
                e,
                history[e].l1
            );
        }
    }

    #[test]
    fn bias_absorbs_a_constant_target() {
        // Target channel is the constant 0.3; features are unrelated
        // noise, so the optimum is zero weight and bias at the median.
        let noise = noise_stack(10, 10, 1);
        let mut data = noise.channel(0).to_vec();
        data.extend(std::iter::repeat(0.3).take(100));
        let stack =
            AnalysisStack::new(10, 10, vec!["n".into(), "flat".into()], data).unwrap();
        let patches = extract_patches(&stack, &[0], &[1], 0, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 400,
            learning_rate: 0.1,
            batch_size: 25,
            ..TrainConfig::default()
        };
        let (model, history) = train_linear_l1(&patches, &cfg).unwrap();
        assert!(
            (model.bias()[0] - 0.3).abs() < 0.05,
            "bias {} strayed from the target median",
            model.bias()[0]
        );
        assert!(history.last().unwrap().l1 < 0.05);
    }

    #[test]
    fn training_is_bit_deterministic_in_the_seed() {
        let stack = identity_stack(8, 8);
        let data = extract_patches(&stack, &[0], &[1], 1, 1).unwrap();
        let cfg = TrainConfig { epochs: 30, seed: 9, ..TrainConfig::default() };
        let (a, ha) = train_linear_l1(&data, &cfg).unwrap();
        let (b, hb) = train_linear_l1(&data, &cfg).unwrap();
        let bits = |v: &[f64]| -> Vec<u64> { v.iter().map(|x| x.to_bits()).collect() };
        assert_eq!(bits(a.weights()), bits(b.weights()));
        assert_eq!(bits(a.bias()), bits(b.bias()));
        assert_eq!(ha, hb);
        let (c, _) = train_linear_l1(&data, &TrainConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(bits(a.weights()), bits(c.weights()));
    }

    #[test]
    fn one_hot_weights_reproduce_a_channel_exactly() {
        let stack = noise_stack(9, 7, 3);
        // Sources 0 and 1 at radius 1: 18 features. Feature 13 is the
        // center pixel of source channel 1 (offset 9 + position 4).
        let mut w = vec![0.0; 18];
        w[13] = 1.0;
        let model = LinearModel::from_parts(18, 1, w, vec![0.0]).unwrap();
        let got = predict_linear(&model, &stack, &[0, 1], &[2], 1, 1).unwrap();
        assert_eq!(got.height(), 7);
        assert_eq!(got.width(), 5);
        assert_eq!(got.channel_names(), &["ch2".to_string()]);
        for y in 0..7 {
            for x in 0..5 {
                assert_eq!(got.value(0, y, x), stack.value(1, y + 1, x + 1));
            }
        }
    }

    #[test]
    fn strided_prediction_samples_the_center_grid() {
        let stack = noise_stack(9, 9, 2);
        let model = LinearModel::from_parts(9, 1, vec![0.0; 9], vec![0.25]).unwrap();
        let got = predict_linear(&model, &stack, &[0], &[1], 1, 3).unwrap();
        // Centers 1, 4, 7 on each axis.
        assert_eq!((got.height(), got.width()), (3, 3));
        assert!(got.channel(0).iter().all(|&v| v == 0.25));
    }

    #[test]
    fn prediction_validates_geometry() {
        let stack = noise_stack(8, 8, 3);
        let m = LinearModel::from_parts(9, 1, vec![0.0; 9], vec![0.0]).unwrap();
        // Radius mismatch: 1 source at radius 2 gives 25 features.
        assert!(predict_linear(&m, &stack, &[0], &[2], 2, 1).is_err());
        // Target count mismatch.
        assert!(predict_linear(&m, &stack, &[0], &[1, 2], 1, 1).is_err());
        // Overlap and bad indices.
        assert!(predict_linear(&m, &stack, &[0], &[0], 1, 1).is_err());
        assert!(predict_linear(&m, &stack, &[0], &[7], 1, 1).is_err());
        assert!(predict_linear(&m, &stack, &[0], &[1], 1, 0).is_err());
        assert!(predict_linear(&m, &stack, &[0], &[1], 1, 1).is_ok());
    }

    #[test]
    fn training_rejects_empty_data_and_bad_config() {
        let stack = identity_stack(6, 6);
        let data = extract_patches(&stack, &[0], &[1], 1, 1).unwrap();
        let bad = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(train_linear_l1(&data, &bad).is_err());
    }
}
