//! Conditional adversarial training of a patch generator against a
//! patch discriminator, with an L1 term anchoring the generator to the
//! reference targets.

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, shuffled_indices};
use crate::scalar::Scalar;

use super::mlp::{mlp_backward, mlp_forward, Activation, Mlp, MlpGradients};
use super::{combined_objective, gan_loss, l1_loss, HistoryRow, PatchDataset, TrainConfig, PROB_CLAMP};

fn zero_grads<S: Scalar>(m: &Mlp<S>) -> MlpGradients<S> {
    MlpGradients {
        weights: m.weights().iter().map(|w| vec![S::zero(); w.len()]).collect(),
        biases: m.biases().iter().map(|b| vec![S::zero(); b.len()]).collect(),
        input: Vec::new(),
    }
}

fn add_grads<S: Scalar>(acc: &mut MlpGradients<S>, g: &MlpGradients<S>) {
    for (a, b) in acc.weights.iter_mut().zip(&g.weights) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x = *x + y;
        }
    }
    for (a, b) in acc.biases.iter_mut().zip(&g.biases) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x = *x + y;
        }
    }
}

/// 1 / clamp(p), the slope of ln p with the probability kept away from
/// the corners so saturated discriminator outputs cannot poison the
/// update with infinities.
fn inv_clamped<S: Scalar>(p: S) -> S {
    let lo = S::from_f64_lossy(PROB_CLAMP);
    let hi = S::from_f64_lossy(1.0 - PROB_CLAMP);
    S::one() / p.max(lo).min(hi)
}

fn concat<S: Scalar>(x: &[S], y: &[S], buf: &mut Vec<S>) {
    buf.clear();
    buf.extend_from_slice(x);
    buf.extend_from_slice(y);
}

/// Full-dataset generator predictions, real scores and fake scores.
fn evaluate<S: Scalar>(
    g: &Mlp<S>,
    d: &Mlp<S>,
    data: &PatchDataset<S>,
) -> Result<(f64, f64)> {
    let n = data.len();
    let mut preds = Vec::with_capacity(n * data.target_count());
    let mut real = Vec::with_capacity(n);
    let mut fake = Vec::with_capacity(n);
    let mut pair = Vec::new();
    for i in 0..n {
        let x = data.feature_row(i);
        let (y_hat, _) = mlp_forward(g, x)?;
        concat(x, data.target_row(i), &mut pair);
        real.push(mlp_forward(d, &pair)?.0[0]);
        concat(x, &y_hat, &mut pair);
        fake.push(mlp_forward(d, &pair)?.0[0]);
        preds.extend(y_hat);
    }
    let gan = gan_loss(&real, &fake)?.into_f64();
    let l1 = l1_loss(&preds, data.targets())?.into_f64();
    Ok((gan, l1))
}

/// Alternating minibatch training: `d_steps_per_g_step` ascent steps on
/// the discriminator score, then one descent step on the generator's
/// L1-anchored non-saturating objective. Returns both networks and the
/// full-dataset losses measured after each epoch.
pub fn train_adversarial<S: Scalar>(
    data: &PatchDataset<S>,
    generator_spec: &[usize],
    discriminator_spec: &[usize],
    cfg: &TrainConfig,
) -> Result<(Mlp<S>, Mlp<S>, Vec<HistoryRow>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::validation("cannot train on an empty dataset"));
    }
    let f_dim = data.feature_dim();
    let t_count = data.target_count();
    if generator_spec.first() != Some(&f_dim) || generator_spec.last() != Some(&t_count) {
        return Err(Error::validation(format!(
            "generator must map {f_dim} features to {t_count} targets, got {generator_spec:?}"
        )));
    }
    if discriminator_spec.first() != Some(&(f_dim + t_count)) || discriminator_spec.last() != Some(&1)
    {
        return Err(Error::validation(format!(
            "discriminator must map {} paired values to one score, got {discriminator_spec:?}",
            f_dim + t_count
        )));
    }

    let mut rng = seeded_rng(cfg.seed);
    let mut g = Mlp::new(generator_spec, Activation::Identity, &mut rng)?;
    let mut d = Mlp::new(discriminator_spec, Activation::Logistic, &mut rng)?;
    let lambda = S::from_f64_lossy(cfg.lambda_l1);
    let n = data.len();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut pair = Vec::new();

    for epoch in 0..cfg.epochs {
        let lr = S::from_f64_lossy(cfg.learning_rate / (1.0 + epoch as f64));
        let order = shuffled_indices(n, &mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let inv_b = S::one() / S::from_f64_lossy(batch.len() as f64);

            // Fakes are frozen while the discriminator catches up.
            let fakes: Vec<Vec<S>> = batch
                .iter()
                .map(|&i| mlp_forward(&g, data.feature_row(i)).map(|(y, _)| y))
                .collect::<Result<_>>()?;

            for _ in 0..cfg.d_steps_per_g_step {
                let mut acc = zero_grads(&d);
                for (&i, y_hat) in batch.iter().zip(&fakes) {
                    let x = data.feature_row(i);
                    // Ascend mean ln D(x, y): upstream d/dp = 1 / p.
                    concat(x, data.target_row(i), &mut pair);
                    let (p, cache) = mlp_forward(&d, &pair)?;
                    let up = inv_clamped(p[0]) * inv_b;
                    add_grads(&mut acc, &mlp_backward(&d, &cache, &[up])?);
                    // Ascend mean ln(1 - D(x, G(x))): d/dp = -1 / (1 - p).
                    concat(x, y_hat, &mut pair);
                    let (p, cache) = mlp_forward(&d, &pair)?;
                    let up = -inv_clamped(S::one() - p[0]) * inv_b;
                    add_grads(&mut acc, &mlp_backward(&d, &cache, &[up])?);
                }
                d.step(&acc, lr);
            }

            // One generator step on lambda * L1 - mean ln D(x, G(x)).
            let mut acc = zero_grads(&g);
            let l1_scale = lambda * inv_b / S::from_f64_lossy(t_count as f64);
            for &i in batch {
                let x = data.feature_row(i);
                let (y_hat, g_cache) = mlp_forward(&g, x)?;
                concat(x, &y_hat, &mut pair);
                let (p, d_cache) = mlp_forward(&d, &pair)?;
                let through_d = mlp_backward(&d, &d_cache, &[-inv_clamped(p[0]) * inv_b])?;
                let want = data.target_row(i);
                let upstream: Vec<S> = (0..t_count)
                    .map(|t| {
                        let diff = y_hat[t] - want[t];
                        let sign = if diff > S::zero() {
                            S::one()
                        } else if diff < S::zero() {
                            -S::one()
                        } else {
                            S::zero()
                        };
                        sign * l1_scale + through_d.input[f_dim + t]
                    })
                    .collect();
                add_grads(&mut acc, &mlp_backward(&g, &g_cache, &upstream)?);
            }
            g.step(&acc, -lr);
        }

        let (gan, l1) = evaluate(&g, &d, data)?;
        history.push(HistoryRow {
            epoch,
            gan,
            l1,
            objective: combined_objective(gan, l1, cfg.lambda_l1),
        });
    }
    Ok((g, d, history))
}
