//! Seeded synthetic stacks with known channel groupings, used as ground
//! truth for clustering and selection experiments.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::scalar::Scalar;
use crate::stacks::ChannelStack;

/// Recipe for a synthetic stack. Channels are affine copies of
/// `template_count` shared blob templates plus Gaussian pixel noise;
/// channel `c` uses template `c % template_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub channel_count: usize,
    pub template_count: usize,
    /// Per-channel multiplicative factor, drawn uniformly. The interval
    /// must not straddle or touch zero so structure is never erased.
    pub gain_range: (f64, f64),
    /// Per-channel additive level, drawn uniformly.
    pub offset_range: (f64, f64),
    /// Standard deviation of i.i.d. pixel noise.
    pub noise_sigma: f64,
    /// Gaussian blobs per template.
    pub blob_count: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            height: 64,
            width: 64,
            channel_count: 24,
            template_count: 4,
            gain_range: (0.8, 1.25),
            offset_range: (0.0, 0.1),
            noise_sigma: 0.05,
            blob_count: 12,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::validation("synthetic dimensions must be at least 1x1"));
        }
        if self.channel_count == 0 {
            return Err(Error::validation("synthetic stack needs at least one channel"));
        }
        if self.template_count == 0 || self.template_count > self.channel_count {
            return Err(Error::validation(format!(
                "template count {} must be in 1..={}",
                self.template_count, self.channel_count
            )));
        }
        let (lo, hi) = self.gain_range;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::validation("gain range must be a finite, ordered interval"));
        }
        if lo <= 0.0 && hi >= 0.0 {
            return Err(Error::validation("gain range must exclude zero"));
        }
        let (olo, ohi) = self.offset_range;
        if !(olo.is_finite() && ohi.is_finite()) || olo > ohi {
            return Err(Error::validation("offset range must be a finite, ordered interval"));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::validation("noise sigma must be finite and non-negative"));
        }
        if self.blob_count == 0 {
            return Err(Error::validation("templates need at least one blob"));
        }
        Ok(())
    }
}

/// Generates the stack described by `spec` together with the true
/// template label of each channel. The same spec always produces the
/// same stack, bit for bit.
pub fn generate_synthetic<S: Scalar>(spec: &SyntheticSpec) -> Result<(ChannelStack<S>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let (h, w) = (spec.height, spec.width);
    let pixels = h * w;

    // Draw order is fixed: all templates first, then per channel its
    // gain, offset, and noise field. Keeping the order stable is what
    // makes the output reproducible from the seed alone.
    let templates: Vec<Vec<f64>> =
        (0..spec.template_count).map(|_| blob_template(h, w, spec.blob_count, &mut rng)).collect();

    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|_| Error::validation("noise sigma rejected by sampler"))?;

    let mut data = Vec::with_capacity(pixels * spec.channel_count);
    let mut labels = Vec::with_capacity(spec.channel_count);
    for c in 0..spec.channel_count {
        let t = c % spec.template_count;
        labels.push(t);
        let gain = rng.random_range(spec.gain_range.0..=spec.gain_range.1);
        let offset = rng.random_range(spec.offset_range.0..=spec.offset_range.1);
        for &tv in &templates[t] {
            let v = gain * tv + offset + noise.sample(&mut rng);
            data.push(S::from_f64_lossy(v.min(f64::MAX).max(-f64::MAX)));
        }
    }

    let digits = (spec.channel_count.max(1) as f64).log10().floor() as usize + 1;
    let names = (0..spec.channel_count).map(|c| format!("ch{c:0digits$}")).collect();
    let stack = ChannelStack::new(h, w, names, data)?;
    Ok((stack, labels))
}

/// Sum of random Gaussian blobs, min-max scaled onto [0, 1].
fn blob_template(h: usize, w: usize, blobs: usize, rng: &mut crate::rng::SeededRng) -> Vec<f64> {
    let min_dim = h.min(w) as f64;
    let mut field = vec![0.0_f64; h * w];
    for _ in 0..blobs {
        let cy = rng.random_range(0.0..h as f64);
        let cx = rng.random_range(0.0..w as f64);
        let sigma = rng.random_range(min_dim / 10.0..=min_dim / 4.0);
        let amp = rng.random_range(0.5..=1.0);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in 0..h {
            let dy = y as f64 - cy;
            for x in 0..w {
                let dx = x as f64 - cx;
                field[y * w + x] += amp * (-(dy * dy + dx * dx) * inv).exp();
            }
        }
    }
    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let span = hi - lo;
        for v in &mut field {
            *v = (*v - lo) / span;
        }
    }
    field
}
