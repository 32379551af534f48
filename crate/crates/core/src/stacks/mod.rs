//! Multichannel image stacks: in-memory representation, container I/O,
//! preprocessing, and seeded synthetic data.

mod preprocess;
mod raw;
mod synth;
mod tiff;

pub use preprocess::{downsample_area, normalize_minmax};
pub use raw::{load_raw, save_raw};
pub use synth::{generate_synthetic, SyntheticSpec};
pub use tiff::import_tiff;

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, shuffled_indices};
use crate::scalar::Scalar;

/// A stack of equally sized single-channel images.
///
/// Invariants, enforced on construction and after every load:
/// - `height >= 1`, `width >= 1`, at least one channel
/// - channel names are unique
/// - `data.len() == height * width * channel_count`
/// - every value is finite
///
/// Data is channel-major; each channel is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack<S: Scalar> {
    height: usize,
    width: usize,
    channel_names: Vec<String>,
    data: Vec<S>,
}

impl<S: Scalar> ChannelStack<S> {
    pub fn new(
        height: usize,
        width: usize,
        channel_names: Vec<String>,
        data: Vec<S>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::validation("stack dimensions must be at least 1x1"));
        }
        if channel_names.is_empty() {
            return Err(Error::validation("stack must contain at least one channel"));
        }
        for (i, a) in channel_names.iter().enumerate() {
            for b in channel_names.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::validation(format!("duplicate channel name {a:?}")));
                }
            }
        }
        let expected = height
            .checked_mul(width)
            .and_then(|p| p.checked_mul(channel_names.len()))
            .ok_or_else(|| Error::validation("stack dimensions overflow"))?;
        if data.len() != expected {
            return Err(Error::validation(format!(
                "data length {} does not match {height}x{width}x{} channels",
                data.len(),
                channel_names.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("stack values must be finite"));
        }
        Ok(ChannelStack { height, width, channel_names, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channel_count(&self) -> usize {
        self.channel_names.len()
    }

    pub fn pixels_per_channel(&self) -> usize {
        self.height * self.width
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel_name(&self, index: usize) -> &str {
        &self.channel_names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|n| n == name)
    }

    /// Row-major pixel slice of one channel.
    pub fn channel(&self, index: usize) -> &[S] {
        let n = self.pixels_per_channel();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn value(&self, channel: usize, y: usize, x: usize) -> S {
        self.data[channel * self.pixels_per_channel() + y * self.width + x]
    }

    /// Full channel-major buffer.
    pub fn data(&self) -> &[S] {
        &self.data
    }

    /// Converts every pixel into another scalar width.
    pub fn convert<T: Scalar>(&self) -> ChannelStack<T> {
        ChannelStack {
            height: self.height,
            width: self.width,
            channel_names: self.channel_names.clone(),
            data: self.data.iter().map(|v| T::from_f64_lossy(v.into_f64())).collect(),
        }
    }

    /// New stack with `margin` pixels trimmed from every edge of every
    /// channel.
    pub fn crop_border(&self, margin: usize) -> Result<ChannelStack<S>> {
        if margin == 0 {
            return Ok(self.clone());
        }
        if 2 * margin >= self.height || 2 * margin >= self.width {
            return Err(Error::validation(format!(
                "cannot trim {margin} pixels per edge from a {}x{} stack",
                self.height, self.width
            )));
        }
        let (nh, nw) = (self.height - 2 * margin, self.width - 2 * margin);
        let mut data = Vec::with_capacity(nh * nw * self.channel_count());
        for c in 0..self.channel_count() {
            let plane = self.channel(c);
            for y in margin..self.height - margin {
                let row = y * self.width;
                data.extend_from_slice(&plane[row + margin..row + self.width - margin]);
            }
        }
        ChannelStack::new(nh, nw, self.channel_names.clone(), data)
    }

    /// New stack keeping only `indices`, in the order given.
    pub fn select_channels(&self, indices: &[usize]) -> Result<ChannelStack<S>> {
        if indices.is_empty() {
            return Err(Error::validation("channel selection must be non-empty"));
        }
        let mut names = Vec::with_capacity(indices.len());
        let mut data = Vec::with_capacity(indices.len() * self.pixels_per_channel());
        for &i in indices {
            if i >= self.channel_count() {
                return Err(Error::validation(format!(
                    "channel index {i} out of range for {} channels",
                    self.channel_count()
                )));
            }
            names.push(self.channel_names[i].clone());
            data.extend_from_slice(self.channel(i));
        }
        ChannelStack::new(self.height, self.width, names, data)
    }
}

/// Index partition of a list of items into train and test halves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Partitions `items` into train/test index sets.
///
/// The train size is `round_half_up(n * train_fraction)` clamped so both
/// halves stay non-empty. Membership is decided by a seeded shuffle, so a
/// given `(n, fraction, seed)` always produces the same partition.
pub fn split_train_test<T>(items: &[T], train_fraction: f64, seed: u64) -> Result<SplitResult> {
    let n = items.len();
    if n < 2 {
        return Err(Error::validation("cannot split fewer than 2 items"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::validation(format!(
            "train fraction must be inside (0, 1), got {train_fraction}"
        )));
    }
    let raw = (n as f64 * train_fraction + 0.5).floor() as usize;
    let n_train = raw.clamp(1, n - 1);

    let mut rng = seeded_rng(seed);
    let order = shuffled_indices(n, &mut rng);
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut test: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitResult { train, test, seed })
}
