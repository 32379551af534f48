//! Sliding-window similarity maps over whole channels.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::ssim::{ssim_simplified, SsimConstants, WindowSpec, WindowStats};

/// Per-window similarity over every fully contained window position.
/// `height x width` is the valid grid, `(image - window + 1)` per axis;
/// no padding is ever invented at the borders.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimMap<S: Scalar> {
    height: usize,
    width: usize,
    values: Vec<S>,
    mean: S,
}

impl<S: Scalar> SsimMap<S> {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major window scores over the valid grid.
    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// Unweighted mean over all window positions.
    pub fn mean(&self) -> S {
        self.mean
    }
}

/// Computes the similarity map of two equally sized channels.
///
/// Local moments come from a separable correlation with the window
/// kernel, which matches the direct per-window statistics to rounding
/// error. Each map entry is clamped into [-1, 1] to absorb that
/// rounding.
pub fn ssim_map<S: Scalar>(
    x: &[S],
    y: &[S],
    height: usize,
    width: usize,
    w: &WindowSpec,
    c: &SsimConstants<S>,
) -> Result<SsimMap<S>> {
    if x.len() != height * width || y.len() != height * width {
        return Err(Error::validation("channel data does not match the stated dimensions"));
    }
    let size = w.size();
    if height < size || width < size {
        return Err(Error::validation(format!(
            "image {height}x{width} is smaller than the {size}x{size} window"
        )));
    }

    let kernel = w.weights_1d::<S>();
    let xx: Vec<S> = x.iter().map(|&v| v * v).collect();
    let yy: Vec<S> = y.iter().map(|&v| v * v).collect();
    let xy: Vec<S> = x.iter().zip(y).map(|(&a, &b)| a * b).collect();

    let mu_x = correlate_valid(x, height, width, &kernel);
    let mu_y = correlate_valid(y, height, width, &kernel);
    let m_xx = correlate_valid(&xx, height, width, &kernel);
    let m_yy = correlate_valid(&yy, height, width, &kernel);
    let m_xy = correlate_valid(&xy, height, width, &kernel);

    let out_h = height - size + 1;
    let out_w = width - size + 1;
    let mut values = Vec::with_capacity(out_h * out_w);
    let mut acc = S::zero();
    for i in 0..out_h * out_w {
        let stats = WindowStats {
            mean_x: mu_x[i],
            mean_y: mu_y[i],
            var_x: (m_xx[i] - mu_x[i] * mu_x[i]).max(S::zero()),
            var_y: (m_yy[i] - mu_y[i] * mu_y[i]).max(S::zero()),
            cov_xy: m_xy[i] - mu_x[i] * mu_y[i],
        };
        let v = ssim_simplified(&stats, c).max(-S::one()).min(S::one());
        acc += v;
        values.push(v);
    }
    let mean = acc / S::from_f64_lossy((out_h * out_w) as f64);
    Ok(SsimMap { height: out_h, width: out_w, values, mean })
}

/// Whole-image similarity: both channels treated as a single uniform
/// window, regardless of size.
pub fn ssim_global<S: Scalar>(x: &[S], y: &[S], c: &SsimConstants<S>) -> Result<S> {
    if x.len() != y.len() {
        return Err(Error::validation("channels must have the same length"));
    }
    if x.is_empty() {
        return Err(Error::validation("channels must be non-empty"));
    }
    let n = S::from_f64_lossy(x.len() as f64);
    let mut mean_x = S::zero();
    let mut mean_y = S::zero();
    for i in 0..x.len() {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= n;
    mean_y /= n;
    let mut var_x = S::zero();
    let mut var_y = S::zero();
    let mut cov = S::zero();
    for i in 0..x.len() {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        var_x += dx * dx;
        var_y += dy * dy;
        cov += dx * dy;
    }
    let stats = WindowStats {
        mean_x,
        mean_y,
        var_x: (var_x / n).max(S::zero()),
        var_y: (var_y / n).max(S::zero()),
        cov_xy: cov / n,
    };
    Ok(ssim_simplified(&stats, c))
}

/// Valid-mode separable correlation: horizontal pass then vertical pass,
/// output `(h - k + 1) x (w - k + 1)`.
fn correlate_valid<S: Scalar>(img: &[S], h: usize, w: usize, kernel: &[S]) -> Vec<S> {
    let k = kernel.len();
    let out_w = w - k + 1;
    let out_h = h - k + 1;

    let mut horiz = vec![S::zero(); h * out_w];
    for y in 0..h {
        let row = &img[y * w..(y + 1) * w];
        let dst = &mut horiz[y * out_w..(y + 1) * out_w];
        for (x, d) in dst.iter_mut().enumerate() {
            let mut acc = S::zero();
            for (j, &kj) in kernel.iter().enumerate() {
                acc += kj * row[x + j];
            }
            *d = acc;
        }
    }

    let mut out = vec![S::zero(); out_h * out_w];
    for y in 0..out_h {
        let dst = &mut out[y * out_w..(y + 1) * out_w];
        for (j, &kj) in kernel.iter().enumerate() {
            let src = &horiz[(y + j) * out_w..(y + j + 1) * out_w];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += kj * s;
            }
        }
    }
    out
}
