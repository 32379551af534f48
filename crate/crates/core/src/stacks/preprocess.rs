//! Resolution reduction and per-channel intensity normalization.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stacks::ChannelStack;

/// Area-weighted box downsampling. Each output pixel is the mean of the
/// input region it covers, with fractional border pixels weighted by
/// their overlap, so the image mean is preserved. Output dimensions must
/// not exceed the input dimensions.
pub fn downsample_area<S: Scalar>(
    stack: &ChannelStack<S>,
    new_height: usize,
    new_width: usize,
) -> Result<ChannelStack<S>> {
    let (h, w) = (stack.height(), stack.width());
    if new_height == 0 || new_width == 0 {
        return Err(Error::validation("target dimensions must be at least 1x1"));
    }
    if new_height > h || new_width > w {
        return Err(Error::validation(format!(
            "cannot upscale: target {new_height}x{new_width} exceeds source {h}x{w}"
        )));
    }

    let row_spans = axis_overlaps(h, new_height);
    let col_spans = axis_overlaps(w, new_width);

    let mut data = Vec::with_capacity(new_height * new_width * stack.channel_count());
    for c in 0..stack.channel_count() {
        let src = stack.channel(c);
        for rs in &row_spans {
            for cs in &col_spans {
                let mut acc = 0.0_f64;
                let mut weight = 0.0_f64;
                for &(y, wy) in rs {
                    let row = &src[y * w..(y + 1) * w];
                    for &(x, wx) in cs {
                        acc += row[x].into_f64() * wy * wx;
                        weight += wy * wx;
                    }
                }
                data.push(S::from_f64_lossy(acc / weight));
            }
        }
    }
    ChannelStack::new(new_height, new_width, stack.channel_names().to_vec(), data)
}

/// For each output cell along one axis: the source indices it overlaps
/// and the length of each overlap. Cell `i` covers
/// `[i * n / m, (i + 1) * n / m)` in source coordinates.
fn axis_overlaps(n: usize, m: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n as f64 / m as f64;
    (0..m)
        .map(|i| {
            let start = i as f64 * scale;
            let end = (i + 1) as f64 * scale;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(n);
            (first..last)
                .filter_map(|j| {
                    let overlap = end.min((j + 1) as f64) - start.max(j as f64);
                    (overlap > 0.0).then_some((j, overlap))
                })
                .collect()
        })
        .collect()
}

/// Rescales every channel independently onto [0, 1] by its own min and
/// max. A constant channel maps to all zeros. Applying the transform
/// twice gives the same result as applying it once.
pub fn normalize_minmax<S: Scalar>(stack: &ChannelStack<S>) -> ChannelStack<S> {
    let n = stack.pixels_per_channel();
    let mut data = Vec::with_capacity(n * stack.channel_count());
    for c in 0..stack.channel_count() {
        let src = stack.channel(c);
        let mut lo = src[0];
        let mut hi = src[0];
        for &v in src {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        if lo == hi {
            data.extend(std::iter::repeat_n(S::zero(), n));
        } else {
            let span = hi - lo;
            data.extend(src.iter().map(|&v| (v - lo) / span));
        }
    }
    ChannelStack::new(stack.height(), stack.width(), stack.channel_names().to_vec(), data)
        .expect("normalizing a valid stack keeps it valid")
}
