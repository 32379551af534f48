//! Pairwise channel similarity matrices and their serialized forms.

use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::ssim::{ssim_global, ssim_map, SsimConstants, WindowSpec};
use crate::stacks::ChannelStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    Ssim,
    Pearson,
}

impl SimilarityKind {
    pub fn label(&self) -> &'static str {
        match self {
            SimilarityKind::Ssim => "ssim",
            SimilarityKind::Pearson => "pearson",
        }
    }
}

/// Symmetric channel-by-channel similarity with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<S: Scalar> {
    kind: SimilarityKind,
    names: Vec<String>,
    /// Row-major `n x n`.
    values: Vec<S>,
}

impl<S: Scalar> SimilarityMatrix<S> {
    pub(crate) fn from_pairs(
        kind: SimilarityKind,
        names: Vec<String>,
        pair_values: &[S],
    ) -> Self {
        let n = names.len();
        debug_assert_eq!(pair_values.len(), n * (n - 1) / 2);
        let mut values = vec![S::one(); n * n];
        let mut it = pair_values.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().expect("one value per unordered pair");
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        SimilarityMatrix { kind, names, values }
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.values[i * self.n() + j]
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// Header row of channel names, then one row of values per channel.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        out.push_str(&self.names.iter().map(|n| csv_field(n)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for i in 0..n {
            let row: Vec<String> =
                (0..n).map(|j| format!("{}", self.get(i, j).into_f64())).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let n = self.n();
        let rows: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| self.get(i, j).into_f64()).collect()).collect();
        json!({
            "kind": self.kind.label(),
            "names": self.names,
            "values": rows,
        })
        .to_string()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn check_pairable<S: Scalar>(stack: &ChannelStack<S>) -> Result<()> {
    if stack.channel_count() < 2 {
        return Err(Error::validation("similarity matrix needs at least 2 channels"));
    }
    Ok(())
}

/// Mean windowed similarity for every unordered channel pair. Each pair
/// is computed once and mirrored, so the matrix is symmetric by
/// construction; the diagonal is fixed at 1.
pub fn ssim_matrix<S: Scalar>(
    stack: &ChannelStack<S>,
    w: &WindowSpec,
    c: &SsimConstants<S>,
) -> Result<SimilarityMatrix<S>> {
    check_pairable(stack)?;
    let (h, wd) = (stack.height(), stack.width());
    if h < w.size() || wd < w.size() {
        return Err(Error::validation(format!(
            "stack {h}x{wd} is smaller than the {}x{} window",
            w.size(),
            w.size()
        )));
    }
    pair_matrix(stack, SimilarityKind::Ssim, |x, y| {
        Ok(ssim_map(x, y, h, wd, w, c)?.mean())
    })
}

/// Like [`ssim_matrix`] but with a single whole-image window per pair.
pub fn ssim_matrix_global<S: Scalar>(
    stack: &ChannelStack<S>,
    c: &SsimConstants<S>,
) -> Result<SimilarityMatrix<S>> {
    check_pairable(stack)?;
    pair_matrix(stack, SimilarityKind::Ssim, |x, y| ssim_global(x, y, c))
}

/// Pearson correlation of raw pixel values for every channel pair. A
/// channel with zero variance correlates 0 with everything; the diagonal
/// stays 1 regardless.
pub fn pearson_matrix<S: Scalar>(stack: &ChannelStack<S>) -> Result<SimilarityMatrix<S>> {
    check_pairable(stack)?;
    pair_matrix(stack, SimilarityKind::Pearson, |x, y| Ok(pearson(x, y)))
}

/// Computes every `i < j` pair, in parallel, into slots indexed by pair
/// rank. The slot layout makes the result independent of scheduling, so
/// any thread count produces identical bytes downstream.
fn pair_matrix<S: Scalar>(
    stack: &ChannelStack<S>,
    kind: SimilarityKind,
    f: impl Fn(&[S], &[S]) -> Result<S> + Sync,
) -> Result<SimilarityMatrix<S>> {
    let n = stack.channel_count();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Result<Vec<S>> = pairs
        .par_iter()
        .map(|&(i, j)| f(stack.channel(i), stack.channel(j)))
        .collect();
    Ok(SimilarityMatrix::from_pairs(kind, stack.channel_names().to_vec(), &values?))
}

fn pearson<S: Scalar>(x: &[S], y: &[S]) -> S {
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
    if var_x == S::zero() || var_y == S::zero() {
        return S::zero();
    }
    (cov / (var_x.sqrt() * var_y.sqrt())).max(-S::one()).min(S::one())
}
