//! Structural similarity between channels: per-window statistics, the
//! three comparison terms, exponent-weighted and simplified composites,
//! sliding-window maps, and whole-stack similarity matrices.

mod map;
mod matrix;

pub use map::{ssim_global, ssim_map, SsimMap};
pub use matrix::{pearson_matrix, ssim_matrix, ssim_matrix_global, SimilarityKind, SimilarityMatrix};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stabilizing constants. With dynamic range L, `c1 = (k1 L)^2` and
/// `c2 = (k2 L)^2`; `c3` defaults to `c2 / 2`, which is what collapses
/// the three-term product into the simplified form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConstants<S: Scalar> {
    pub c1: S,
    pub c2: S,
    pub c3: S,
}

impl<S: Scalar> SsimConstants<S> {
    pub const DEFAULT_K1: f64 = 0.01;
    pub const DEFAULT_K2: f64 = 0.03;

    /// Constants for data on [0, 1] with the conventional k factors.
    pub fn unit_range() -> Self {
        Self::from_k(Self::DEFAULT_K1, Self::DEFAULT_K2, 1.0)
            .expect("default factors are valid")
    }

    pub fn from_k(k1: f64, k2: f64, dynamic_range: f64) -> Result<Self> {
        for (name, v) in [("k1", k1), ("k2", k2), ("dynamic range", dynamic_range)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be finite and positive, got {v}")));
            }
        }
        let c1 = (k1 * dynamic_range).powi(2);
        let c2 = (k2 * dynamic_range).powi(2);
        Ok(SsimConstants {
            c1: S::from_f64_lossy(c1),
            c2: S::from_f64_lossy(c2),
            c3: S::from_f64_lossy(c2 / 2.0),
        })
    }

    /// Replaces the structure-term constant.
    pub fn with_c3(self, c3: S) -> Result<Self> {
        if !(c3.is_finite() && c3 > S::zero()) {
            return Err(Error::validation("c3 must be finite and positive"));
        }
        Ok(SsimConstants { c3, ..self })
    }
}

/// Term weights for the exponentiated product form. All must be
/// non-negative; `1, 1, 1` recovers the plain product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimExponents<S: Scalar> {
    pub alpha: S,
    pub beta: S,
    pub gamma: S,
}

impl<S: Scalar> Default for SsimExponents<S> {
    fn default() -> Self {
        SsimExponents { alpha: S::one(), beta: S::one(), gamma: S::one() }
    }
}

impl<S: Scalar> SsimExponents<S> {
    pub fn new(alpha: S, beta: S, gamma: S) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v.is_finite() && v >= S::zero()) {
                return Err(Error::validation(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(SsimExponents { alpha, beta, gamma })
    }
}

/// How window pixels are weighted when computing local statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowWeighting {
    Uniform,
    Gaussian { sigma: f64 },
}

/// A square sliding window. Size must be odd and at least 3 so every
/// window has a centre pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    size: usize,
    weighting: WindowWeighting,
}

impl WindowSpec {
    pub const DEFAULT_SIZE: usize = 11;
    pub const DEFAULT_SIGMA: f64 = 1.5;

    pub fn new(size: usize, weighting: WindowWeighting) -> Result<Self> {
        if size < 3 || size % 2 == 0 {
            return Err(Error::validation(format!("window size must be odd and >= 3, got {size}")));
        }
        if let WindowWeighting::Gaussian { sigma } = weighting {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::validation(format!("gaussian sigma must be positive, got {sigma}")));
            }
        }
        Ok(WindowSpec { size, weighting })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::new(size, WindowWeighting::Uniform)
    }

    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        Self::new(size, WindowWeighting::Gaussian { sigma })
    }

    /// The conventional 11x11 window with sigma 1.5.
    pub fn default_gaussian() -> Self {
        Self::gaussian(Self::DEFAULT_SIZE, Self::DEFAULT_SIGMA).expect("default window is valid")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weighting(&self) -> WindowWeighting {
        self.weighting
    }

    /// One axis of the separable weight kernel, normalized to sum 1.
    pub fn weights_1d<S: Scalar>(&self) -> Vec<S> {
        let raw: Vec<f64> = match self.weighting {
            WindowWeighting::Uniform => vec![1.0; self.size],
            WindowWeighting::Gaussian { sigma } => {
                let c = (self.size - 1) as f64 / 2.0;
                (0..self.size)
                    .map(|i| {
                        let d = i as f64 - c;
                        (-d * d / (2.0 * sigma * sigma)).exp()
                    })
                    .collect()
            }
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| S::from_f64_lossy(v / total)).collect()
    }

    /// Full 2-D weights as the outer product of the 1-D kernel.
    pub fn weights_2d<S: Scalar>(&self) -> Vec<S> {
        let k = self.weights_1d::<S>();
        let mut out = Vec::with_capacity(self.size * self.size);
        for &ky in &k {
            for &kx in &k {
                out.push(ky * kx);
            }
        }
        out
    }

    pub fn pixel_count(&self) -> usize {
        self.size * self.size
    }
}

/// Weighted first and second moments of a paired window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats<S: Scalar> {
    pub mean_x: S,
    pub mean_y: S,
    pub var_x: S,
    pub var_y: S,
    pub cov_xy: S,
}

/// Weighted population statistics of one window pair. Both slices must
/// hold exactly the window's pixel count. Variances are clamped at zero
/// so later square roots stay real.
pub fn window_stats<S: Scalar>(x: &[S], y: &[S], w: &WindowSpec) -> Result<WindowStats<S>> {
    let n = w.pixel_count();
    if x.len() != n || y.len() != n {
        return Err(Error::validation(format!(
            "window data must hold {n} pixels, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let weights = w.weights_2d::<S>();
    let mut mean_x = S::zero();
    let mut mean_y = S::zero();
    for i in 0..n {
        mean_x += weights[i] * x[i];
        mean_y += weights[i] * y[i];
    }
    let mut var_x = S::zero();
    let mut var_y = S::zero();
    let mut cov_xy = S::zero();
    for i in 0..n {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        var_x += weights[i] * dx * dx;
        var_y += weights[i] * dy * dy;
        cov_xy += weights[i] * dx * dy;
    }
    Ok(WindowStats {
        mean_x,
        mean_y,
        var_x: var_x.max(S::zero()),
        var_y: var_y.max(S::zero()),
        cov_xy,
    })
}

/// `(2 mx my + c1) / (mx^2 + my^2 + c1)`.
pub fn luminance_term<S: Scalar>(mean_x: S, mean_y: S, c1: S) -> S {
    let two = S::from_f64_lossy(2.0);
    (two * mean_x * mean_y + c1) / (mean_x * mean_x + mean_y * mean_y + c1)
}

/// `(2 sx sy + c2) / (sx^2 + sy^2 + c2)` with `s = sqrt(max(var, 0))`.
pub fn contrast_term<S: Scalar>(var_x: S, var_y: S, c2: S) -> S {
    let sx = var_x.max(S::zero()).sqrt();
    let sy = var_y.max(S::zero()).sqrt();
    let two = S::from_f64_lossy(2.0);
    (two * sx * sy + c2) / (var_x.max(S::zero()) + var_y.max(S::zero()) + c2)
}

/// `(cov + c3) / (sx sy + c3)`. May be negative for anti-correlated
/// windows.
pub fn structure_term<S: Scalar>(cov_xy: S, var_x: S, var_y: S, c3: S) -> S {
    let sx = var_x.max(S::zero()).sqrt();
    let sy = var_y.max(S::zero()).sqrt();
    (cov_xy + c3) / (sx * sy + c3)
}

/// Exponent-weighted product `l^alpha * c^beta * s^gamma`.
///
/// A negative structure term under a fractional exponent has no real
/// value and is reported as a domain error instead of NaN.
pub fn ssim_full<S: Scalar>(
    stats: &WindowStats<S>,
    c: &SsimConstants<S>,
    e: &SsimExponents<S>,
) -> Result<S> {
    let l = luminance_term(stats.mean_x, stats.mean_y, c.c1);
    let cc = contrast_term(stats.var_x, stats.var_y, c.c2);
    let s = structure_term(stats.cov_xy, stats.var_x, stats.var_y, c.c3);
    if s < S::zero() && e.gamma.fract() != S::zero() {
        return Err(Error::domain(format!(
            "structure term {s} is negative and gamma {} is fractional",
            e.gamma
        )));
    }
    Ok(l.powf(e.alpha) * cc.powf(e.beta) * s.powf(e.gamma))
}

/// Two-factor form
/// `(2 mx my + c1)(2 cov + c2) / ((mx^2 + my^2 + c1)(var_x + var_y + c2))`,
/// equal to the unit-exponent product when `c3 = c2 / 2`.
pub fn ssim_simplified<S: Scalar>(stats: &WindowStats<S>, c: &SsimConstants<S>) -> S {
    let two = S::from_f64_lossy(2.0);
    let num = (two * stats.mean_x * stats.mean_y + c.c1) * (two * stats.cov_xy + c.c2);
    let den = (stats.mean_x * stats.mean_x + stats.mean_y * stats.mean_y + c.c1)
        * (stats.var_x + stats.var_y + c.c2);
    num / den
}
