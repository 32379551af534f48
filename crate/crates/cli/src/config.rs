//! Flat key = value run configuration. Defaults cover every key; a
//! config file and then command-line flags override them in that order.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chansynth_core::cluster::Linkage;
use chansynth_core::predictor::TrainConfig;
use chansynth_core::ssim::{SsimConstants, WindowSpec};
use chansynth_core::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Gaussian,
    Uniform,
}

/// Structure-term stabilizer: tied to c2 or pinned explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum C3Mode {
    HalfC2,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterCountMode {
    Silhouette,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub window_size: usize,
    pub window_weighting: Weighting,
    pub window_sigma: f64,
    pub ssim_k1: f64,
    pub ssim_k2: f64,
    pub ssim_data_range: f64,
    pub ssim_c3: C3Mode,
    pub linkage: Linkage,
    pub cluster_k: ClusterCountMode,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub holdout: f64,
    pub radius: usize,
    pub stride: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lambda_l1: f64,
    pub d_steps: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            window_size: WindowSpec::DEFAULT_SIZE,
            window_weighting: Weighting::Gaussian,
            window_sigma: WindowSpec::DEFAULT_SIGMA,
            ssim_k1: SsimConstants::<f64>::DEFAULT_K1,
            ssim_k2: SsimConstants::<f64>::DEFAULT_K2,
            ssim_data_range: 1.0,
            ssim_c3: C3Mode::HalfC2,
            linkage: Linkage::Average,
            cluster_k: ClusterCountMode::Silhouette,
            fractions: vec![0.25, 0.5],
            seeds: (0..20).collect(),
            holdout: 0.2,
            radius: 0,
            stride: 1,
            epochs: 40,
            learning_rate: 0.05,
            batch_size: 32,
            lambda_l1: 100.0,
            d_steps: 1,
            out: None,
        }
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::validation(format!("{key}: {v:?} is not a whole number")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse().map_err(|_| Error::validation(format!("{key}: {v:?} is not a whole number")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::validation(format!("{key}: {v:?} is not a number")))
}

/// Comma-separated floats, e.g. "0.25,0.5".
pub fn parse_fractions(v: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = v
        .split(',')
        .map(|p| parse_f64("fractions", p.trim()))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::validation("fractions must list at least one value"));
    }
    Ok(out)
}

/// Either an exclusive range "0..20" or a comma list "0,3,7".
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let v = v.trim();
    if let Some((lo, hi)) = v.split_once("..") {
        let lo = parse_u64("seeds", lo.trim())?;
        let hi = parse_u64("seeds", hi.trim())?;
        if hi <= lo {
            return Err(Error::validation(format!("seed range {v:?} is empty")));
        }
        return Ok((lo..hi).collect());
    }
    let out: Vec<u64> =
        v.split(',').map(|p| parse_u64("seeds", p.trim())).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::validation("seeds must list at least one value"));
    }
    Ok(out)
}

/// Comma-separated channel indices, e.g. "0,3,7".
pub fn parse_indices(v: &str) -> Result<Vec<usize>> {
    let out: Vec<usize> =
        v.split(',').map(|p| parse_usize("indices", p.trim())).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::validation("index list must name at least one channel"));
    }
    Ok(out)
}

impl RunConfig {
    /// Applies one config-file body on top of the current values.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::validation(format!("config line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::validation(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "window.size" => self.window_size = parse_usize(key, v)?,
            "window.weighting" => {
                self.window_weighting = match v {
                    "gaussian" => Weighting::Gaussian,
                    "uniform" => Weighting::Uniform,
                    other => {
                        return Err(Error::validation(format!(
                            "{key}: unknown weighting {other:?} (gaussian | uniform)"
                        )))
                    }
                }
            }
            "window.sigma" => self.window_sigma = parse_f64(key, v)?,
            "ssim.k1" => self.ssim_k1 = parse_f64(key, v)?,
            "ssim.k2" => self.ssim_k2 = parse_f64(key, v)?,
            "ssim.data_range" => self.ssim_data_range = parse_f64(key, v)?,
            "ssim.c3" => {
                self.ssim_c3 = if v == "half_c2" {
                    C3Mode::HalfC2
                } else {
                    C3Mode::Value(parse_f64(key, v)?)
                }
            }
            "linkage" => self.linkage = Linkage::parse(v)?,
            "cluster.k" => {
                self.cluster_k = if v == "silhouette" {
                    ClusterCountMode::Silhouette
                } else {
                    ClusterCountMode::Fixed(parse_usize(key, v)?)
                }
            }
            "experiment.fractions" => self.fractions = parse_fractions(v)?,
            "experiment.seeds" => self.seeds = parse_seeds(v)?,
            "experiment.holdout" => self.holdout = parse_f64(key, v)?,
            "predictor.radius" => self.radius = parse_usize(key, v)?,
            "predictor.stride" => self.stride = parse_usize(key, v)?,
            "predictor.epochs" => self.epochs = parse_usize(key, v)?,
            "predictor.lr" => self.learning_rate = parse_f64(key, v)?,
            "predictor.batch" => self.batch_size = parse_usize(key, v)?,
            "predictor.lambda" => self.lambda_l1 = parse_f64(key, v)?,
            "predictor.d_steps" => self.d_steps = parse_usize(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            other => return Err(Error::validation(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        match self.window_weighting {
            Weighting::Gaussian => WindowSpec::gaussian(self.window_size, self.window_sigma),
            Weighting::Uniform => WindowSpec::uniform(self.window_size),
        }
    }

    pub fn ssim_constants<S: Scalar>(&self) -> Result<SsimConstants<S>> {
        let mut c = SsimConstants::from_k(self.ssim_k1, self.ssim_k2, self.ssim_data_range)?;
        if let C3Mode::Value(v) = self.ssim_c3 {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(format!("ssim.c3 must be finite and positive, got {v}")));
            }
            c.c3 = S::from_f64_lossy(v);
        }
        Ok(c)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            lambda_l1: self.lambda_l1,
            seed,
            d_steps_per_g_step: self.d_steps,
        }
    }

    /// Resolved values in config-file syntax, for the manifest echo.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("window.size", self.window_size.to_string());
        put(
            "window.weighting",
            match self.window_weighting {
                Weighting::Gaussian => "gaussian".into(),
                Weighting::Uniform => "uniform".into(),
            },
        );
        put("window.sigma", self.window_sigma.to_string());
        put("ssim.k1", self.ssim_k1.to_string());
        put("ssim.k2", self.ssim_k2.to_string());
        put("ssim.data_range", self.ssim_data_range.to_string());
        put(
            "ssim.c3",
            match self.ssim_c3 {
                C3Mode::HalfC2 => "half_c2".into(),
                C3Mode::Value(v) => v.to_string(),
            },
        );
        put("linkage", self.linkage.label().to_string());
        put(
            "cluster.k",
            match self.cluster_k {
                ClusterCountMode::Silhouette => "silhouette".into(),
                ClusterCountMode::Fixed(k) => k.to_string(),
            },
        );
        put(
            "experiment.fractions",
            self.fractions.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        put(
            "experiment.seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        put("experiment.holdout", self.holdout.to_string());
        put("predictor.radius", self.radius.to_string());
        put("predictor.stride", self.stride.to_string());
        put("predictor.epochs", self.epochs.to_string());
        put("predictor.lr", self.learning_rate.to_string());
        put("predictor.batch", self.batch_size.to_string());
        put("predictor.lambda", self.lambda_l1.to_string());
        put("predictor.d_steps", self.d_steps.to_string());
        m
    }
}
