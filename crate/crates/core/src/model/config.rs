use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::PreprocessConfig;
use crate::error::{Result, SrbError};

/// Log-normal hierarchy for one positive transition shape parameter.
///
/// Region values satisfy `ln x ~ N(mu, tau^2)`, with `mu ~ N(ln median, median_sd^2)`
/// and `ln tau ~ N(ln spread, spread_sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeHyperprior {
    pub median: f64,
    pub median_sd: f64,
    pub spread: f64,
    pub spread_sd: f64,
}

impl ShapeHyperprior {
    pub const fn new(median: f64) -> Self {
        ShapeHyperprior {
            median,
            median_sd: 0.3,
            spread: 0.3,
            spread_sd: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeHyperpriors {
    pub lambda1: ShapeHyperprior,
    pub lambda2: ShapeHyperprior,
    pub lambda3: ShapeHyperprior,
    pub xi: ShapeHyperprior,
}

impl Default for ShapeHyperpriors {
    fn default() -> Self {
        ShapeHyperpriors {
            lambda1: ShapeHyperprior::new(12.0),
            lambda2: ShapeHyperprior::new(6.0),
            lambda3: ShapeHyperprior::new(12.0),
            xi: ShapeHyperprior::new(0.06),
        }
    }
}

impl ShapeHyperpriors {
    /// In the order lambda1, lambda2, lambda3, xi.
    pub fn as_array(&self) -> [ShapeHyperprior; 4] {
        [self.lambda1, self.lambda2, self.lambda3, self.xi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn len(&self) -> usize {
        (self.end - self.start + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        (self.start..=self.end)
            .contains(&year)
            .then(|| (year - self.start) as usize)
    }
}

/// Fixed constants and prior hyperparameters of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub baseline_b: f64,
    pub ar1_rho: f64,
    pub ar1_sd: f64,
    pub inflation_prior_a: f64,
    pub inflation_prior_b: f64,
    pub start_year_scale: f64,
    pub onset_reference_tfr: f64,
    pub shape_hyperpriors: ShapeHyperpriors,
    pub year_range: YearRange,
    pub projection_end: i32,
    pub preprocess: PreprocessConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            baseline_b: 1.049,
            ar1_rho: 0.9,
            ar1_sd: 0.0041,
            inflation_prior_a: 1.0,
            inflation_prior_b: 1.0,
            start_year_scale: 8.0,
            onset_reference_tfr: 3.5,
            shape_hyperpriors: ShapeHyperpriors::default(),
            year_range: YearRange {
                start: 1980,
                end: 2016,
            },
            projection_end: 2050,
            preprocess: PreprocessConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("baseline_b", self.baseline_b),
            ("inflation_prior_a", self.inflation_prior_a),
            ("inflation_prior_b", self.inflation_prior_b),
            ("start_year_scale", self.start_year_scale),
            ("onset_reference_tfr", self.onset_reference_tfr),
            ("preprocess.cv_threshold", self.preprocess.cv_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SrbError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        // ar1_sd = 0 is allowed: it turns the fluctuation into a deterministic decay.
        if !(self.ar1_sd >= 0.0 && self.ar1_sd.is_finite()) {
            return Err(SrbError::Config(format!(
                "ar1_sd must be nonnegative, got {}",
                self.ar1_sd
            )));
        }
        if !(self.ar1_rho > 0.0 && self.ar1_rho < 1.0) {
            return Err(SrbError::Config(format!(
                "ar1_rho must lie in (0, 1), got {}",
                self.ar1_rho
            )));
        }
        for (name, h) in ["lambda1", "lambda2", "lambda3", "xi"]
            .iter()
            .zip(self.shape_hyperpriors.as_array())
        {
            if ![h.median, h.median_sd, h.spread, h.spread_sd]
                .iter()
                .all(|v| *v > 0.0 && v.is_finite())
            {
                return Err(SrbError::Config(format!(
                    "shape_hyperpriors.{name}: all entries must be positive"
                )));
            }
        }
        if !(self.year_range.start < self.year_range.end
            && self.year_range.end < self.projection_end)
        {
            return Err(SrbError::Config(format!(
                "need year_range.start < year_range.end < projection_end, got {} < {} < {}",
                self.year_range.start, self.year_range.end, self.projection_end
            )));
        }
        if self.preprocess.max_recall_years <= 0 {
            return Err(SrbError::Config(
                "preprocess.max_recall_years must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Stationary standard deviation of the log-scale fluctuation.
    pub fn stationary_sd(&self) -> f64 {
        self.ar1_sd / (1.0 - self.ar1_rho * self.ar1_rho).sqrt()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| SrbError::json("model config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SrbError::io(path, e))?;
        Self::from_json(&text)
    }
}
