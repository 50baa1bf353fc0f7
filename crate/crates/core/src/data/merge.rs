use std::collections::BTreeMap;

use serde::Serialize;

use super::aggregate::{ClusterKey, SexTotals, YearTotals};
use super::observations::SrbObservation;

/// Approximate coefficient of variation of a pooled sex ratio `r` from `n` births.
///
/// Equals the delta-method standard error of `log r`.
pub fn ratio_cv(ratio: f64, n_births: u64) -> f64 {
    let n = n_births as f64;
    if !(ratio > 0.0) || n_births == 0 || !ratio.is_finite() {
        return f64::INFINITY;
    }
    ((1.0 + ratio).powi(2) / (n * ratio)).sqrt()
}

/// A run of adjacent years pooled into one observation period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergedPeriod {
    pub region_id: String,
    pub source_id: String,
    pub period_start: i32,
    pub period_end: i32,
    pub years: Vec<i32>,
    pub weighted: SexTotals,
    pub n_births: u64,
    pub cv: f64,
    pub meets_threshold: bool,
    #[serde(skip)]
    pub clusters: BTreeMap<ClusterKey, SexTotals>,
}

impl MergedPeriod {
    fn start(y: &YearTotals) -> Self {
        MergedPeriod {
            region_id: y.region_id.clone(),
            source_id: y.source_id.clone(),
            period_start: y.year,
            period_end: y.year,
            years: Vec::new(),
            weighted: SexTotals::default(),
            n_births: 0,
            cv: f64::INFINITY,
            meets_threshold: false,
            clusters: BTreeMap::new(),
        }
    }

    fn absorb(&mut self, y: &YearTotals) {
        self.period_end = y.year;
        self.years.push(y.year);
        self.weighted.add(y.weighted);
        self.n_births += y.n_births();
        for (k, v) in &y.clusters {
            self.clusters.entry(k.clone()).or_default().add(*v);
        }
        self.cv = self
            .weighted
            .ratio()
            .map_or(f64::INFINITY, |r| ratio_cv(r, self.n_births));
    }

    /// Pooled weighted ratio; `None` with no female births.
    pub fn ratio(&self) -> Option<f64> {
        self.weighted.ratio()
    }

    pub fn cluster_totals(&self) -> Vec<SexTotals> {
        self.clusters.values().copied().collect()
    }

    /// Absorbs a whole neighbouring period (used when a period has too few clusters).
    pub fn extend_with(&mut self, other: &MergedPeriod) {
        self.period_start = self.period_start.min(other.period_start);
        self.period_end = self.period_end.max(other.period_end);
        self.years.extend(&other.years);
        self.years.sort_unstable();
        self.weighted.add(other.weighted);
        self.n_births += other.n_births;
        for (k, v) in &other.clusters {
            self.clusters.entry(k.clone()).or_default().add(*v);
        }
        self.cv = self
            .weighted
            .ratio()
            .map_or(f64::INFINITY, |r| ratio_cv(r, self.n_births));
    }

    pub fn to_observation(&self, log_se: f64) -> Option<SrbObservation> {
        let ratio = self.ratio().filter(|r| *r > 0.0)?;
        Some(SrbObservation::new(
            &self.region_id,
            self.period_start,
            self.period_end,
            ratio,
            log_se,
            self.n_births,
            &self.source_id,
        ))
    }
}

#[derive(Debug, Clone, Default)]
pub struct MergeOutcome {
    pub periods: Vec<MergedPeriod>,
    pub warnings: Vec<String>,
}

/// Pools the yearly totals of one region-source into periods whose CV is at most `cv_threshold`.
///
/// Sweeps oldest to newest and extends the current period one year at a time.
/// A trailing period that never reaches the threshold is still emitted.
pub fn merge_by_cv(years: &[YearTotals], cv_threshold: f64) -> MergeOutcome {
    debug_assert!(years.windows(2).all(|w| w[0].year < w[1].year));
    let mut out = MergeOutcome::default();
    let mut current: Option<MergedPeriod> = None;

    for y in years {
        let period = current.get_or_insert_with(|| MergedPeriod::start(y));
        period.absorb(y);
        if period.cv <= cv_threshold {
            let mut done = current.take().unwrap();
            done.meets_threshold = true;
            out.periods.push(done);
        }
    }

    if let Some(trailing) = current {
        match trailing.ratio() {
            Some(r) if r > 0.0 => out.periods.push(trailing),
            _ => out.warnings.push(format!(
                "region {} source {}: no usable ratio for {}-{} (zero pooled births of one sex); no observation emitted",
                trailing.region_id, trailing.source_id, trailing.period_start, trailing.period_end
            )),
        }
    }
    out
}
