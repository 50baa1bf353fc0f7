//! Observation construction: birth records to region-period sex ratios with sampling errors.

pub mod aggregate;
pub mod jackknife;
pub mod merge;
pub mod observations;
pub mod records;
pub mod tfr;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrbError};
pub use aggregate::{aggregate_yearly, ClusterKey, SexTotals, YearTotals};
pub use jackknife::{jackknife_log_se, JackknifeEstimate};
pub use merge::{merge_by_cv, ratio_cv, MergeOutcome, MergedPeriod};
pub use observations::{read_observations, write_observations, SrbObservation};
pub use records::{apply_recall_cutoff, parse_birth_records, BirthRecord, Sex};
pub use tfr::{load_tfr, write_tfr, TfrSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub cv_threshold: f64,
    pub max_recall_years: i32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            cv_threshold: 0.05,
            max_recall_years: 25,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PeriodNote {
    pub region_id: String,
    pub source_id: String,
    pub period_start: i32,
    pub period_end: i32,
    pub years_pooled: usize,
    pub cv: f64,
    pub meets_cv_threshold: bool,
    pub continuity_corrections: usize,
    pub se_method: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PreprocessReport {
    pub records_read: usize,
    pub recall_exclusions: usize,
    pub region_years: usize,
    pub observations: usize,
    pub merges: Vec<PeriodNote>,
    pub continuity_corrections: usize,
    pub warnings: Vec<String>,
}

/// Runs recall cutoff, yearly aggregation, CV merging and jackknife errors.
pub fn preprocess(
    records: &[BirthRecord],
    config: &PreprocessConfig,
) -> Result<(Vec<SrbObservation>, PreprocessReport)> {
    if config.max_recall_years <= 0 {
        return Err(SrbError::Config("max_recall_years must be positive".into()));
    }
    if !(config.cv_threshold > 0.0) {
        return Err(SrbError::Config("cv_threshold must be positive".into()));
    }
    if records.is_empty() {
        return Err(SrbError::Invalid("no birth records".into()));
    }

    let mut report = PreprocessReport {
        records_read: records.len(),
        ..Default::default()
    };
    let kept = apply_recall_cutoff(records, config.max_recall_years);
    report.recall_exclusions = records.len() - kept.len();
    if kept.is_empty() {
        return Err(SrbError::Invalid(
            "no birth records left after the recall cutoff".into(),
        ));
    }

    let yearly = aggregate_yearly(&kept);
    report.region_years = yearly.len();
    let mut groups: BTreeMap<(&str, &str), Vec<YearTotals>> = BTreeMap::new();
    for y in &yearly {
        groups
            .entry((y.region_id.as_str(), y.source_id.as_str()))
            .or_default()
            .push(y.clone());
    }

    let mut observations = Vec::new();
    for years in groups.values() {
        let outcome = merge_by_cv(years, config.cv_threshold);
        report.warnings.extend(outcome.warnings);
        for (period, est, method) in attach_errors(outcome.periods, &mut report.warnings) {
            report.continuity_corrections += est.corrections;
            if period.years.len() > 1 || est.corrections > 0 || method != "jackknife" {
                report.merges.push(PeriodNote {
                    region_id: period.region_id.clone(),
                    source_id: period.source_id.clone(),
                    period_start: period.period_start,
                    period_end: period.period_end,
                    years_pooled: period.years.len(),
                    cv: period.cv,
                    meets_cv_threshold: period.meets_threshold,
                    continuity_corrections: est.corrections,
                    se_method: method.to_string(),
                });
            }
            if let Some(obs) = period.to_observation(est.log_se) {
                observations.push(obs);
            }
        }
    }
    report.observations = observations.len();
    Ok((observations, report))
}

/// Computes a sampling error for every period of one region-source.
///
/// A period with fewer than two usable clusters is pooled into its neighbour.
/// When no neighbour is left, or the jackknife degenerates to zero, the
/// delta-method error is used instead.
fn attach_errors(
    mut periods: Vec<MergedPeriod>,
    warnings: &mut Vec<String>,
) -> Vec<(MergedPeriod, JackknifeEstimate, &'static str)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < periods.len() {
        match jackknife_log_se(&periods[i].cluster_totals()) {
            Err(SrbError::TooFewClusters { .. }) if periods.len() > 1 => {
                let p = periods.remove(i);
                let target = if i < periods.len() { i } else { i - 1 };
                periods[target].extend_with(&p);
                if target < i {
                    // the previous period was already finalized; redo it
                    out.pop();
                    i -= 1;
                }
                warnings.push(format!(
                    "region {} source {}: {}-{} has too few clusters; pooled with a neighbouring period",
                    p.region_id, p.source_id, p.period_start, p.period_end
                ));
            }
            result => {
                let p = periods[i].clone();
                let (est, method) = match result {
                    Ok(est) if est.log_se > 0.0 => (est, "jackknife"),
                    other => {
                        let corrections = other.as_ref().map(|e| e.corrections).unwrap_or(0);
                        let se = p.ratio().map_or(f64::NAN, |r| ratio_cv(r, p.n_births));
                        warnings.push(format!(
                            "region {} source {}: {}-{} jackknife unavailable; using delta-method error",
                            p.region_id, p.source_id, p.period_start, p.period_end
                        ));
                        (
                            JackknifeEstimate {
                                log_se: se,
                                corrections,
                            },
                            "delta-method",
                        )
                    }
                };
                if est.corrections > 0 {
                    warnings.push(format!(
                        "region {} source {}: {}-{} used {} continuity correction(s)",
                        p.region_id, p.source_id, p.period_start, p.period_end, est.corrections
                    ));
                }
                out.push((p, est, method));
                i += 1;
            }
        }
    }
    out
}
