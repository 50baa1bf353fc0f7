//! Recency-based holdout of observations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::SrbObservation;
use crate::error::{Result, SrbError};

pub const MIN_OBSERVATIONS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutEntry {
    pub region_id: String,
    pub source_id: String,
    pub period_start: i32,
    pub period_end: i32,
    pub collection_year: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub training: Vec<SrbObservation>,
    pub held_out: Vec<SrbObservation>,
}

impl Split {
    pub fn manifest(&self) -> Vec<HeldOutEntry> {
        let years = collection_years(self.training.iter().chain(&self.held_out));
        self.held_out
            .iter()
            .map(|o| HeldOutEntry {
                region_id: o.region_id.clone(),
                source_id: o.source_id.clone(),
                period_start: o.period_start,
                period_end: o.period_end,
                collection_year: years[o.source_id.as_str()],
            })
            .collect()
    }
}

/// Collection year of each source: the last year any of its periods covers.
pub fn collection_years<'a>(
    observations: impl IntoIterator<Item = &'a SrbObservation>,
) -> HashMap<&'a str, i32> {
    let mut out: HashMap<&str, i32> = HashMap::new();
    for o in observations {
        let e = out.entry(o.source_id.as_str()).or_insert(o.period_end);
        *e = (*e).max(o.period_end);
    }
    out
}

/// Number held out: `n * fraction` rounded to nearest, kept within `[1, n - 1]`.
pub fn holdout_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Holds out the most recently collected observations.
///
/// Observations are ordered by source collection year, then reference year;
/// among equal keys the input order is kept and the later ones are held out.
pub fn split_out_of_sample(
    observations: &[SrbObservation],
    holdout_fraction: f64,
) -> Result<Split> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(SrbError::Config(
            "holdout fraction must lie strictly between 0 and 1".into(),
        ));
    }
    if observations.len() < MIN_OBSERVATIONS {
        return Err(SrbError::Invalid(format!(
            "{} observation(s); at least {MIN_OBSERVATIONS} are needed for an out-of-sample split",
            observations.len()
        )));
    }
    let years = collection_years(observations);
    let mut order: Vec<&SrbObservation> = observations.iter().collect();
    order.sort_by(|a, b| {
        years[a.source_id.as_str()]
            .cmp(&years[b.source_id.as_str()])
            .then(a.reference_year.total_cmp(&b.reference_year))
    });
    let k = holdout_count(order.len(), holdout_fraction);
    let cut = order.len() - k;
    Ok(Split {
        training: order[..cut].iter().map(|o| (*o).clone()).collect(),
        held_out: order[cut..].iter().map(|o| (*o).clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(source: &str, start: i32, end: i32) -> SrbObservation {
        SrbObservation::new("R", start, end, 1.05, 0.02, 1000, source)
    }

    #[test]
    fn counts() {
        assert_eq!(holdout_count(10, 0.2), 2);
        assert_eq!(holdout_count(91, 0.2), 18);
        assert_eq!(holdout_count(5, 0.01), 1);
        assert_eq!(holdout_count(5, 0.99), 4);
    }

    #[test]
    fn most_recent_held_out() {
        let o: Vec<_> = (0..10)
            .map(|i| obs(&format!("S{i}"), 2000 + i, 2000 + i))
            .rev()
            .collect();
        let s = split_out_of_sample(&o, 0.2).unwrap();
        assert_eq!(s.held_out.len(), 2);
        assert_eq!(s.training.len(), 8);
        let ends: Vec<i32> = s.held_out.iter().map(|o| o.period_end).collect();
        assert_eq!(ends, vec![2008, 2009]);
    }

    #[test]
    fn collection_year_before_reference_year() {
        // the 2016 survey covers old years but was collected last
        let o = vec![
            obs("A", 2010, 2012),
            obs("A", 2013, 2014),
            obs("B", 2000, 2002),
            obs("B", 2003, 2016),
            obs("A", 2007, 2009),
        ];
        let s = split_out_of_sample(&o, 0.4).unwrap();
        assert!(s.held_out.iter().all(|o| o.source_id == "B"));
        assert_eq!(s.manifest()[0].collection_year, 2016);
    }

    #[test]
    fn single_source_uses_reference_year_then_input_order() {
        let mut o: Vec<_> = (0..6).map(|i| obs("S", 2000 + i, 2000 + i)).collect();
        o.push(obs("S", 2005, 2005));
        let s = split_out_of_sample(&o, 0.3).unwrap();
        assert_eq!(s.held_out.len(), 2);
        assert_eq!(s.held_out[0].period_end, 2005);
        assert_eq!(s.held_out[1].period_end, 2005);
        assert_eq!(s.training.last().unwrap().period_end, 2004);
    }

    #[test]
    fn too_few() {
        let o: Vec<_> = (0..4).map(|i| obs("S", 2000 + i, 2000 + i)).collect();
        assert!(split_out_of_sample(&o, 0.2).is_err());
        let o: Vec<_> = (0..5).map(|i| obs("S", 2000 + i, 2000 + i)).collect();
        assert!(split_out_of_sample(&o, 0.0).is_err());
        assert!(split_out_of_sample(&o, 1.0).is_err());
    }
}
