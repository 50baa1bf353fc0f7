use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::{BirthRecord, Sex};

/// Weighted male/female totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SexTotals {
    pub male: f64,
    pub female: f64,
}

impl SexTotals {
    pub fn new(male: f64, female: f64) -> Self {
        Self { male, female }
    }

    pub fn add(&mut self, other: SexTotals) {
        self.male += other.male;
        self.female += other.female;
    }

    pub fn ratio(&self) -> Option<f64> {
        (self.female > 0.0).then(|| self.male / self.female)
    }
}

/// Primary sampling unit, identified within its stratum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterKey {
    pub stratum_id: String,
    pub cluster_id: String,
}

/// Totals for one region, source and calendar year.
#[derive(Debug, Clone, PartialEq)]
pub struct YearTotals {
    pub region_id: String,
    pub source_id: String,
    pub year: i32,
    pub weighted: SexTotals,
    pub n_male: u64,
    pub n_female: u64,
    pub clusters: BTreeMap<ClusterKey, SexTotals>,
}

impl YearTotals {
    pub fn n_births(&self) -> u64 {
        self.n_male + self.n_female
    }

    /// `None` when the year has no female births.
    pub fn ratio(&self) -> Option<f64> {
        self.weighted.ratio()
    }
}

/// Groups records by (region, source, year), sorted in that order.
pub fn aggregate_yearly(records: &[BirthRecord]) -> Vec<YearTotals> {
    let mut groups: BTreeMap<(&str, &str, i32), YearTotals> = BTreeMap::new();
    for r in records {
        let entry = groups
            .entry((r.region_id.as_str(), r.source_id.as_str(), r.year))
            .or_insert_with(|| YearTotals {
                region_id: r.region_id.clone(),
                source_id: r.source_id.clone(),
                year: r.year,
                weighted: SexTotals::default(),
                n_male: 0,
                n_female: 0,
                clusters: BTreeMap::new(),
            });
        let contribution = match r.sex {
            Sex::Male => {
                entry.n_male += 1;
                SexTotals::new(r.weight, 0.0)
            }
            Sex::Female => {
                entry.n_female += 1;
                SexTotals::new(0.0, r.weight)
            }
        };
        entry.weighted.add(contribution);
        entry
            .clusters
            .entry(ClusterKey {
                stratum_id: r.stratum_id.clone(),
                cluster_id: r.cluster_id.clone(),
            })
            .or_default()
            .add(contribution);
    }
    groups.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn birth(sex: Sex, weight: f64, cluster: &str) -> BirthRecord {
        BirthRecord {
            region_id: "P1".into(),
            year: 2000,
            cluster_id: cluster.into(),
            stratum_id: "s".into(),
            weight,
            sex,
            source_id: "S".into(),
            survey_year: 2001,
        }
    }

    #[test]
    fn unit_weights() {
        let recs = vec![
            birth(Sex::Male, 1.0, "a"),
            birth(Sex::Male, 1.0, "b"),
            birth(Sex::Female, 1.0, "a"),
            birth(Sex::Female, 1.0, "b"),
        ];
        let agg = aggregate_yearly(&recs);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].weighted, SexTotals::new(2.0, 2.0));
        assert_eq!(agg[0].ratio(), Some(1.0));
        assert_eq!(agg[0].clusters.len(), 2);
    }

    #[test]
    fn weights_are_summed() {
        let recs = vec![birth(Sex::Male, 2.0, "a"), birth(Sex::Female, 1.0, "a")];
        let agg = aggregate_yearly(&recs);
        assert_eq!(agg[0].weighted, SexTotals::new(2.0, 1.0));
        assert_eq!((agg[0].n_male, agg[0].n_female), (1, 1));
    }

    #[test]
    fn count_ratio_matches_direct_oracle() {
        let mut recs: Vec<_> = (0..105).map(|_| birth(Sex::Male, 1.0, "a")).collect();
        recs.extend((0..100).map(|_| birth(Sex::Female, 1.0, "a")));
        let agg = aggregate_yearly(&recs);
        assert!((agg[0].ratio().unwrap() - 105.0 / 100.0).abs() < 1e-15);
        assert_eq!(agg[0].n_births(), 205);
    }

    #[test]
    fn zero_female_year_has_no_ratio() {
        let agg = aggregate_yearly(&[birth(Sex::Male, 1.0, "a")]);
        assert_eq!(agg[0].ratio(), None);
    }
}
