use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{column_indices, csv_error};
use crate::error::{Result, SrbError};

/// Total fertility rate of one region over a contiguous run of calendar years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfrSeries {
    pub region_id: String,
    pub first_year: i32,
    pub values: Vec<f64>,
}

impl TfrSeries {
    pub fn new(region_id: &str, first_year: i32, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SrbError::TfrInvalid {
                region: region_id.into(),
                message: "empty series".into(),
            });
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(SrbError::TfrInvalid {
                region: region_id.into(),
                message: format!("tfr must be positive, got {v} in {}", first_year + i as i32),
            });
        }
        Ok(TfrSeries {
            region_id: region_id.to_string(),
            first_year,
            values,
        })
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.values.len() as i32 - 1
    }

    pub fn tfr_at(&self, year: i32) -> Option<f64> {
        let i = year.checked_sub(self.first_year)?;
        usize::try_from(i)
            .ok()
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn covers(&self, start: i32, end: i32) -> bool {
        self.first_year <= start && self.last_year() >= end
    }

    pub fn years(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.first_year + i as i32, *v))
    }
}

pub fn find_series<'a>(series: &'a [TfrSeries], region_id: &str) -> Option<&'a TfrSeries> {
    series.iter().find(|s| s.region_id == region_id)
}

pub fn load_tfr(path: &Path) -> Result<Vec<TfrSeries>> {
    let file = std::fs::File::open(path).map_err(|e| SrbError::io(path, e))?;
    read_tfr(file, &path.display().to_string())
}

/// Parses the TFR CSV into one series per region, sorted by region id.
pub fn read_tfr<R: Read>(reader: R, name: &str) -> Result<Vec<TfrSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let cols = column_indices(&mut rdr, name, &["region_id", "year", "tfr"])?;
    let mut by_region: BTreeMap<String, BTreeMap<i32, f64>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(name, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| SrbError::Row {
            path: name.to_string(),
            line,
            message,
        };
        let region = row.get(cols[0]).unwrap_or("").to_string();
        let year_s = row.get(cols[1]).unwrap_or("");
        let tfr_s = row.get(cols[2]).unwrap_or("");
        let year: i32 = year_s
            .parse()
            .map_err(|_| row_err(format!("invalid year `{year_s}`")))?;
        let tfr: f64 = tfr_s
            .parse()
            .map_err(|_| row_err(format!("invalid tfr `{tfr_s}`")))?;
        if !(tfr > 0.0 && tfr.is_finite()) {
            return Err(row_err(format!("tfr must be positive, got {tfr_s}")));
        }
        if by_region
            .entry(region.clone())
            .or_default()
            .insert(year, tfr)
            .is_some()
        {
            return Err(row_err(format!(
                "duplicate year {year} for region {region}"
            )));
        }
    }

    by_region
        .into_iter()
        .map(|(region, years)| {
            let first = *years.keys().next().expect("nonempty");
            let mut values = Vec::with_capacity(years.len());
            for (expected, (year, v)) in (first..).zip(&years) {
                if *year != expected {
                    return Err(SrbError::TfrGap {
                        region,
                        year: expected,
                    });
                }
                values.push(*v);
            }
            TfrSeries::new(&region, first, values)
        })
        .collect()
}

pub fn write_tfr<W: Write>(writer: W, series: &[TfrSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e| csv_error("tfr", e);
    w.write_record(["region_id", "year", "tfr"]).map_err(err)?;
    for s in series {
        for (year, v) in s.years() {
            w.write_record([s.region_id.clone(), year.to_string(), v.to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| SrbError::io("tfr", e))
}

/// Checks that every series covers `start..=end`.
pub fn require_coverage(series: &[TfrSeries], start: i32, end: i32) -> Result<()> {
    for s in series {
        if !s.covers(start, end) {
            return Err(SrbError::TfrInvalid {
                region: s.region_id.clone(),
                message: format!(
                    "covers {}-{}, but {start}-{end} is required",
                    s.first_year,
                    s.last_year()
                ),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_for(region: &str, years: impl Iterator<Item = (i32, f64)>) -> String {
        let mut s = String::from("region_id,year,tfr\n");
        for (y, v) in years {
            s.push_str(&format!("{region},{y},{v}\n"));
        }
        s
    }

    #[test]
    fn constant_series() {
        let text = csv_for("P1", (1980..=2050).map(|y| (y, 2.0)));
        let s = read_tfr(text.as_bytes(), "tfr.csv").unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].years().all(|(_, v)| v == 2.0));
        assert_eq!((s[0].first_year, s[0].last_year()), (1980, 2050));
        assert!(require_coverage(&s, 1980, 2050).is_ok());
        assert!(require_coverage(&s, 1976, 2050).is_err());
    }

    #[test]
    fn gap_names_missing_year() {
        let text = csv_for("P1", (1980..=2050).filter(|y| *y != 1995).map(|y| (y, 2.0)));
        match read_tfr(text.as_bytes(), "tfr.csv").unwrap_err() {
            SrbError::TfrGap { year, region } => {
                assert_eq!(year, 1995);
                assert_eq!(region, "P1");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn nonpositive_rejected() {
        let text = "region_id,year,tfr\nP1,1980,0\n";
        assert!(read_tfr(text.as_bytes(), "tfr.csv").is_err());
    }

    #[test]
    fn lookup_by_year() {
        let text = csv_for(
            "P5",
            (1990..=2010).map(|y| (y, 4.4 + 0.1 * (2001 - y) as f64)),
        );
        let s = read_tfr(text.as_bytes(), "tfr.csv").unwrap();
        let p5 = find_series(&s, "P5").unwrap();
        assert!((p5.tfr_at(2001).unwrap() - 4.4).abs() < 1e-12);
        assert_eq!(p5.tfr_at(1989), None);
        assert_eq!(p5.tfr_at(2011), None);
    }

    #[test]
    fn write_read_round_trip() {
        let series = vec![
            TfrSeries::new("A", 2000, vec![4.5, 4.25, 3.9]).unwrap(),
            TfrSeries::new("B", 1999, vec![2.1, 2.0]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_tfr(&mut buf, &series).unwrap();
        assert_eq!(read_tfr(&buf[..], "mem").unwrap(), series);
    }
}
