use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{column_indices, csv_error};
use crate::error::{Result, SrbError};

/// Observed sex ratio for one region-period, with the standard error of its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrbObservation {
    pub region_id: String,
    pub period_start: i32,
    pub period_end: i32,
    pub ratio: f64,
    pub log_se: f64,
    pub n_births: u64,
    pub source_id: String,
    pub reference_year: f64,
}

pub const OBSERVATIONS_HEADER: [&str; 8] = [
    "region_id",
    "period_start",
    "period_end",
    "ratio",
    "log_se",
    "n_births",
    "source_id",
    "reference_year",
];

impl SrbObservation {
    pub fn new(
        region_id: &str,
        period_start: i32,
        period_end: i32,
        ratio: f64,
        log_se: f64,
        n_births: u64,
        source_id: &str,
    ) -> Self {
        SrbObservation {
            region_id: region_id.to_string(),
            period_start,
            period_end,
            ratio,
            log_se,
            n_births,
            source_id: source_id.to_string(),
            reference_year: midpoint(period_start, period_end),
        }
    }

    pub fn log_ratio(&self) -> f64 {
        self.ratio.ln()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.period_start > self.period_end {
            return Err(format!(
                "period_start {} after period_end {}",
                self.period_start, self.period_end
            ));
        }
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(format!("ratio must be positive, got {}", self.ratio));
        }
        if !(self.log_se > 0.0 && self.log_se.is_finite()) {
            return Err(format!("log_se must be positive, got {}", self.log_se));
        }
        if self.n_births == 0 {
            return Err("n_births must be positive".into());
        }
        Ok(())
    }
}

pub fn midpoint(start: i32, end: i32) -> f64 {
    (start as f64 + end as f64) / 2.0
}

pub fn read_observations(path: &Path) -> Result<Vec<SrbObservation>> {
    let file = std::fs::File::open(path).map_err(|e| SrbError::io(path, e))?;
    read_observations_from(file, &path.display().to_string())
}

pub fn read_observations_from<R: Read>(reader: R, name: &str) -> Result<Vec<SrbObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let cols = column_indices(&mut rdr, name, &OBSERVATIONS_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(name, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| SrbError::Row {
            path: name.to_string(),
            line,
            message,
        };
        let field = |i: usize| row.get(cols[i]).unwrap_or("");
        fn num<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("invalid {what} `{s}`"))
        }
        let parsed = (|| -> std::result::Result<SrbObservation, String> {
            let obs = SrbObservation {
                region_id: field(0).to_string(),
                period_start: num(field(1), "period_start")?,
                period_end: num(field(2), "period_end")?,
                ratio: num(field(3), "ratio")?,
                log_se: num(field(4), "log_se")?,
                n_births: num(field(5), "n_births")?,
                source_id: field(6).to_string(),
                reference_year: num(field(7), "reference_year")?,
            };
            obs.validate()?;
            Ok(obs)
        })();
        out.push(parsed.map_err(row_err)?);
    }
    Ok(out)
}

pub fn write_observations(path: &Path, observations: &[SrbObservation]) -> Result<()> {
    let mut buf = Vec::new();
    write_observations_to(&mut buf, observations)?;
    std::fs::write(path, buf).map_err(|e| SrbError::io(path, e))
}

pub fn write_observations_to<W: Write>(writer: W, observations: &[SrbObservation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| csv_error("observations", e);
    w.write_record(OBSERVATIONS_HEADER).map_err(err)?;
    for o in observations {
        w.write_record([
            o.region_id.clone(),
            o.period_start.to_string(),
            o.period_end.to_string(),
            o.ratio.to_string(),
            o.log_se.to_string(),
            o.n_births.to_string(),
            o.source_id.clone(),
            o.reference_year.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| SrbError::io("observations", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_year_is_midpoint() {
        let o = SrbObservation::new("P1", 2000, 2003, 1.05, 0.02, 100, "S");
        assert_eq!(o.reference_year, 2001.5);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let obs = vec![
            SrbObservation::new(
                "P1",
                2000,
                2003,
                1.0512345678901234,
                0.0213,
                1234,
                "NDHS2006",
            ),
            SrbObservation::new("P2", 2010, 2010, 1.1, 1e-3, 5, "CENSUS2011"),
        ];
        let mut buf = Vec::new();
        write_observations_to(&mut buf, &obs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "region_id,period_start,period_end,ratio,log_se,n_births,source_id,reference_year\n"
        ));
        let back = read_observations_from(buf.as_slice(), "obs.csv").unwrap();
        assert_eq!(back, obs);
    }

    #[test]
    fn rejects_nonpositive_se() {
        let text = "region_id,period_start,period_end,ratio,log_se,n_births,source_id,reference_year\nP1,2000,2000,1.05,0,10,S,2000\n";
        let err = read_observations_from(text.as_bytes(), "obs.csv").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
