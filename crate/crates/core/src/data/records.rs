use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrbError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
}

impl Sex {
    pub fn code(self) -> &'static str {
        match self {
            Sex::Male => "M",
            Sex::Female => "F",
        }
    }
}

/// One sampled birth, already carrying its design weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthRecord {
    pub region_id: String,
    pub year: i32,
    pub cluster_id: String,
    pub stratum_id: String,
    pub weight: f64,
    pub sex: Sex,
    pub source_id: String,
    pub survey_year: i32,
}

pub const BIRTHS_HEADER: [&str; 8] = [
    "region_id",
    "year",
    "cluster_id",
    "stratum_id",
    "weight",
    "sex",
    "source_id",
    "survey_year",
];

pub fn parse_birth_records(path: &Path) -> Result<Vec<BirthRecord>> {
    let file = std::fs::File::open(path).map_err(|e| SrbError::io(path, e))?;
    read_birth_records(file, &path.display().to_string())
}

/// Reads the births CSV from any reader; `name` labels diagnostics.
pub fn read_birth_records<R: Read>(reader: R, name: &str) -> Result<Vec<BirthRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let cols = column_indices(&mut rdr, name, &BIRTHS_HEADER)?;

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(name, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(cols[i]).unwrap_or("");
        let row_err = |message: String| SrbError::Row {
            path: name.to_string(),
            line,
            message,
        };

        let year: i32 = field(1)
            .parse()
            .map_err(|_| row_err(format!("invalid year `{}`", field(1))))?;
        let weight: f64 = field(4)
            .parse()
            .map_err(|_| row_err(format!("invalid weight `{}`", field(4))))?;
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(row_err(format!(
                "weight must be positive, got {}",
                field(4)
            )));
        }
        let sex = match field(5) {
            "M" => Sex::Male,
            "F" => Sex::Female,
            other => {
                return Err(row_err(format!(
                    "unknown sex code `{other}` (expected M or F)"
                )))
            }
        };
        let survey_year: i32 = field(7)
            .parse()
            .map_err(|_| row_err(format!("invalid survey_year `{}`", field(7))))?;
        if year > survey_year {
            return Err(row_err(format!(
                "birth year {year} is after survey year {survey_year}"
            )));
        }
        let region_id = field(0);
        if region_id.is_empty() {
            return Err(row_err("empty region_id".into()));
        }

        out.push(BirthRecord {
            region_id: region_id.to_string(),
            year,
            cluster_id: field(2).to_string(),
            stratum_id: field(3).to_string(),
            weight,
            sex,
            source_id: field(6).to_string(),
            survey_year,
        });
    }
    Ok(out)
}

pub fn write_birth_records(path: &Path, records: &[BirthRecord]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| csv_error(&path.display().to_string(), e))?;
    let name = path.display().to_string();
    w.write_record(BIRTHS_HEADER)
        .map_err(|e| csv_error(&name, e))?;
    for r in records {
        w.write_record([
            r.region_id.clone(),
            r.year.to_string(),
            r.cluster_id.clone(),
            r.stratum_id.clone(),
            r.weight.to_string(),
            r.sex.code().to_string(),
            r.source_id.clone(),
            r.survey_year.to_string(),
        ])
        .map_err(|e| csv_error(&name, e))?;
    }
    w.flush().map_err(|e| SrbError::io(path, e))
}

/// Keeps records whose recall gap (survey year minus birth year) is within the cutoff.
pub fn apply_recall_cutoff(records: &[BirthRecord], max_recall_years: i32) -> Vec<BirthRecord> {
    records
        .iter()
        .filter(|r| r.survey_year - r.year <= max_recall_years)
        .cloned()
        .collect()
}

pub(crate) fn column_indices<R: Read>(
    rdr: &mut csv::Reader<R>,
    name: &str,
    required: &[&str],
) -> Result<Vec<usize>> {
    let headers = rdr.headers().map_err(|e| csv_error(name, e))?.clone();
    required
        .iter()
        .map(|col| {
            headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}') == *col)
                .ok_or_else(|| SrbError::MissingColumn {
                    path: name.to_string(),
                    column: col.to_string(),
                })
        })
        .collect()
}

pub(crate) fn csv_error(name: &str, e: csv::Error) -> SrbError {
    SrbError::Csv {
        path: name.to_string(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "region_id,year,cluster_id,stratum_id,weight,sex,source_id,survey_year\n";

    fn rec(year: i32, survey_year: i32) -> BirthRecord {
        BirthRecord {
            region_id: "P1".into(),
            year,
            cluster_id: "c".into(),
            stratum_id: "s".into(),
            weight: 1.0,
            sex: Sex::Male,
            source_id: "S".into(),
            survey_year,
        }
    }

    #[test]
    fn empty_file_gives_no_records() {
        let out = read_birth_records(HEADER.as_bytes(), "births.csv").unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn single_row_maps_fields() {
        let text = format!("{HEADER}P5,2010,c01,s1,1.0,M,NDHS2011,2011\n");
        let out = read_birth_records(text.as_bytes(), "births.csv").unwrap();
        assert_eq!(
            out,
            vec![BirthRecord {
                region_id: "P5".into(),
                year: 2010,
                cluster_id: "c01".into(),
                stratum_id: "s1".into(),
                weight: 1.0,
                sex: Sex::Male,
                source_id: "NDHS2011".into(),
                survey_year: 2011,
            }]
        );
    }

    #[test]
    fn negative_weight_names_line_two() {
        let text = format!("{HEADER}P5,2010,c01,s1,-1,M,NDHS2011,2011\n");
        let err = read_birth_records(text.as_bytes(), "births.csv").unwrap_err();
        match err {
            SrbError::Row { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err_string(text.as_str()).contains("line 2"));
    }

    fn err_string(text: &str) -> String {
        read_birth_records(text.as_bytes(), "births.csv")
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn unknown_sex_and_missing_column_are_rejected() {
        let text = format!("{HEADER}P5,2010,c01,s1,1.0,X,NDHS2011,2011\n");
        assert!(err_string(&text).contains("unknown sex code"));

        let text = "region_id,year,cluster_id,weight,sex,source_id,survey_year\n";
        let err = read_birth_records(text.as_bytes(), "b.csv").unwrap_err();
        assert!(
            matches!(err, SrbError::MissingColumn { ref column, .. } if column == "stratum_id")
        );
    }

    #[test]
    fn recall_cutoff_rule() {
        let records = vec![rec(1985, 2011), rec(2011, 2011), rec(1986, 2011)];
        let kept = apply_recall_cutoff(&records, 25);
        let years: Vec<i32> = kept.iter().map(|r| r.year).collect();
        assert_eq!(years, vec![2011, 1986]);
        assert!(apply_recall_cutoff(&[], 25).is_empty());
        assert_eq!(apply_recall_cutoff(&kept, 25), kept);
    }
}
