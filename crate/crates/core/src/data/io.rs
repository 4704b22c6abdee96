//! CSV readers and writers for the exposure, LOD, outcome and covariate tables.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::preprocess::{CovariateRow, OutcomeRecord, RawCovariates, RawExposures, RawOutcomes};
use crate::error::{Error, Result};

pub const BELOW_LOD: &str = "<LOD";
pub const EXPOSURES_FILE: &str = "exposures.csv";
pub const LODS_FILE: &str = "lods.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const COVARIATES_FILE: &str = "covariates.csv";

fn parse_number(s: &str, what: impl Fn() -> String) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::data(format!("{}: cannot parse {s:?} as a number", what())))
}

fn parse_optional(s: &str, what: impl Fn() -> String) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_number(s, what).map(Some)
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

/// `subject_id, <exposure columns...>` with `<LOD` for censored cells.
pub fn read_exposures<R: Read>(r: R, lods: Option<Vec<f64>>) -> Result<RawExposures> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    if header.is_empty() || &header[0] != "subject_id" {
        return Err(Error::data("exposures.csv must start with a subject_id column"));
    }
    let column_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut subject_ids = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::data(format!("exposures.csv row {}: expected {} fields", line + 2, header.len())));
        }
        subject_ids.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, cell)| {
                if cell == BELOW_LOD {
                    Ok(None)
                } else {
                    parse_number(cell, || format!("exposures.csv row {}, column {}", line + 2, column_names[j])).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    Ok(RawExposures { subject_ids, column_names, values, lods })
}

/// `exposure, lod`; returns LODs in the order of `columns`.
pub fn read_lods<R: Read>(r: R, columns: &[String]) -> Result<Vec<f64>> {
    let mut rdr = reader(r);
    let mut found: Vec<Option<f64>> = vec![None; columns.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::data(format!("lods.csv row {}: expected exposure,lod", line + 2)));
        }
        let j = columns
            .iter()
            .position(|c| c == &rec[0])
            .ok_or_else(|| Error::data(format!("lods.csv names unknown exposure {}", &rec[0])))?;
        found[j] = Some(parse_number(&rec[1], || format!("lods.csv row {}", line + 2))?);
    }
    found
        .into_iter()
        .zip(columns)
        .map(|(v, c)| v.ok_or_else(|| Error::data(format!("lods.csv has no LOD for exposure {c}"))))
        .collect()
}

/// Long format `subject_id, age, outcome_name, value`; empty value is missing.
pub fn read_outcomes<R: Read>(r: R) -> Result<RawOutcomes> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    let expected = ["subject_id", "age", "outcome_name", "value"];
    if header.len() != 4 || header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::data("outcomes.csv must have columns subject_id,age,outcome_name,value"));
    }
    let mut records = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let at = || format!("outcomes.csv row {}", line + 2);
        records.push(OutcomeRecord {
            subject_id: rec[0].to_string(),
            age: parse_number(&rec[1], at)?,
            outcome: rec[2].to_string(),
            value: parse_optional(&rec[3], at)?,
        });
    }
    Ok(RawOutcomes { records })
}

/// `subject_id, age, <covariates...>`; blank age marks a baseline row.
pub fn read_covariates<R: Read>(r: R) -> Result<RawCovariates> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "subject_id" || &header[1] != "age" {
        return Err(Error::data("covariates.csv must start with subject_id,age"));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::data(format!("covariates.csv row {}: expected {} fields", line + 2, header.len())));
        }
        let at = || format!("covariates.csv row {}", line + 2);
        rows.push(CovariateRow {
            subject_id: rec[0].to_string(),
            age: parse_optional(&rec[1], at)?,
            values: rec.iter().skip(2).map(|c| parse_optional(c, at)).collect::<Result<_>>()?,
        });
    }
    Ok(RawCovariates { names, rows })
}

fn fmt_num(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x:?}")
}

pub fn write_exposures<W: Write>(w: W, x: &RawExposures) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["subject_id".to_string()];
    header.extend(x.column_names.iter().cloned());
    wtr.write_record(&header)?;
    for (id, row) in x.subject_ids.iter().zip(&x.values) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.map_or_else(|| BELOW_LOD.to_string(), fmt_num)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_lods<W: Write>(w: W, columns: &[String], lods: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["exposure", "lod"])?;
    for (c, l) in columns.iter().zip(lods) {
        wtr.write_record([c.clone(), fmt_num(*l)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_outcomes<W: Write>(w: W, y: &RawOutcomes) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["subject_id", "age", "outcome_name", "value"])?;
    for r in &y.records {
        wtr.write_record([r.subject_id.clone(), fmt_num(r.age), r.outcome.clone(), r.value.map_or_else(String::new, fmt_num)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_covariates<W: Write>(w: W, z: &RawCovariates) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["subject_id".to_string(), "age".to_string()];
    header.extend(z.names.iter().cloned());
    wtr.write_record(&header)?;
    for r in &z.rows {
        let mut rec = vec![r.subject_id.clone(), r.age.map_or_else(String::new, fmt_num)];
        rec.extend(r.values.iter().map(|v| v.map_or_else(String::new, fmt_num)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Raw tables loaded from a data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub exposures: RawExposures,
    pub outcomes: RawOutcomes,
    pub covariates: Option<RawCovariates>,
}

/// Read `exposures.csv`, `outcomes.csv` and the optional `lods.csv` and
/// `covariates.csv` from `dir`.
pub fn read_dir(dir: &Path) -> Result<RawDataset> {
    let open = |name: &str| -> Result<File> {
        File::open(dir.join(name)).map_err(|e| Error::data(format!("{}: {e}", dir.join(name).display())))
    };
    let mut exposures = read_exposures(open(EXPOSURES_FILE)?, None)?;
    let lod_path = dir.join(LODS_FILE);
    if lod_path.exists() {
        exposures.lods = Some(read_lods(open(LODS_FILE)?, &exposures.column_names)?);
    } else if exposures.values.iter().flatten().any(Option::is_none) {
        return Err(Error::data(format!(
            "{} contains {BELOW_LOD} cells but {} is missing",
            dir.join(EXPOSURES_FILE).display(),
            lod_path.display()
        )));
    }
    let outcomes = read_outcomes(open(OUTCOMES_FILE)?)?;
    let covariates = if dir.join(COVARIATES_FILE).exists() {
        Some(read_covariates(open(COVARIATES_FILE)?)?)
    } else {
        None
    };
    Ok(RawDataset { exposures, outcomes, covariates })
}

pub fn write_dir(dir: &Path, data: &RawDataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_exposures(File::create(dir.join(EXPOSURES_FILE))?, &data.exposures)?;
    if let Some(l) = &data.exposures.lods {
        write_lods(File::create(dir.join(LODS_FILE))?, &data.exposures.column_names, l)?;
    }
    write_outcomes(File::create(dir.join(OUTCOMES_FILE))?, &data.outcomes)?;
    if let Some(z) = &data.covariates {
        write_covariates(File::create(dir.join(COVARIATES_FILE))?, z)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exposures_round_trip_with_lod_cells() {
        let x = RawExposures {
            subject_ids: vec!["a".into(), "b".into()],
            column_names: vec!["m1".into(), "m2".into()],
            values: vec![vec![Some(0.1), None], vec![Some(1e-300), Some(3.25)]],
            lods: None,
        };
        let mut buf = Vec::new();
        write_exposures(&mut buf, &x).unwrap();
        let back = read_exposures(buf.as_slice(), None).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn outcome_blank_value_is_missing() {
        let csv = "subject_id,age,outcome_name,value\ns1,4,bmi,\ns1,5,bmi,1.5\n";
        let y = read_outcomes(csv.as_bytes()).unwrap();
        assert_eq!(y.records[0].value, None);
        assert_eq!(y.records[1].value, Some(1.5));
    }

    #[test]
    fn non_numeric_cell_is_reported() {
        let csv = "subject_id,m1\ns1,abc\n";
        let err = read_exposures(csv.as_bytes(), None).unwrap_err();
        assert!(err.to_string().contains("m1"), "{err}");
    }

    #[test]
    fn missing_lod_sidecar_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(EXPOSURES_FILE), "subject_id,m1\ns1,<LOD\n").unwrap();
        std::fs::write(dir.path().join(OUTCOMES_FILE), "subject_id,age,outcome_name,value\n").unwrap();
        let err = read_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("lods.csv"), "{err}");
    }
}
