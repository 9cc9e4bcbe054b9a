use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Arm, ObservationalDataset};
use crate::error::{Error, Result};
use crate::points::Points;
use crate::scalar::Scalar;

/// Reads a dataset with header `x0,...,x{d-1},d,y`. Row numbers in errors
/// count data rows from 1.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<ObservationalDataset<T>> {
    read_csv(File::open(path)?)
}

pub fn read_csv<T: Scalar, R: Read>(reader: R) -> Result<ObservationalDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 3 || names[names.len() - 2] != "d" || names[names.len() - 1] != "y" {
        return Err(Error::InvalidHeader(format!(
            "expected `x0,...,x{{d-1}},d,y`, found `{}`",
            names.join(",")
        )));
    }
    let dim = names.len() - 2;
    check_covariate_names(&names[..dim])?;

    let mut covariates = Vec::new();
    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::MalformedRow { row, message: e.to_string() })?;
        if record.len() != dim + 2 {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected {} fields, found {}", dim + 2, record.len()),
            });
        }
        for (c, field) in record.iter().take(dim).enumerate() {
            covariates.push(parse_finite::<T>(field, row, names[c])?);
        }
        treatment.push(match record[dim].trim() {
            "0" => Arm::Control,
            "1" => Arm::Treated,
            other => {
                return match other.parse::<f64>() {
                    Ok(_) => Err(Error::NonBinaryTreatment { row }),
                    Err(_) => Err(Error::MalformedRow {
                        row,
                        message: format!("treatment `{other}` is not a number"),
                    }),
                }
            }
        });
        outcome.push(parse_finite::<T>(&record[dim + 1], row, "y")?);
    }
    if treatment.is_empty() {
        return Err(Error::EmptyTreatmentArm);
    }
    ObservationalDataset::new(Points::new(covariates, dim)?, treatment, outcome)
}

pub fn save_csv<T: Scalar>(dataset: &ObservationalDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut file = File::create(path)?;
    write_csv(dataset, &mut file)
}

/// Writes the dataset using shortest round-trip decimal formatting.
pub fn write_csv<T: Scalar, W: Write>(dataset: &ObservationalDataset<T>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..dataset.dim()).map(|c| format!("x{c}")).collect();
    header.push("d".into());
    header.push("y".into());
    wtr.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut fields: Vec<String> = dataset.x(i).iter().map(|v| v.to_string()).collect();
        fields.push(dataset.arm(i).flag().to_string());
        fields.push(dataset.y(i).to_string());
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads bare points with header `x0,...,x{d-1}`.
pub fn load_points_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Points<T>> {
    read_points_csv(File::open(path)?)
}

pub fn read_points_csv<T: Scalar, R: Read>(reader: R) -> Result<Points<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.is_empty() {
        return Err(Error::InvalidHeader("empty header".into()));
    }
    check_covariate_names(&names)?;
    let dim = names.len();
    let mut values = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::MalformedRow { row, message: e.to_string() })?;
        if record.len() != dim {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected {dim} fields, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            values.push(parse_finite::<T>(field, row, names[c])?);
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("points file has no rows".into()));
    }
    Points::new(values, dim)
}

fn check_covariate_names(names: &[&str]) -> Result<()> {
    for (c, name) in names.iter().enumerate() {
        if *name != format!("x{c}") {
            return Err(Error::InvalidHeader(format!("column {c} is `{name}`, expected `x{c}`")));
        }
    }
    Ok(())
}

fn parse_finite<T: Scalar>(field: &str, row: usize, column: &str) -> Result<T> {
    let value: T = field.trim().parse().map_err(|_| Error::MalformedRow {
        row,
        message: format!("`{}` in column `{column}` is not a number", field.trim()),
    })?;
    if !value.is_finite() {
        return Err(Error::NonFinite { row, column: column.to_string() });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_four_unit_file() {
        let text = "x0,d,y\n0,1,1\n2,1,3\n0.1,0,0\n1.9,0,2\n";
        let ds: ObservationalDataset<f64> = read_csv(text.as_bytes()).unwrap();
        assert_eq!((ds.len(), ds.n_treated(), ds.n_control()), (4, 2, 2));
        assert_eq!(ds.x(2), &[0.1]);
        assert_eq!(ds.outcome(), &[1.0, 3.0, 0.0, 2.0]);
    }

    #[test]
    fn non_binary_treatment_reports_row() {
        let text = "x0,d,y\n0,1,1\n2,2,3\n";
        let err = read_csv::<f64, _>(text.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "non-binary treatment at row 2");
    }

    #[test]
    fn header_only_is_empty_arm() {
        let err = read_csv::<f64, _>("x0,x1,d,y\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptyTreatmentArm));
        assert_eq!(err.to_string(), "empty treatment arm");
    }

    #[test]
    fn single_arm_file_is_empty_arm() {
        let err = read_csv::<f64, _>("x0,d,y\n0,1,1\n1,1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptyTreatmentArm));
    }

    #[test]
    fn malformed_and_non_finite_rows() {
        let err = read_csv::<f64, _>("x0,d,y\n0,1,1\n1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 2, .. }));
        let err = read_csv::<f64, _>("x0,d,y\n0,1,1\nabc,0,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 2, .. }));
        let err = read_csv::<f64, _>("x0,d,y\n0,1,NaN\n1,0,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, .. }));
        let err = read_csv::<f64, _>("x0,d,y\n0,1,1\ninf,0,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 2, .. }));
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(matches!(
            read_csv::<f64, _>("a,d,y\n0,1,1\n".as_bytes()),
            Err(Error::InvalidHeader(_))
        ));
        assert!(matches!(
            read_csv::<f64, _>("x0,y,d\n0,1,1\n".as_bytes()),
            Err(Error::InvalidHeader(_))
        ));
    }

    #[test]
    fn points_file() {
        let p: Points<f64> = read_points_csv("x0,x1\n0,1\n2,3\n".as_bytes()).unwrap();
        assert_eq!((p.len(), p.dim()), (2, 2));
        assert_eq!(p.row(1), &[2.0, 3.0]);
    }
}
