use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::loss::Dataset;

/// Column roles of an input CSV file. Every other column is a covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadOptions {
    pub response: String,
    /// Observation-weight column, used when present in the header.
    pub obs_weight: String,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            response: "y".into(),
            obs_weight: "obs_weight".into(),
        }
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("non-numeric value {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("non-finite value {raw:?}"),
        });
    }
    Ok(v)
}

fn csv_error(e: csv::Error, headers: &[String]) -> Error {
    if let csv::ErrorKind::UnequalLengths { pos, expected_len, len } = e.kind() {
        let row = pos.as_ref().map_or(0, |p| p.record() as usize);
        return Error::Parse {
            row,
            column: headers.get(*len as usize).cloned().unwrap_or_default(),
            message: format!("expected {expected_len} fields, found {len}"),
        };
    }
    Error::Csv(e)
}

/// Parses a CSV data set with a header row.
pub fn read_dataset_from<R: Read>(reader: R, options: &ReadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let response = headers
        .iter()
        .position(|h| *h == options.response)
        .ok_or_else(|| Error::InvalidData(format!("missing response column {:?}", options.response)))?;
    let weight = headers.iter().position(|h| *h == options.obs_weight);
    let features: Vec<usize> = (0..headers.len())
        .filter(|&c| c != response && Some(c) != weight)
        .collect();

    let mut y = Vec::new();
    let mut d = Vec::new();
    let mut values = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(e, &headers))?;
        let row = r + 1;
        y.push(parse_cell(&record[response], row, &headers[response])?);
        if let Some(c) = weight {
            d.push(parse_cell(&record[c], row, &headers[c])?);
        }
        for &c in &features {
            values.push(parse_cell(&record[c], row, &headers[c])?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidData("data file has no rows".into()));
    }
    let x = Array2::from_shape_vec((n, features.len()), values).expect("row-major buffer has n·p entries");
    let mut data = Dataset::new(x, Array1::from(y))?;
    if weight.is_some() {
        data = data.with_obs_weights(Array1::from(d))?;
    }
    data.with_names(features.iter().map(|&c| headers[c].clone()).collect())
}

pub fn read_dataset(path: &Path, options: &ReadOptions) -> Result<Dataset> {
    read_dataset_from(std::fs::File::open(path)?, options)
}

/// Writes the response, the covariates and, unless all equal one, the
/// observation weights, with shortest round-trip number formatting.
pub fn write_dataset_to<W: Write>(data: &Dataset, writer: W, options: &ReadOptions) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_weights = data.obs_weights().iter().any(|&d| d != 1.0);
    let mut header = vec![options.response.clone()];
    header.extend(data.names().iter().cloned());
    if with_weights {
        header.push(options.obs_weight.clone());
    }
    w.write_record(&header)?;
    let x = data.x();
    let mut line = Vec::with_capacity(header.len());
    for i in 0..data.n() {
        line.clear();
        line.push(data.y()[i].to_string());
        line.extend(x.row(i).iter().map(|v| v.to_string()));
        if with_weights {
            line.push(data.obs_weights()[i].to_string());
        }
        w.write_record(&line)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(data: &Dataset, path: &Path, options: &ReadOptions) -> Result<()> {
    write_dataset_to(data, std::fs::File::create(path)?, options)
}

/// Reads penalty weights from a CSV file with columns `variable,weight`.
/// Variables that are not listed keep weight one.
pub fn read_pen_weights(path: &Path, names: &[String]) -> Result<Array1<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(j, n)| (n.as_str(), j)).collect();
    let mut w = Array1::ones(names.len());
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let name = record.get(0).unwrap_or_default().trim();
        let j = *index.get(name).ok_or_else(|| Error::Parse {
            row,
            column: "variable".into(),
            message: format!("unknown variable {name:?}"),
        })?;
        w[j] = parse_cell(record.get(1).unwrap_or_default(), row, "weight")?;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn read(text: &str) -> Result<Dataset> {
        read_dataset_from(text.as_bytes(), &ReadOptions::default())
    }

    #[test]
    fn reads_small_file() {
        let d = read("y,x1,x2\n1,0.5,2\n0,1.5,-1\n1,2,3e-2\n").unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.names(), &["x1".to_string(), "x2".to_string()]);
        assert_eq!(d.x()[[2, 1]], 0.03);
        assert_eq!(d.y().to_vec(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn response_may_be_anywhere_and_weights_are_picked_up() {
        let d = read("a,obs_weight,y\n1,2,3\n4,2,6\n").unwrap();
        assert_eq!(d.names(), &["a".to_string()]);
        assert_eq!(d.y().to_vec(), vec![3.0, 6.0]);
        assert_eq!(d.obs_weights().to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_cells_with_location() {
        match read("y,x1\n1,2\n0,NA\n") {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "x1");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read("y,x1\n1,inf\n"), Err(Error::Parse { row: 1, .. })));
        assert!(matches!(read("y,x1\n1,2\n3\n"), Err(Error::Parse { row: 2, .. })));
        assert!(matches!(read("z,x1\n1,2\n"), Err(Error::InvalidData(_))));
    }

    #[test]
    fn round_trip() {
        let x = array![[0.1, 1.0 / 3.0], [-2.5e-8, 7.0], [1e300, -0.0]];
        let data = Dataset::new(x, array![1.0, 0.0, 0.2])
            .unwrap()
            .with_names(vec!["a".into(), "b c".into()])
            .unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&data, &mut buf, &ReadOptions::default()).unwrap();
        let back = read_dataset_from(buf.as_slice(), &ReadOptions::default()).unwrap();
        assert_eq!(back, data);

        let weighted = data.with_obs_weights(array![0.5, 1.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&weighted, &mut buf, &ReadOptions::default()).unwrap();
        let back = read_dataset_from(buf.as_slice(), &ReadOptions::default()).unwrap();
        assert_eq!(back, weighted);
    }

    #[test]
    fn penalty_weight_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        std::fs::write(&path, "variable,weight\nb,0\na,2.5\n").unwrap();
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        assert_eq!(read_pen_weights(&path, &names).unwrap().to_vec(), vec![2.5, 0.0, 1.0]);
        std::fs::write(&path, "variable,weight\nzz,1\n").unwrap();
        assert!(read_pen_weights(&path, &names).is_err());
    }
}
