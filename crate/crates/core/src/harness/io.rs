//! Data ingestion and plot-data files.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mathkit::linalg::{DesignMatrix, Standardization};
use crate::models::Dataset;

/// Predictor columns, in order, plus the response column.
#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub predictors: Vec<String>,
    pub response: String,
}

impl CsvSchema {
    pub fn new(predictors: &[&str], response: &str) -> Self {
        Self { predictors: predictors.iter().map(|s| s.to_string()).collect(), response: response.to_string() }
    }

    /// The ten baseline variables of the diabetes data.
    pub fn diabetes() -> Self {
        Self::new(&["age", "sex", "bmi", "map", "s1", "s2", "s3", "s4", "s5", "s6"], "y")
    }
}

/// A standardized dataset with the transforms that produced it.
#[derive(Clone, Debug)]
pub struct Ingested {
    pub data: Dataset,
    pub names: Vec<String>,
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub response_mean: f64,
}

/// Read a numeric CSV, standardize predictors to mean 0 and `(1/n)Σx² = 1`,
/// and center the response. Line numbers in errors count the header as 1.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, schema, &path.display().to_string())
}

pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema, label: &str) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, column: String::new(), message: e.to_string() })?
        .clone();
    if header.is_empty() {
        return Err(Error::Parse { line: 1, column: String::new(), message: "empty file".into() });
    }
    let position = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            column: name.to_string(),
            message: "column missing from header".into(),
        })
    };
    let pred_idx: Vec<usize> = schema.predictors.iter().map(|c| position(c)).collect::<Result<_>>()?;
    let resp_idx = position(&schema.response)?;

    let p = pred_idx.len();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut y = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::Parse { line, column: String::new(), message: e.to_string() })?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = rec.get(idx).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(Error::MissingValue { line, column: name.to_string() });
            }
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, column: name.to_string(), message: format!("`{raw}` is not a number") })
        };
        for (j, (&idx, name)) in pred_idx.iter().zip(&schema.predictors).enumerate() {
            cols[j].push(cell(idx, name)?);
        }
        y.push(cell(resp_idx, &schema.response)?);
    }
    if y.is_empty() {
        return Err(Error::Parse { line: 2, column: String::new(), message: format!("{label}: no data rows") });
    }
    let mut x = DesignMatrix::from_columns(&cols)?;
    let (column_means, column_scales) = x.standardize(Standardization::Population)?;
    let response_mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter_mut().for_each(|v| *v -= response_mean);
    Ok(Ingested {
        data: Dataset::regression(x, y, label)?,
        names: schema.predictors.clone(),
        column_means,
        column_scales,
        response_mean,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QqRow {
    pub method: String,
    pub prob: f64,
    pub theoretical_q: f64,
    pub empirical_q: f64,
}

/// Q-Q pairs at probabilities `(i − 0.5)/k` against an oracle quantile function.
pub fn qq_rows<F>(method: &str, values: &[f64], oracle: F, k: usize) -> Result<Vec<QqRow>>
where
    F: Fn(f64) -> Result<f64>,
{
    crate::inference::plotting_quantiles(values, k)?
        .into_iter()
        .map(|(prob, empirical_q)| {
            Ok(QqRow { method: method.to_string(), prob, theoretical_q: oracle(prob)?, empirical_q })
        })
        .collect()
}

/// Write a single-sample Q-Q file with columns `theoretical_q, empirical_q`.
pub fn emit_qq<F>(values: &[f64], oracle: F, k: usize, path: &Path) -> Result<()>
where
    F: Fn(f64) -> Result<f64>,
{
    #[derive(Serialize)]
    struct Pair {
        theoretical_q: f64,
        empirical_q: f64,
    }
    let rows = qq_rows("", values, oracle, k)?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(Pair { theoretical_q: r.theoretical_q, empirical_q: r.empirical_q }).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Serialize rows to CSV text (header from the first row's field names).
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Serialize(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::special::norm_quantile;

    fn schema() -> CsvSchema {
        CsvSchema::new(&["a", "b"], "y")
    }

    #[test]
    fn standardizes_and_centers() {
        let text = "b,a,y\n1,2,10\n2,4,12\n3,9,20\n4,1,6\n";
        let ing = ingest_reader(text.as_bytes(), &schema(), "t").unwrap();
        let x = ing.data.design().unwrap().matrix();
        assert_eq!(x.nrows(), 4);
        for j in 0..2 {
            let c = x.col(j);
            assert!(c.iter().sum::<f64>().abs() < 1e-12);
            assert!((c.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
        }
        // Column order follows the schema, not the file.
        assert!((ing.column_means[0] - 4.0).abs() < 1e-12);
        assert!((ing.response_mean - 12.0).abs() < 1e-12);
        assert!(ing.data.y.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn ingest_errors() {
        let s = schema();
        assert!(matches!(ingest_reader("".as_bytes(), &s, "t"), Err(Error::Parse { .. })));
        assert!(matches!(ingest_reader("a,b,y\n".as_bytes(), &s, "t"), Err(Error::Parse { .. })));
        match ingest_reader("a,b,y\n1,2,3\n1,x,3\n".as_bytes(), &s, "t") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column.as_str()), (3, "b")),
            other => panic!("{other:?}"),
        }
        match ingest_reader("a,b,y\n1,2,3\n4,5,\n".as_bytes(), &s, "t") {
            Err(Error::MissingValue { line, column }) => assert_eq!((line, column.as_str()), (3, "y")),
            other => panic!("{other:?}"),
        }
        match ingest_reader("a,y\n1,2\n".as_bytes(), &s, "t") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn qq_on_oracle_quantiles_is_diagonal() {
        let k = 50;
        let values: Vec<f64> = (1..=k).map(|i| norm_quantile((i as f64 - 0.5) / k as f64).unwrap()).collect();
        let rows = qq_rows("x", &values, norm_quantile, k).unwrap();
        assert_eq!(rows.len(), k);
        for r in &rows {
            assert!((r.theoretical_q - r.empirical_q).abs() < 1e-12);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qq.csv");
        emit_qq(&values, norm_quantile, 4, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("theoretical_q,empirical_q\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
