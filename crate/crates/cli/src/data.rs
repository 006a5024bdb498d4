//! CSV inputs: regression data and auxiliary restriction matrices.

use std::path::Path;

use icse_core::estimators::LinearConstraint;
use icse_core::{build_linear_problem, EstimationProblem, Matrix, Vector};

use crate::error::{CliError, CliResult};

/// Header names and numeric rows of a CSV file, with line-numbered errors.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{name}: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::data(format!("{name}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::data(format!("{name}: line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = record
            .iter()
            .enumerate()
            .map(|(k, field)| parse_field(field, &headers[k]))
            .collect::<Result<Vec<f64>, String>>()
            .map_err(|e| CliError::data(format!("{name}: line {line}: {e}")))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{name}: no data rows")));
    }
    Ok(Table { headers, rows })
}

fn parse_field(field: &str, column: &str) -> Result<f64, String> {
    match column {
        "equality" => match field.to_ascii_lowercase().as_str() {
            "1" | "true" => Ok(1.0),
            "0" | "false" => Ok(0.0),
            _ => Err(format!("`{field}` in column `{column}` is not a boolean")),
        },
        _ => match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{field}` in column `{column}` is not a finite number")),
        },
    }
}

/// First column is the response, the rest are regressors.
pub fn read_regression(path: &Path) -> CliResult<EstimationProblem> {
    let t = read_table(path)?;
    if t.headers.len() < 2 {
        return Err(CliError::data(format!("{}: need a response and at least one regressor", path.display())));
    }
    let n = t.rows.len();
    let m = t.headers.len() - 1;
    let y = Vector::from_fn(n, |i, _| t.rows[i][0]);
    let x = Matrix::from_fn(n, m, |i, j| t.rows[i][j + 1]);
    Ok(build_linear_problem(x, y)?)
}

/// One restriction `R θ + r0 ≥ 0` (or `= 0` when `equality` is set) per row.
pub fn read_constraints(path: &Path, dim: usize) -> CliResult<LinearConstraint> {
    let t = read_table(path)?;
    let col = |name: &str| t.headers.iter().position(|h| h == name);
    let (r0_col, eq_col) = (col("r0"), col("equality"));
    let coef: Vec<usize> = (0..t.headers.len()).filter(|&k| Some(k) != r0_col && Some(k) != eq_col).collect();
    if coef.len() != dim {
        return Err(CliError::data(format!(
            "{}: {} coefficient columns but the model has {dim} parameters",
            path.display(),
            coef.len()
        )));
    }
    let p = t.rows.len();
    let r = Matrix::from_fn(p, dim, |i, j| t.rows[i][coef[j]]);
    let r0 = Vector::from_fn(p, |i, _| r0_col.map_or(0.0, |k| t.rows[i][k]));
    let mask = (0..p).map(|i| eq_col.is_some_and(|k| t.rows[i][k] == 1.0)).collect();
    Ok(LinearConstraint::new(r, r0, mask)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reports_line_of_bad_value() {
        let f = file("y,x1\n1,2\n3,oops\n");
        let err = read_table(f.path()).err().unwrap();
        assert!(matches!(&err, CliError::Data(m) if m.contains("line 3")), "{err}");
    }

    #[test]
    fn ragged_rows_are_data_errors() {
        let f = file("y,x1\n1,2\n3\n");
        let err = read_table(f.path()).err().unwrap();
        assert!(matches!(&err, CliError::Data(m) if m.contains("line 3")), "{err}");
    }

    #[test]
    fn constraint_file_columns() {
        let f = file("a,b,r0,equality\n1,0,0,false\n0,1,-0.5,1\n");
        let c = read_constraints(f.path(), 2).unwrap();
        assert_eq!(c.offset()[1], -0.5);
        assert_eq!(c.matrix()[(1, 1)], 1.0);
        assert!(read_constraints(f.path(), 3).is_err());
    }
}
