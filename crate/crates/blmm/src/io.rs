//! CSV input.

use std::fs::File;
use std::path::{Path, PathBuf};

use blmm_core::{Column, DataTable};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row} has {got} fields, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("missing value at row {row}, column {column}")]
    Missing { row: usize, column: String },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Table(#[from] blmm_core::Error),
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

/// Reads a CSV file with a header row. Columns whose every cell parses as a
/// number become numeric; all others are categorical. Rows are numbered
/// from one, not counting the header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<DataTable, LoadError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| LoadError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<DataTable, LoadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != names.len() {
            return Err(LoadError::Ragged {
                row,
                got: rec.len(),
                expected: names.len(),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            if is_missing(field) {
                return Err(LoadError::Missing {
                    row,
                    column: names[c].clone(),
                });
            }
            cells[c].push(field.to_string());
        }
    }
    if cells.first().is_none_or(Vec::is_empty) {
        return Err(LoadError::Empty);
    }
    let columns = names
        .into_iter()
        .zip(cells)
        .map(|(name, values)| {
            let parsed: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
            let col = match parsed {
                Some(v) => Column::Numeric(v),
                None => Column::Categorical(values),
            };
            (name, col)
        })
        .collect();
    Ok(DataTable::new(columns)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<DataTable, LoadError> {
        read_csv(s.as_bytes())
    }

    #[test]
    fn types_are_inferred() {
        let t = read("g,x,y\na,1,2.5\nb,2,3\n").unwrap();
        assert_eq!(t.nrows(), 2);
        assert!(matches!(t.column("g"), Some(Column::Categorical(_))));
        assert_eq!(t.column("x"), Some(&Column::Numeric(vec![1.0, 2.0])));
    }

    #[test]
    fn single_row() {
        assert_eq!(read("a,b\n1,x\n").unwrap().nrows(), 1);
    }

    #[test]
    fn missing_value_is_located() {
        let e = read("a,b\n1,2\n3,\n").unwrap_err();
        assert_eq!(e.to_string(), "missing value at row 2, column b");
        let e = read("a,b\nNA,2\n").unwrap_err();
        assert_eq!(e.to_string(), "missing value at row 1, column a");
    }

    #[test]
    fn ragged_and_empty() {
        assert!(matches!(read("a,b\n1,2\n3\n"), Err(LoadError::Ragged { row: 2, got: 1, expected: 2 })));
        assert!(matches!(read("a,b\n"), Err(LoadError::Empty)));
    }

    #[test]
    fn missing_file() {
        let e = load_csv("/nonexistent/data.csv").unwrap_err();
        assert!(matches!(e, LoadError::Open { .. }));
    }
}
