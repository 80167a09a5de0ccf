use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::matrix::{FeatureMatrix, Matrix};
use crate::{Error, Result};

/// Name of the label column written by [`write_table`].
pub const LABEL_COLUMN: &str = "label";

/// A column referenced by header name or by 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

impl From<usize> for ColumnRef {
    fn from(i: usize) -> Self {
        ColumnRef::Index(i)
    }
}

/// Which CSV columns hold the coordinates and (optionally) the class code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub x: ColumnRef,
    pub y: ColumnRef,
    pub z: ColumnRef,
    pub label: Option<ColumnRef>,
    pub has_header: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            x: "x".into(),
            y: "y".into(),
            z: "z".into(),
            label: None,
            has_header: true,
        }
    }
}

impl CsvSchema {
    pub fn with_label(mut self, col: impl Into<ColumnRef>) -> Self {
        self.label = Some(col.into());
        self
    }
}

fn resolve(col: &ColumnRef, header: Option<&csv::StringRecord>) -> Result<usize> {
    match (col, header) {
        (ColumnRef::Index(i), _) => Ok(*i),
        (ColumnRef::Name(n), Some(h)) => h
            .iter()
            .position(|c| c.trim() == n)
            .ok_or_else(|| Error::Schema(format!("column {n:?} not found in header"))),
        (ColumnRef::Name(n), None) => Err(Error::Schema(format!(
            "column {n:?} referenced by name but the file has no header"
        ))),
    }
}

fn reader<R: Read>(stream: R, has_header: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(stream)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_real(rec: &csv::StringRecord, col: usize, width: usize) -> Result<f64> {
    let line = line_of(rec);
    if rec.len() != width {
        return Err(Error::Parse {
            line,
            message: format!("expected {width} fields, found {}", rec.len()),
        });
    }
    let field = rec[col].trim();
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("field {} is not a number: {field:?}", col + 1),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("field {} is not finite", col + 1),
        });
    }
    Ok(v)
}

fn parse_label(rec: &csv::StringRecord, col: usize) -> Result<u32> {
    let field = rec[col].trim();
    field.parse::<u32>().map_err(|_| Error::Parse {
        line: line_of(rec),
        message: format!(
            "label field {} is not a non-negative integer: {field:?}",
            col + 1
        ),
    })
}

/// Read a point cloud, one point per data row in file order.
pub fn read_csv<R: Read>(stream: R, schema: &CsvSchema) -> Result<PointCloud> {
    let mut rdr = reader(stream, schema.has_header);
    let header = if schema.has_header {
        Some(rdr.headers()?.clone())
    } else {
        None
    };
    let cx = resolve(&schema.x, header.as_ref())?;
    let cy = resolve(&schema.y, header.as_ref())?;
    let cz = resolve(&schema.z, header.as_ref())?;
    let cl = schema
        .label
        .as_ref()
        .map(|c| resolve(c, header.as_ref()))
        .transpose()?;
    let mut width = header.as_ref().map(|h| h.len());
    let needed = [cx, cy, cz, cl.unwrap_or(0)].into_iter().max().unwrap_or(0) + 1;
    if let Some(w) = width {
        if needed > w {
            return Err(Error::Schema(format!(
                "column {} beyond header width {w}",
                needed - 1
            )));
        }
    }

    let mut points = Vec::new();
    let mut labels = cl.map(|_| Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let w = *width.get_or_insert(rec.len());
        if needed > w {
            return Err(Error::Parse {
                line: line_of(&rec),
                message: format!("row has {w} fields, schema needs {needed}"),
            });
        }
        let p = [
            parse_real(&rec, cx, w)?,
            parse_real(&rec, cy, w)?,
            parse_real(&rec, cz, w)?,
        ];
        if let (Some(c), Some(l)) = (cl, labels.as_mut()) {
            l.push(parse_label(&rec, c)?);
        }
        points.push(p);
    }
    PointCloud::new(points, labels)
}

/// A feature matrix read back from CSV together with its label column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub features: FeatureMatrix,
    pub labels: Option<Vec<u32>>,
}

/// Read a headed numeric table. A column named `label` becomes the label
/// vector; every other column becomes a feature column.
pub fn read_table<R: Read>(stream: R) -> Result<Table> {
    let mut rdr = reader(stream, true);
    let header = rdr.headers()?.clone();
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let label_col = names.iter().position(|n| n == LABEL_COLUMN);
    let feature_cols: Vec<usize> = (0..names.len()).filter(|&i| Some(i) != label_col).collect();

    let mut data = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        for &c in &feature_cols {
            data.push(parse_real(&rec, c, names.len())?);
        }
        if let (Some(c), Some(l)) = (label_col, labels.as_mut()) {
            l.push(parse_label(&rec, c)?);
        }
        rows += 1;
    }
    let matrix = Matrix::new(rows, feature_cols.len(), data)?;
    let column_names = feature_cols.iter().map(|&c| names[c].clone()).collect();
    Ok(Table {
        features: FeatureMatrix::new(matrix, column_names)?,
        labels,
    })
}

/// Write `matrix` as CSV with a header row, appending a `label` column when
/// labels are given. Reals use the shortest representation that round-trips
/// (at most 17 significant digits).
pub fn write_table<W: Write>(
    mut stream: W,
    matrix: &FeatureMatrix,
    labels: Option<&[u32]>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != matrix.rows() {
            return Err(Error::arg(format!(
                "{} labels for {} rows",
                l.len(),
                matrix.rows()
            )));
        }
    }
    let mut line = String::new();
    line.push_str(&matrix.column_names.join(","));
    if labels.is_some() {
        if !matrix.column_names.is_empty() {
            line.push(',');
        }
        line.push_str(LABEL_COLUMN);
    }
    line.push('\n');
    stream.write_all(line.as_bytes())?;

    use std::fmt::Write as _;
    for (i, row) in matrix.matrix.iter_rows().enumerate() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("writing to a String cannot fail");
        }
        if let Some(l) = labels {
            if !row.is_empty() {
                line.push(',');
            }
            write!(line, "{}", l[i]).expect("writing to a String cannot fail");
        }
        line.push('\n');
        stream.write_all(line.as_bytes())?;
    }
    stream.flush()?;
    Ok(())
}
