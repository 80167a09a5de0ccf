//! Point-cloud and feature-table I/O.
//!
//! CSV is the interchange format between every pipeline stage; LAS support
//! covers the 1.0–1.2 point record formats 0 and 1.

mod las;
mod table;

pub use las::{read_las, LAS_HEADER_SIZE};
pub use table::{read_csv, read_table, write_table, ColumnRef, CsvSchema, Table, LABEL_COLUMN};
