//! Coordinate-list text files for view matrices.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mvgrl_core::SparseMatrix;

use super::{for_each_record, parse_field, FormatError};

/// Writes `graph,row,col,value`, one stored entry per line, graphs in order.
pub fn write_coo(path: &Path, views: &[SparseMatrix]) -> Result<(), FormatError> {
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "graph,row,col,value")?;
        for (g, m) in views.iter().enumerate() {
            for (r, c, v) in m.iter() {
                writeln!(w, "{g},{r},{c},{v:?}")?;
            }
        }
        w.flush()
    };
    write().map_err(|e| FormatError::io(path, e))
}

/// Reads the entries of a file written by [`write_coo`] as
/// `(graph, row, col, value)` tuples.
pub fn read_coo(path: &Path) -> Result<Vec<(usize, usize, usize, f64)>, FormatError> {
    let mut out = Vec::new();
    let mut header = true;
    for_each_record(path, b',', |_, r| {
        if std::mem::take(&mut header) {
            return if r.iter().eq(["graph", "row", "col", "value"]) {
                Ok(())
            } else {
                Err("expected header graph,row,col,value".into())
            };
        }
        out.push((
            parse_field(r, 0, "graph index")?,
            parse_field(r, 1, "row")?,
            parse_field(r, 2, "column")?,
            parse_field(r, 3, "value")?,
        ));
        Ok(())
    })?;
    Ok(out)
}
