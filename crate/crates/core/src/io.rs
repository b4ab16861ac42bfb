//! Matrix Market coordinate files, edge lists and point tables.

use crate::error::{Error, Result};
use crate::matrix::SymmetricSparseMatrix;
use std::io::{BufRead, Write};

/// Reads a `coordinate real|integer symmetric|general` Matrix Market file.
/// Symmetric files store one triangle; it is mirrored on load.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SymmetricSparseMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(Error::Parse { line: 1, msg: format!("unsupported header `{header}`") });
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(Error::Parse { line: 1, msg: format!("unsupported field `{}`", fields[3]) });
    }
    let symmetric = match fields[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(Error::Parse { line: 1, msg: format!("unsupported symmetry `{other}`") }),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut t = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let no = idx + 1;
        let s = line.trim();
        if s.is_empty() || s.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = s.split_whitespace().collect();
        let perr = |msg: String| Error::Parse { line: no, msg };
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(perr(format!("expected `rows cols nnz`, got `{s}`")));
                }
                let rows: usize = parts[0].parse().map_err(|_| perr(format!("bad row count `{}`", parts[0])))?;
                let cols: usize = parts[1].parse().map_err(|_| perr(format!("bad column count `{}`", parts[1])))?;
                let nnz: usize = parts[2].parse().map_err(|_| perr(format!("bad entry count `{}`", parts[2])))?;
                if rows != cols {
                    return Err(perr(format!("matrix is {rows} x {cols}, not square")));
                }
                size = Some((rows, nnz));
                t.reserve(if symmetric { 2 * nnz } else { nnz });
            }
            Some((n, _)) => {
                if parts.len() != 3 {
                    return Err(perr(format!("expected `row col value`, got `{s}`")));
                }
                let i: usize = parts[0].parse().map_err(|_| perr(format!("bad row index `{}`", parts[0])))?;
                let j: usize = parts[1].parse().map_err(|_| perr(format!("bad column index `{}`", parts[1])))?;
                let v: f64 = parts[2].parse().map_err(|_| perr(format!("bad value `{}`", parts[2])))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(perr(format!("index ({i}, {j}) outside 1..={n}")));
                }
                let (i, j) = (i - 1, j - 1);
                if symmetric && i < j {
                    return Err(perr(format!("entry ({}, {}) above the diagonal in a symmetric file", i + 1, j + 1)));
                }
                t.push((i, j, v));
                if symmetric && i != j {
                    t.push((j, i, v));
                }
            }
        }
    }
    let (n, nnz) = size.ok_or(Error::Parse { line: 1, msg: "missing size line".into() })?;
    let stored = if symmetric { t.iter().filter(|e| e.0 >= e.1).count() } else { t.len() };
    if stored != nnz {
        return Err(Error::Parse { line: 0, msg: format!("header declares {nnz} entries, found {stored}") });
    }
    SymmetricSparseMatrix::from_triplets(n, &t)
}

/// Writes the lower triangle in `coordinate real symmetric` form. Values use
/// the shortest representation that parses back to the same bits.
pub fn write_matrix_market<W: Write>(a: &SymmetricSparseMatrix, mut out: W) -> Result<()> {
    let lower: Vec<_> = a.triplets().into_iter().filter(|&(i, j, _)| i >= j).collect();
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{} {} {}", a.dim(), a.dim(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads 0-based `i j` pairs separated by whitespace or commas. `#` starts a
/// comment; extra columns (weights) are ignored.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let mut it = s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty());
        let mut next = || -> Result<usize> {
            let tok = it.next().ok_or(Error::Parse { line: idx + 1, msg: format!("expected two vertices in `{s}`") })?;
            tok.parse().map_err(|_| Error::Parse { line: idx + 1, msg: format!("bad vertex `{tok}`") })
        };
        let a = next()?;
        let b = next()?;
        edges.push((a, b));
    }
    Ok(edges)
}

/// Reads a numeric CSV, one point per row. A first row that does not parse
/// as numbers is taken as a header.
pub fn read_points_csv<R: std::io::Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut points = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { line: idx + 1, msg: e.to_string() })?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match row {
            Ok(r) => points.push(r),
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(Error::Parse { line: idx + 1, msg: e.to_string() }),
        }
    }
    Ok(points)
}
