//! Matrix Market coordinate format, real field.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn mm_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str) -> Result<Symmetry> {
    let tokens: Vec<String> = line
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(mm_err(1, format!("malformed header {line:?}")));
    }
    if tokens[2] != "coordinate" {
        return Err(mm_err(1, format!("unsupported format {:?}", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" => {}
        other => return Err(mm_err(1, format!("unsupported field {other:?}"))),
    }
    match tokens[4].as_str() {
        "general" => Ok(Symmetry::General),
        "symmetric" => Ok(Symmetry::Symmetric),
        other => Err(mm_err(1, format!("unsupported symmetry {other:?}"))),
    }
}

/// Parses Matrix Market text. Symmetric files have both triangles
/// materialized; duplicate entries are summed.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<SparseMatrix> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (_, header) = lines.next().ok_or_else(|| mm_err(1, "empty file"))?;
    let header = header.map_err(|e| mm_err(1, e.to_string()))?;
    let symmetry = parse_header(&header)?;

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines {
        let line = line.map_err(|e| mm_err(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(mm_err(lineno, "size line must be `rows cols nnz`"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| mm_err(lineno, format!("bad integer {s:?}")))
                };
                let (rows, cols, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if rows != cols {
                    return Err(mm_err(
                        lineno,
                        format!("matrix is {rows}x{cols}, not square"),
                    ));
                }
                size = Some((rows, nnz));
                triplets.reserve(if symmetry == Symmetry::Symmetric {
                    2 * nnz
                } else {
                    nnz
                });
            }
            Some((n, _)) => {
                if fields.len() != 3 {
                    return Err(mm_err(lineno, "entry line must be `row col value`"));
                }
                let index = |s: &str| -> Result<usize> {
                    let k = s
                        .parse::<usize>()
                        .map_err(|_| mm_err(lineno, format!("bad index {s:?}")))?;
                    if k == 0 || k > n {
                        return Err(mm_err(
                            lineno,
                            format!("index {k} out of range for dimension {n}"),
                        ));
                    }
                    Ok(k - 1)
                };
                let (i, j) = (index(fields[0])?, index(fields[1])?);
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| mm_err(lineno, format!("bad value {:?}", fields[2])))?;
                triplets.push((i, j, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j, i, v));
                }
            }
        }
    }

    let (n, declared) = size.ok_or_else(|| mm_err(1, "missing size line"))?;
    let stored = match symmetry {
        Symmetry::General => triplets.len(),
        Symmetry::Symmetric => triplets.iter().filter(|t| t.0 >= t.1).count(),
    };
    if symmetry == Symmetry::General && stored != declared {
        return Err(mm_err(
            0,
            format!("declared {declared} entries, found {stored}"),
        ));
    }
    SparseMatrix::from_triplets(n, triplets, symmetry == Symmetry::Symmetric)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(BufReader::new(file))
}

/// Writes `m` in coordinate format. Symmetric matrices are written as their
/// lower triangle under a `symmetric` header.
pub fn write_matrix_market_to<W: Write>(m: &SparseMatrix, mut out: W) -> std::io::Result<()> {
    let symmetric = m.is_symmetric();
    let kind = if symmetric { "symmetric" } else { "general" };
    writeln!(out, "%%MatrixMarket matrix coordinate real {kind}")?;
    let entries: Vec<_> = m
        .triplets()
        .filter(|&(i, j, _)| !symmetric || i >= j)
        .collect();
    writeln!(out, "{} {} {}", m.n(), m.n(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    out.flush()
}

pub fn write_matrix_market(m: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix_market_to(m, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SparseMatrix> {
        parse_matrix_market(s.as_bytes())
    }

    #[test]
    fn symmetric_header_materializes_both_triangles() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 2.0\n2 1 -1.0\n2 2 2.0\n",
        )
        .unwrap();
        assert_eq!(m, SparseMatrix::tridiagonal(2, -1.0, 2.0));
        assert!(m.is_symmetric());
    }

    #[test]
    fn out_of_range_index_reports_line() {
        let err =
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap_err();
        match err {
            Error::MatrixMarket { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("out of range"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn general_header_is_stored_as_given() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 0.5\n2 1 0.5\n")
            .unwrap();
        assert!(!m.is_symmetric());
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1.5\n1 1 2.5\n")
            .unwrap();
        assert_eq!(m.values(), &[4.0]);
    }

    #[test]
    fn rejects_unsupported_files() {
        for text in [
            "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n",
            "%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n",
            "%%MatrixMarket matrix array real general\n1 1\n1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 3 0\n",
            "garbage\n",
            "",
        ] {
            assert!(parse(text).is_err(), "accepted {text:?}");
        }
    }

    #[test]
    fn write_then_read_is_identity() {
        let m = SparseMatrix::tridiagonal(4, -0.1, 3.0 + 1e-13);
        let mut buf = Vec::new();
        write_matrix_market_to(&m, &mut buf).unwrap();
        assert_eq!(parse_matrix_market(buf.as_slice()).unwrap(), m);
    }
}
