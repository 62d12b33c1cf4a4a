//! Matrix Market reader producing dense matrices.
//!
//! Supports `coordinate` and `array` storage with `real` or `integer` values
//! and `general`, `symmetric` or `skew-symmetric` symmetry. Indices are
//! 1-based; array data is column major.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Storage {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<(Storage, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(perr(lineno, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    if tokens[1] != "matrix" {
        return Err(perr(lineno, format!("unsupported object '{}'", tokens[1])));
    }
    let storage = match tokens[2].as_str() {
        "coordinate" => Storage::Coordinate,
        "array" => Storage::Array,
        other => return Err(perr(lineno, format!("unknown format '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "double" | "integer" => {}
        "complex" => return Err(perr(lineno, "complex matrices are not supported")),
        other => return Err(perr(lineno, format!("unsupported field '{other}'"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(perr(lineno, format!("unsupported symmetry '{other}'"))),
    };
    Ok((storage, symmetry))
}

fn parse_num<T: std::str::FromStr>(tok: &str, lineno: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| perr(lineno, format!("invalid {what} '{tok}'")))
}

/// Parse Matrix Market text into a dense matrix.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (lineno, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let (storage, symmetry) = parse_header(header, lineno)?;

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let last_line = text.lines().count().max(1);

    let (size_line, size) = data
        .next()
        .ok_or_else(|| perr(last_line, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| parse_num(t, size_line, "size"))
        .collect::<Result<_>>()?;

    let (rows, cols, expected) = match (storage, dims.as_slice()) {
        (Storage::Coordinate, [r, c, nnz]) => (*r, *c, *nnz),
        (Storage::Array, [r, c]) => {
            let n = match symmetry {
                Symmetry::General => r * c,
                Symmetry::Symmetric => r * (r + 1) / 2,
                Symmetry::SkewSymmetric => r * (r.saturating_sub(1)) / 2,
            };
            (*r, *c, n)
        }
        _ => return Err(perr(size_line, "wrong number of size fields")),
    };
    if symmetry != Symmetry::General && rows != cols {
        return Err(perr(size_line, "symmetric storage requires a square matrix"));
    }

    let mut m = DMatrix::<f64>::zeros(rows, cols);
    let mut count = 0usize;
    let mut set = |i: usize, j: usize, v: f64| {
        m[(i, j)] += v;
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => m[(j, i)] += v,
                Symmetry::SkewSymmetric => m[(j, i)] -= v,
            }
        }
    };

    // array storage walks columns, lower triangle only when symmetric
    let array_positions: Vec<(usize, usize)> = match storage {
        Storage::Coordinate => Vec::new(),
        Storage::Array => (0..cols)
            .flat_map(|j| {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                (start..rows).map(move |i| (i, j))
            })
            .collect(),
    };

    for (lineno, line) in data.by_ref() {
        if count == expected {
            return Err(perr(lineno, format!("more than the declared {expected} entries")));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match storage {
            Storage::Coordinate => {
                if toks.len() != 3 {
                    return Err(perr(lineno, "expected 'row col value'"));
                }
                let i: usize = parse_num(toks[0], lineno, "row index")?;
                let j: usize = parse_num(toks[1], lineno, "column index")?;
                let v: f64 = parse_num(toks[2], lineno, "value")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(perr(lineno, format!("index ({i}, {j}) out of bounds")));
                }
                if symmetry != Symmetry::General && j > i {
                    return Err(perr(lineno, "entry above the diagonal in symmetric storage"));
                }
                set(i - 1, j - 1, v);
            }
            Storage::Array => {
                if toks.len() != 1 {
                    return Err(perr(lineno, "expected a single value"));
                }
                let v: f64 = parse_num(toks[0], lineno, "value")?;
                let (i, j) = array_positions[count];
                set(i, j, v);
            }
        }
        count += 1;
    }
    if count < expected {
        return Err(perr(
            last_line + 1,
            format!("premature end of file: {count} of {expected} entries"),
        ));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read_to_string(path)?)
}

/// Read a single-column Matrix Market file as a vector.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Error::Shape(format!(
            "vector file has {} columns",
            m.ncols()
        )));
    }
    Ok(m.column(0).into_owned())
}

/// Serialize a dense matrix in `array real general` format.
pub fn write_array(m: &DMatrix<f64>) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push_str(&format!("{:e}\n", m[(i, j)]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_array() {
        let m = parse_matrix("%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n1\n").unwrap();
        assert_eq!(m, DMatrix::identity(2, 2));
    }

    #[test]
    fn coordinate_symmetric_mirrors() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -1\n3 2 0.5\n3 3 4\n";
        let m = parse_matrix(text).unwrap();
        assert_eq!(m[(0, 1)], -1.0);
        assert_eq!(m[(1, 0)], -1.0);
        assert_eq!(m[(1, 2)], 0.5);
        assert_eq!(m[(2, 2)], 4.0);
    }

    #[test]
    fn array_symmetric_lower_triangle() {
        let text = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n";
        let m = parse_matrix(text).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
    }

    #[test]
    fn premature_eof_reports_line() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n2 2 1.0\n";
        match parse_matrix(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("premature"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_complex_and_bad_header() {
        let c = parse_matrix("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n");
        assert!(matches!(c, Err(Error::Parse { line: 1, .. })));
        let h = parse_matrix("%MatrixMarket matrix array real\n");
        assert!(matches!(h, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn rejects_out_of_bounds_and_extra_entries() {
        let oob = parse_matrix("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
        assert!(matches!(oob, Err(Error::Parse { line: 3, .. })));
        let extra =
            parse_matrix("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n2 2 1.0\n");
        assert!(matches!(extra, Err(Error::Parse { line: 4, .. })));
        let bad = parse_matrix("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n");
        assert!(matches!(bad, Err(Error::Parse { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn array_writer_roundtrips(vals in proptest::collection::vec(-1e6f64..1e6, 6)) {
            let m = DMatrix::from_vec(3, 2, vals);
            let back = parse_matrix(&write_array(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
