//! Matrix Market I/O.
//!
//! Matrices use the coordinate format (real or integer, general or
//! symmetric, 1-based). A right-hand side may follow the entries as an
//! embedded `array` block, or come from a separate Matrix Market array file
//! or JSON vector.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::generate::index_rhs;
use crate::system::SparseSystem;

const BANNER: &str = "%%matrixmarket";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next line that is neither blank nor a plain comment. Banner lines
    /// (`%%MatrixMarket ...`) are returned.
    fn next_content(&mut self) -> Result<Option<(usize, String)>> {
        for line in self.inner.by_ref() {
            self.number += 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed.starts_with('%') && !trimmed.to_ascii_lowercase().starts_with(BANNER) {
                continue;
            }
            return Ok(Some((self.number, trimmed.to_string())));
        }
        Ok(None)
    }
}

fn parse_banner(line: usize, text: &str, want_array: bool) -> Result<Symmetry> {
    let words: Vec<String> = text
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if words.len() != 5 || words[0] != BANNER || words[1] != "matrix" {
        return Err(parse_err(line, format!("malformed banner: {text}")));
    }
    let format = if want_array { "array" } else { "coordinate" };
    if words[2] != format {
        return Err(parse_err(
            line,
            format!("expected {format} format, found {}", words[2]),
        ));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(parse_err(
            line,
            format!("unsupported field type {}", words[3]),
        ));
    }
    match words[4].as_str() {
        "general" => Ok(Symmetry::General),
        "symmetric" if !want_array => Ok(Symmetry::Symmetric),
        other => Err(parse_err(line, format!("unsupported symmetry {other}"))),
    }
}

fn parse_usize(line: usize, word: Option<&str>, what: &str) -> Result<usize> {
    word.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what}")))
}

fn parse_value(line: usize, word: Option<&str>) -> Result<f64> {
    let v: f64 = word
        .ok_or_else(|| parse_err(line, "missing value"))?
        .parse()
        .map_err(|_| parse_err(line, "invalid value"))?;
    if !v.is_finite() {
        return Err(parse_err(line, "value is not finite"));
    }
    Ok(v)
}

fn expect_end<'a>(line: usize, mut words: impl Iterator<Item = &'a str>) -> Result<()> {
    match words.next() {
        Some(extra) => Err(parse_err(line, format!("unexpected token {extra}"))),
        None => Ok(()),
    }
}

fn read_array_body<R: BufRead>(lines: &mut Lines<R>, banner_line: usize) -> Result<Vec<f64>> {
    let (line, size) = lines
        .next_content()?
        .ok_or_else(|| parse_err(banner_line, "missing array size line"))?;
    let mut words = size.split_whitespace();
    let rows = parse_usize(line, words.next(), "row count")?;
    let cols = parse_usize(line, words.next(), "column count")?;
    expect_end(line, words)?;
    if cols != 1 {
        return Err(parse_err(
            line,
            format!("right-hand side must have one column, found {cols}"),
        ));
    }
    let mut values = Vec::with_capacity(rows);
    while values.len() < rows {
        let (line, text) = lines.next_content()?.ok_or_else(|| {
            parse_err(
                lines.number,
                format!("expected {rows} values, found {}", values.len()),
            )
        })?;
        let mut words = text.split_whitespace();
        values.push(parse_value(line, words.next())?);
        expect_end(line, words)?;
    }
    Ok(values)
}

/// Parsed coordinate matrix before it is turned into a [`SparseSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMarket {
    pub n: usize,
    /// Zero-based triplets, symmetric storage already expanded.
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Option<Vec<f64>>,
}

/// Parses a coordinate matrix, optionally followed by an embedded array block.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<MatrixMarket> {
    let mut lines = Lines {
        inner: reader.lines(),
        number: 0,
    };
    let (line, banner) = lines
        .next_content()?
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let symmetry = parse_banner(line, &banner, false)?;

    let (line, size) = lines
        .next_content()?
        .ok_or_else(|| parse_err(line, "missing size line"))?;
    let mut words = size.split_whitespace();
    let rows = parse_usize(line, words.next(), "row count")?;
    let cols = parse_usize(line, words.next(), "column count")?;
    let nnz = parse_usize(line, words.next(), "entry count")?;
    expect_end(line, words)?;
    if rows != cols {
        return Err(Error::NonSquare { rows, cols });
    }

    let mut entries = Vec::with_capacity(
        nnz * if symmetry == Symmetry::Symmetric {
            2
        } else {
            1
        },
    );
    for _ in 0..nnz {
        let (line, text) = lines.next_content()?.ok_or_else(|| {
            parse_err(
                lines.number,
                format!("expected {nnz} entries, found {}", entries.len()),
            )
        })?;
        let mut words = text.split_whitespace();
        let i = parse_usize(line, words.next(), "row index")?;
        let j = parse_usize(line, words.next(), "column index")?;
        let v = parse_value(line, words.next())?;
        expect_end(line, words)?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_err(
                line,
                format!("index ({i}, {j}) outside 1..={rows}"),
            ));
        }
        if symmetry == Symmetry::Symmetric && j > i {
            return Err(parse_err(
                line,
                "symmetric storage expects the lower triangle",
            ));
        }
        entries.push((i - 1, j - 1, v));
        if symmetry == Symmetry::Symmetric && i != j {
            entries.push((j - 1, i - 1, v));
        }
    }

    let rhs = match lines.next_content()? {
        None => None,
        Some((line, text)) => {
            parse_banner(line, &text, true)?;
            let b = read_array_body(&mut lines, line)?;
            if b.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    actual: b.len(),
                });
            }
            if let Some((line, text)) = lines.next_content()? {
                return Err(parse_err(line, format!("trailing content: {text}")));
            }
            Some(b)
        }
    };
    Ok(MatrixMarket {
        n: rows,
        entries,
        rhs,
    })
}

/// Reads a right-hand side from a Matrix Market array file or a JSON array.
pub fn load_rhs(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    let mut lines = Lines {
        inner: text.as_bytes().lines(),
        number: 0,
    };
    let (line, banner) = lines
        .next_content()?
        .ok_or_else(|| parse_err(1, "empty file"))?;
    parse_banner(line, &banner, true)?;
    read_array_body(&mut lines, line)
}

/// Loads a system. The right-hand side comes from `rhs` when given, else from
/// an embedded array block, else defaults to `b_i = i`.
pub fn load_matrix_market_with_rhs(path: &Path, rhs: Option<&Path>) -> Result<SparseSystem> {
    let parsed = read_matrix_market(BufReader::new(File::open(path)?))?;
    let b = match rhs {
        Some(p) => load_rhs(p)?,
        None => parsed.rhs.unwrap_or_else(|| index_rhs(parsed.n)),
    };
    if b.len() != parsed.n {
        return Err(Error::DimensionMismatch {
            expected: parsed.n,
            actual: b.len(),
        });
    }
    SparseSystem::new(parsed.n, parsed.entries, b)
}

pub fn load_matrix_market(path: &Path) -> Result<SparseSystem> {
    load_matrix_market_with_rhs(path, None)
}

/// Writes `sys` as a general coordinate matrix followed by an embedded
/// right-hand-side array. Values use shortest round-trip formatting.
pub fn write_matrix_market<W: Write>(sys: &SparseSystem, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let n = sys.n();
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{n} {n} {}", sys.nnz())?;
    for (i, j, v) in sys.entries() {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{n} 1")?;
    for v in sys.rhs() {
        writeln!(out, "{v:e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_matrix_market(sys: &SparseSystem, path: &Path) -> Result<()> {
    write_matrix_market(sys, File::create(path)?)
}
