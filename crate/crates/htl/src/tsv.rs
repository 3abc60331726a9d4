//! Tab-separated tables with a leading version line.

use std::fmt::Display;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Lines of a table with their 1-based numbers, stopping at the first read error.
pub(crate) fn numbered_lines<'a, R: BufRead + 'a>(
    reader: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader
        .lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(Error::io(path)))
}

pub(crate) fn expect_version(path: &Path, line: Option<Result<(usize, String)>>, token: &str) -> Result<()> {
    match line.transpose()? {
        Some((_, l)) if l.trim_end() == token => Ok(()),
        Some((n, l)) => Err(Error::format(path, n, format!("expected version line {token:?}, found {l:?}"))),
        None => Err(Error::format(path, 1, format!("empty file, expected version line {token:?}"))),
    }
}

/// Parses one cell, naming the column on failure.
pub(crate) fn cell<T: FromStr>(path: &Path, line: usize, column: &str, text: &str) -> Result<T>
where
    T::Err: Display,
{
    text.parse()
        .map_err(|e| Error::format(path, line, format!("column {column}: cannot parse {text:?}: {e}")))
}

pub(crate) fn write_row<W: Write>(w: &mut W, cells: impl IntoIterator<Item = impl Display>) -> std::io::Result<()> {
    let mut first = true;
    for c in cells {
        if !first {
            w.write_all(b"\t")?;
        }
        first = false;
        write!(w, "{c}")?;
    }
    w.write_all(b"\n")
}

/// Rejects text that would break the line/column structure.
pub(crate) fn check_field(value: &str, what: &str) -> Result<()> {
    if value.is_empty() || value.contains(['\t', '\n', '\r']) {
        return Err(htl_core::Error::InvalidParameter(format!("{what} {value:?} must be nonempty without tabs or newlines")).into());
    }
    Ok(())
}
