//! Evaluation records as tab-separated lines. Lines starting with `#` are
//! metadata, so concatenated files read as concatenated lists.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use htl_core::harness::{EvalRecord, Method, Metric, Pairing, Setting, Size};

use crate::error::{Error, Result};
use crate::tsv;

pub const RECORDS_VERSION: &str = "#htl-records v1";
pub const COLUMNS: [&str; 10] = ["setting", "pairing", "target", "method", "size", "metric", "value", "seed", "C", "gamma"];
/// Written in the gamma column for learners without an RBF width.
const NO_GAMMA: &str = "-";

fn write_header<W: Write>(w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{RECORDS_VERSION}")?;
    writeln!(w, "#{}", COLUMNS.join("\t"))
}

fn write_record<W: Write>(w: &mut W, r: &EvalRecord) -> std::io::Result<()> {
    let gamma = r.gamma.map_or_else(|| NO_GAMMA.to_string(), |g| g.to_string());
    tsv::write_row(
        w,
        [
            r.setting.as_str().to_string(),
            r.pairing.as_str().to_string(),
            r.target.clone(),
            r.method.as_str().to_string(),
            r.size.to_string(),
            r.metric.as_str().to_string(),
            r.value.to_string(),
            r.seed.to_string(),
            r.c.to_string(),
            gamma,
        ],
    )
}

pub fn write_records<W: Write>(w: &mut W, records: &[EvalRecord]) -> Result<()> {
    for r in records {
        tsv::check_field(&r.target, "target id")?;
    }
    let io = |e| Error::Io {
        path: "<records>".into(),
        source: e,
    };
    write_header(w).map_err(io)?;
    for r in records {
        write_record(w, r).map_err(io)?;
    }
    Ok(())
}

pub fn save_records(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    write_records(&mut w, records).map_err(|e| relocate(e, path))?;
    w.flush().map_err(Error::io(path))
}

/// Appends to `path`, writing the header first if the file is new or empty.
pub fn append_records(path: &Path, records: &[EvalRecord]) -> Result<()> {
    for r in records {
        tsv::check_field(&r.target, "target id")?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(Error::io(path))?;
    let fresh = file.metadata().map_err(Error::io(path))?.len() == 0;
    let mut w = BufWriter::new(file);
    if fresh {
        write_header(&mut w).map_err(Error::io(path))?;
    }
    for r in records {
        write_record(&mut w, r).map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

fn relocate(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        e => e,
    }
}

pub fn load_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let file = File::open(path).map_err(Error::io(path))?;
    read_records(BufReader::new(file), path)
}

/// Parses records; `path` only labels error messages.
pub fn read_records<R: BufRead>(reader: R, path: &Path) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    let mut saw_version = false;
    for line in tsv::numbered_lines(reader, path) {
        let (n, line) = line?;
        if let Some(meta) = line.strip_prefix('#') {
            if meta.starts_with("htl-records") {
                if line != RECORDS_VERSION {
                    return Err(Error::format(path, n, format!("unsupported records version {line:?}")));
                }
                saw_version = true;
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !saw_version {
            return Err(Error::format(path, n, format!("record before the {RECORDS_VERSION:?} line")));
        }
        out.push(parse_record(&line, path, n)?);
    }
    Ok(out)
}

fn parse_record(line: &str, path: &Path, n: usize) -> Result<EvalRecord> {
    let cells: Vec<&str> = line.split('\t').collect();
    if cells.len() != COLUMNS.len() {
        return Err(Error::format(path, n, format!("expected {} columns, found {}", COLUMNS.len(), cells.len())));
    }
    let bad = |i: usize| Error::format(path, n, format!("column {}: invalid value {:?}", COLUMNS[i], cells[i]));
    let value: f64 = tsv::cell(path, n, "value", cells[6])?;
    let c: f64 = tsv::cell(path, n, "C", cells[8])?;
    let gamma = match cells[9] {
        NO_GAMMA => None,
        g => Some(tsv::cell::<f64>(path, n, "gamma", g)?),
    };
    Ok(EvalRecord {
        setting: Setting::parse(cells[0]).ok_or_else(|| bad(0))?,
        pairing: Pairing::parse(cells[1]).ok_or_else(|| bad(1))?,
        target: cells[2].to_string(),
        method: Method::parse(cells[3]).ok_or_else(|| bad(3))?,
        size: Size::parse(cells[4]).ok_or_else(|| bad(4))?,
        metric: Metric::parse(cells[5]).ok_or_else(|| bad(5))?,
        value,
        seed: tsv::cell(path, n, "seed", cells[7])?,
        c,
        gamma,
    })
}
