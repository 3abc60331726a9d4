//! Dataset container: `manifest.json` listing subjects, each stored as a
//! JSON metadata sidecar plus a tab-separated sample table.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use htl_core::features::{EmgRecording, SubjectKind};
use htl_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{json, tsv};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "htl-dataset";
pub const METADATA_FORMAT: &str = "htl-emg-meta";
pub const TABLE_VERSION: &str = "#htl-emg-table v1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub kind: SubjectKind,
    /// Sample table, relative to the dataset directory.
    pub file: String,
    /// Metadata sidecar, relative to the dataset directory.
    pub metadata: String,
    pub channels: usize,
    pub sampling_rate: f64,
    pub movements: u32,
    pub repetitions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMetadata {
    pub format: String,
    pub version: u32,
    pub subject_id: String,
    pub subject_kind: SubjectKind,
    pub sampling_rate: f64,
    pub channels: usize,
    pub movements: u32,
    pub repetitions: u32,
}

impl DatasetManifest {
    pub fn new(subjects: Vec<SubjectEntry>) -> Result<Self> {
        let m = DatasetManifest {
            format: MANIFEST_FORMAT.into(),
            version: VERSION,
            subjects,
        };
        m.validate()?;
        Ok(m)
    }

    /// Unique ids; one movement count and channel count for all subjects.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for s in &self.subjects {
            tsv::check_field(&s.id, "subject id")?;
            if !ids.insert(&s.id) {
                return Err(invalid(format!("duplicate subject id {}", s.id)));
            }
        }
        if let Some(first) = self.subjects.first() {
            for s in &self.subjects {
                if s.movements != first.movements || s.channels != first.channels {
                    return Err(invalid(format!(
                        "subject {} has {} movements and {} channels, but {} has {} and {}",
                        s.id, s.movements, s.channels, first.id, first.movements, first.channels
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m: DatasetManifest = json::read(&dir.join(MANIFEST_FILE), MANIFEST_FORMAT, VERSION)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        json::write(&dir.join(MANIFEST_FILE), self)
    }
}

fn invalid(message: String) -> Error {
    htl_core::Error::InvalidRecording(message).into()
}

/// Reads and validates one subject, cross-checking table, sidecar and entry.
pub fn load_subject(dir: &Path, entry: &SubjectEntry) -> Result<EmgRecording> {
    let meta: SubjectMetadata = json::read(&dir.join(&entry.metadata), METADATA_FORMAT, VERSION)?;
    if meta.subject_id != entry.id
        || meta.subject_kind != entry.kind
        || meta.channels != entry.channels
        || meta.movements != entry.movements
        || meta.repetitions != entry.repetitions
        || meta.sampling_rate != entry.sampling_rate
    {
        return Err(invalid(format!("metadata of {} disagrees with the manifest entry", entry.id)));
    }
    let path = dir.join(&entry.file);
    let file = File::open(&path).map_err(Error::io(&path))?;
    let (samples, stimulus, repetition) = read_table(BufReader::new(file), &path, meta.channels)?;
    // Data rows start on line 3.
    for (row, (&s, &r)) in stimulus.iter().zip(&repetition).enumerate() {
        if s > meta.movements {
            return Err(Error::format(
                &path,
                row + 3,
                format!("row {row}: column stimulus: {s} outside 0..={}", meta.movements),
            ));
        }
        if r > meta.repetitions {
            return Err(Error::format(
                &path,
                row + 3,
                format!("row {row}: column repetition: {r} outside 0..={}", meta.repetitions),
            ));
        }
    }
    let rec = EmgRecording {
        subject_id: meta.subject_id,
        subject_kind: meta.subject_kind,
        sampling_rate: meta.sampling_rate,
        movements: meta.movements,
        repetitions: meta.repetitions,
        samples,
        stimulus,
        repetition,
    };
    Ok(rec.validated()?)
}

pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<EmgRecording>)> {
    let manifest = DatasetManifest::load(dir)?;
    let recs = manifest
        .subjects
        .iter()
        .map(|e| load_subject(dir, e))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, recs))
}

/// Writes `<id>.json` and `<id>.tsv` into `dir`.
pub fn save_subject(dir: &Path, rec: &EmgRecording) -> Result<SubjectEntry> {
    tsv::check_field(&rec.subject_id, "subject id")?;
    let rec = rec.clone().validated()?;
    let entry = SubjectEntry {
        id: rec.subject_id.clone(),
        kind: rec.subject_kind,
        file: format!("{}.tsv", rec.subject_id),
        metadata: format!("{}.json", rec.subject_id),
        channels: rec.channels(),
        sampling_rate: rec.sampling_rate,
        movements: rec.movements,
        repetitions: rec.repetitions,
    };
    let meta = SubjectMetadata {
        format: METADATA_FORMAT.into(),
        version: VERSION,
        subject_id: rec.subject_id.clone(),
        subject_kind: rec.subject_kind,
        sampling_rate: rec.sampling_rate,
        channels: rec.channels(),
        movements: rec.movements,
        repetitions: rec.repetitions,
    };
    json::write(&dir.join(&entry.metadata), &meta)?;
    let path = dir.join(&entry.file);
    let file = File::create(&path).map_err(Error::io(&path))?;
    let mut w = BufWriter::new(file);
    write_table(&mut w, &rec).map_err(Error::io(&path))?;
    w.flush().map_err(Error::io(&path))?;
    Ok(entry)
}

/// Writes every recording and the manifest, creating `dir` if needed.
pub fn save_dataset(dir: &Path, recs: &[EmgRecording]) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let entries = recs.iter().map(|r| save_subject(dir, r)).collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(entries)?;
    manifest.save(dir)?;
    Ok(manifest)
}

pub fn write_table<W: Write>(w: &mut W, rec: &EmgRecording) -> std::io::Result<()> {
    writeln!(w, "{TABLE_VERSION}")?;
    let mut header = vec!["time".to_string()];
    header.extend((1..=rec.channels()).map(|c| format!("ch{c}")));
    header.push("stimulus".into());
    header.push("repetition".into());
    tsv::write_row(w, &header)?;
    for t in 0..rec.len() {
        write!(w, "{t}")?;
        for v in rec.samples.row(t) {
            write!(w, "\t{v}")?;
        }
        writeln!(w, "\t{}\t{}", rec.stimulus[t], rec.repetition[t])?;
    }
    Ok(())
}

/// Parses a sample table with `channels` signal columns.
pub fn read_table<R: std::io::BufRead>(
    reader: R,
    path: &Path,
    channels: usize,
) -> Result<(Matrix, Vec<u32>, Vec<u32>)> {
    let mut lines = tsv::numbered_lines(reader, path);
    tsv::expect_version(path, lines.next(), TABLE_VERSION)?;
    let mut expected = vec!["time".to_string()];
    expected.extend((1..=channels).map(|c| format!("ch{c}")));
    expected.push("stimulus".into());
    expected.push("repetition".into());
    let (n, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::format(path, 2, "missing column header"))?;
    let found: Vec<&str> = header.split('\t').collect();
    if found != expected {
        return Err(Error::format(path, n, format!("expected columns {}, found {}", expected.join(" "), found.join(" "))));
    }
    let mut samples = Matrix::empty(channels);
    let mut stimulus = Vec::new();
    let mut repetition = Vec::new();
    let mut row = vec![0.0f64; channels];
    for line in lines {
        let (n, line) = line?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != expected.len() {
            return Err(Error::format(path, n, format!("expected {} columns, found {}", expected.len(), cells.len())));
        }
        let t: usize = tsv::cell(path, n, "time", cells[0])?;
        if t != stimulus.len() {
            return Err(Error::format(path, n, format!("column time: expected index {}, found {t}", stimulus.len())));
        }
        for (c, v) in row.iter_mut().enumerate() {
            *v = tsv::cell(path, n, &expected[c + 1], cells[c + 1])?;
            if !v.is_finite() {
                return Err(Error::format(path, n, format!("column {}: non-finite value", expected[c + 1])));
            }
        }
        samples.push_row(&row)?;
        stimulus.push(tsv::cell(path, n, "stimulus", cells[channels + 1])?);
        repetition.push(tsv::cell(path, n, "repetition", cells[channels + 2])?);
    }
    Ok((samples, stimulus, repetition))
}
