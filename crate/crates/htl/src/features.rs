//! Feature matrices on disk, one tab-separated file per subject.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use htl_core::features::{FeatureKind, FeatureMatrix, SubjectKind};
use htl_core::Matrix;

use crate::error::{Error, Result};
use crate::tsv;

pub const FEATURES_VERSION: &str = "#htl-features v1";
pub const FEATURES_SUFFIX: &str = ".features.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectFeatures {
    pub subject_id: String,
    pub kind: SubjectKind,
    pub feature_kind: FeatureKind,
    pub features: FeatureMatrix,
}

pub fn feature_path(dir: &Path, subject_id: &str) -> PathBuf {
    dir.join(format!("{subject_id}{FEATURES_SUFFIX}"))
}

pub fn write_features<W: Write>(w: &mut W, sf: &SubjectFeatures) -> std::io::Result<()> {
    writeln!(w, "{FEATURES_VERSION}")?;
    writeln!(w, "#subject\t{}\t{}\t{}", sf.subject_id, sf.kind.as_str(), sf.feature_kind.as_str())?;
    let mut header = vec!["#label".to_string(), "repetition".to_string()];
    header.extend((1..=sf.features.dim()).map(|j| format!("f{j}")));
    tsv::write_row(w, &header)?;
    let fm = &sf.features;
    for i in 0..fm.len() {
        write!(w, "{}\t{}", fm.labels[i], fm.repetitions[i])?;
        for v in fm.features.row(i) {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_features(dir: &Path, sf: &SubjectFeatures) -> Result<PathBuf> {
    tsv::check_field(&sf.subject_id, "subject id")?;
    let path = feature_path(dir, &sf.subject_id);
    let file = File::create(&path).map_err(Error::io(&path))?;
    let mut w = BufWriter::new(file);
    write_features(&mut w, sf).map_err(Error::io(&path))?;
    w.flush().map_err(Error::io(&path))?;
    Ok(path)
}

pub fn read_features<R: BufRead>(reader: R, path: &Path) -> Result<SubjectFeatures> {
    let mut lines = tsv::numbered_lines(reader, path);
    tsv::expect_version(path, lines.next(), FEATURES_VERSION)?;
    let (n, subject) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::format(path, 2, "missing subject line"))?;
    let parts: Vec<&str> = subject.split('\t').collect();
    if parts.len() != 4 || parts[0] != "#subject" {
        return Err(Error::format(path, n, "expected `#subject <id> <kind> <feature kind>`"));
    }
    let kind = SubjectKind::parse(parts[2]).ok_or_else(|| Error::format(path, n, format!("unknown subject kind {:?}", parts[2])))?;
    let feature_kind =
        FeatureKind::parse(parts[3]).ok_or_else(|| Error::format(path, n, format!("unknown feature kind {:?}", parts[3])))?;
    let (n, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::format(path, 3, "missing column header"))?;
    let columns: Vec<&str> = header.split('\t').collect();
    if columns.len() < 3 || columns[0] != "#label" || columns[1] != "repetition" {
        return Err(Error::format(path, n, "expected columns `#label repetition f1 ...`"));
    }
    let dim = columns.len() - 2;
    let mut x = Matrix::empty(dim);
    let mut labels = Vec::new();
    let mut reps = Vec::new();
    let mut row = vec![0.0; dim];
    for line in lines {
        let (n, line) = line?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() {
            return Err(Error::format(path, n, format!("expected {} columns, found {}", columns.len(), cells.len())));
        }
        labels.push(tsv::cell(path, n, "label", cells[0])?);
        reps.push(tsv::cell(path, n, "repetition", cells[1])?);
        for (j, v) in row.iter_mut().enumerate() {
            *v = tsv::cell(path, n, columns[j + 2], cells[j + 2])?;
        }
        x.push_row(&row)?;
    }
    Ok(SubjectFeatures {
        subject_id: parts[1].to_string(),
        kind,
        feature_kind,
        features: FeatureMatrix::new(x, labels, reps)?,
    })
}

pub fn load_features(path: &Path) -> Result<SubjectFeatures> {
    let file = File::open(path).map_err(Error::io(path))?;
    read_features(BufReader::new(file), path)
}

/// Every feature file in `dir`, ordered by subject id.
pub fn load_feature_dir(dir: &Path) -> Result<Vec<SubjectFeatures>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .map(|e| e.map(|e| e.path()).map_err(Error::io(dir)))
        .collect::<Result<_>>()?;
    paths.retain(|p| p.to_string_lossy().ends_with(FEATURES_SUFFIX));
    paths.sort();
    let mut out = paths.iter().map(|p| load_features(p)).collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    Ok(out)
}
