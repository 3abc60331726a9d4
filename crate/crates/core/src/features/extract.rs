use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dwt::{dwt_marginals, Db7, DWT_LEVELS};
use super::{FeatureMatrix, WindowSet};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Mean absolute value.
    Mav,
    /// Unbiased sample variance.
    Var,
    /// Waveform length.
    Wl,
    /// Average of MAV, VAR and WL after per-type z-scoring over the batch.
    AvgMvw,
    /// Marginal discrete wavelet transform.
    Mdwt,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mav => "mav",
            FeatureKind::Var => "var",
            FeatureKind::Wl => "wl",
            FeatureKind::AvgMvw => "avg",
            FeatureKind::Mdwt => "mdwt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "mav" => FeatureKind::Mav,
            "var" => FeatureKind::Var,
            "wl" => FeatureKind::Wl,
            "avg" => FeatureKind::AvgMvw,
            "mdwt" => FeatureKind::Mdwt,
            _ => return None,
        })
    }

    /// Features per channel.
    pub fn per_channel(self) -> usize {
        match self {
            FeatureKind::Mdwt => DWT_LEVELS + 1,
            _ => 1,
        }
    }
}

pub(crate) fn mav(v: &[f64]) -> f64 {
    v.iter().map(|x| libm::fabs(*x)).sum::<f64>() / v.len() as f64
}

pub(crate) fn var(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

pub(crate) fn wl(v: &[f64]) -> f64 {
    v.windows(2).map(|p| libm::fabs(p[1] - p[0])).sum()
}

fn time_domain(windows: &WindowSet<'_>, f: fn(&[f64]) -> f64) -> Matrix {
    let ch = windows.channels();
    let mut out = Matrix::zeros(windows.len(), ch);
    let mut buf = Vec::with_capacity(windows.length);
    for w in 0..windows.len() {
        for c in 0..ch {
            windows.channel_into(w, c, &mut buf);
            out[(w, c)] = f(&buf);
        }
    }
    out
}

/// Column-wise z-score of `m` with statistics from the rows flagged in
/// `reference`; constant columns become 0.
fn zscore_columns(m: &mut Matrix, reference: &[bool]) {
    let n = reference.iter().filter(|r| **r).count();
    for c in 0..m.cols() {
        let col: Vec<f64> = m.column(c).into_iter().zip(reference).filter(|(_, r)| **r).map(|(v, _)| v).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            libm::sqrt(col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0))
        } else {
            0.0
        };
        let constant = sd <= 1e-12 * libm::fabs(mean).max(1.0);
        for r in 0..m.rows() {
            m[(r, c)] = if constant { 0.0 } else { (m[(r, c)] - mean) / sd };
        }
    }
}

pub fn extract_features(windows: &WindowSet<'_>, kind: FeatureKind) -> Result<FeatureMatrix> {
    extract_features_with_reference(windows, kind, |_| true)
}

/// As [`extract_features`], but the batch statistics of [`FeatureKind::AvgMvw`]
/// come only from windows whose repetition satisfies `reference`. Other
/// kinds are per-window and ignore it.
pub fn extract_features_with_reference(
    windows: &WindowSet<'_>,
    kind: FeatureKind,
    reference: impl Fn(u32) -> bool,
) -> Result<FeatureMatrix> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("feature extraction"));
    }
    if windows.length < 2 && matches!(kind, FeatureKind::Var | FeatureKind::Wl | FeatureKind::AvgMvw) {
        return Err(Error::TooFewSamples {
            context: "VAR/WL window",
            needed: 2,
            found: windows.length,
        });
    }
    let features = match kind {
        FeatureKind::Mav => time_domain(windows, mav),
        FeatureKind::Var => time_domain(windows, var),
        FeatureKind::Wl => time_domain(windows, wl),
        FeatureKind::AvgMvw => {
            let mask: Vec<bool> = windows.repetitions.iter().map(|&r| reference(r)).collect();
            if !mask.contains(&true) {
                return Err(Error::EmptyInput("feature reference windows"));
            }
            let mut parts = [time_domain(windows, mav), time_domain(windows, var), time_domain(windows, wl)];
            for p in parts.iter_mut() {
                zscore_columns(p, &mask);
            }
            let mut avg = Matrix::zeros(windows.len(), windows.channels());
            for r in 0..avg.rows() {
                for c in 0..avg.cols() {
                    avg[(r, c)] = (parts[0][(r, c)] + parts[1][(r, c)] + parts[2][(r, c)]) / 3.0;
                }
            }
            avg
        }
        FeatureKind::Mdwt => {
            if windows.length < Db7::LEN {
                return Err(Error::WindowTooShort {
                    required: Db7::LEN,
                    found: windows.length,
                });
            }
            let ch = windows.channels();
            let per = DWT_LEVELS + 1;
            let mut out = Matrix::zeros(windows.len(), ch * per);
            let mut buf = Vec::with_capacity(windows.length);
            for w in 0..windows.len() {
                for c in 0..ch {
                    windows.channel_into(w, c, &mut buf);
                    let m = dwt_marginals(&buf)?;
                    out.row_mut(w)[c * per..(c + 1) * per].copy_from_slice(&m);
                }
            }
            out
        }
    };
    FeatureMatrix::new(features, windows.labels.clone(), windows.repetitions.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{segment_windows, EmgRecording, SubjectKind, WindowSpec};
    use alloc::vec;

    #[test]
    fn defining_formulas() {
        assert_eq!(mav(&[1.0, -1.0, 2.0, -2.0]), 1.5);
        assert_eq!(wl(&[3.0; 7]), 0.0);
        // mean 0, squares sum 10, L-1 = 3
        assert!((var(&[1.0, -1.0, 2.0, -2.0]) - 10.0 / 3.0).abs() < 1e-15);
    }

    fn rec(samples: Matrix) -> EmgRecording {
        let n = samples.rows();
        EmgRecording {
            subject_id: "x".into(),
            subject_kind: SubjectKind::Intact,
            sampling_rate: 100.0,
            movements: 1,
            repetitions: 1,
            samples,
            stimulus: vec![1; n],
            repetition: vec![1; n],
        }
    }

    #[test]
    fn all_kinds_have_expected_width() {
        let mut s = Matrix::zeros(40, 3);
        for t in 0..40 {
            for c in 0..3 {
                s[(t, c)] = libm::sin(t as f64 * (c + 1) as f64);
            }
        }
        let r = rec(s);
        let w = segment_windows(&r, &WindowSpec::default()).unwrap();
        for kind in [FeatureKind::Mav, FeatureKind::Var, FeatureKind::Wl, FeatureKind::AvgMvw, FeatureKind::Mdwt] {
            let fm = extract_features(&w, kind).unwrap();
            assert_eq!(fm.dim(), 3 * kind.per_channel());
            assert_eq!(fm.len(), 21);
        }
    }

    #[test]
    fn mdwt_rejects_short_windows() {
        let r = rec(Matrix::zeros(40, 1));
        let spec = WindowSpec { length_ms: 100.0, increment_ms: 10.0 };
        let w = segment_windows(&r, &spec).unwrap();
        assert!(matches!(
            extract_features(&w, FeatureKind::Mdwt),
            Err(Error::WindowTooShort { required: 14, found: 10 })
        ));
    }

    #[test]
    fn mdwt_of_silence_is_zero() {
        let r = rec(Matrix::zeros(30, 2));
        let w = segment_windows(&r, &WindowSpec::default()).unwrap();
        let fm = extract_features(&w, FeatureKind::Mdwt).unwrap();
        assert!(fm.features.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [FeatureKind::Mav, FeatureKind::Var, FeatureKind::Wl, FeatureKind::AvgMvw, FeatureKind::Mdwt] {
            assert_eq!(FeatureKind::parse(kind.as_str()), Some(kind));
        }
    }
}
