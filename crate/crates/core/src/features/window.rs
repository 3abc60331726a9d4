use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EmgRecording;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length_ms: f64,
    pub increment_ms: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            length_ms: 200.0,
            increment_ms: 10.0,
        }
    }
}

impl WindowSpec {
    /// Window length and increment in samples at `rate` Hz.
    pub fn in_samples(&self, rate: f64) -> Result<(usize, usize)> {
        if !(self.increment_ms > 0.0) || self.increment_ms > self.length_ms {
            return Err(Error::InvalidParameter(alloc::format!(
                "window increment {} ms must lie in (0, {}]",
                self.increment_ms,
                self.length_ms
            )));
        }
        let length = libm::round(self.length_ms * rate / 1000.0);
        let step = libm::round(self.increment_ms * rate / 1000.0).max(1.0);
        if !(length >= 2.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "window of {} ms at {rate} Hz spans fewer than 2 samples",
                self.length_ms
            )));
        }
        Ok((length as usize, step as usize))
    }
}

/// Windows over one recording, each fully inside a constant
/// (stimulus, repetition) run.
#[derive(Debug, Clone)]
pub struct WindowSet<'a> {
    pub recording: &'a EmgRecording,
    pub length: usize,
    pub starts: Vec<usize>,
    pub labels: Vec<u32>,
    pub repetitions: Vec<u32>,
}

impl<'a> WindowSet<'a> {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.recording.channels()
    }

    /// Copies channel `c` of window `w` into `buf`.
    pub fn channel_into(&self, w: usize, c: usize, buf: &mut Vec<f64>) {
        buf.clear();
        let start = self.starts[w];
        buf.extend((start..start + self.length).map(|t| self.recording.samples[(t, c)]));
    }
}

pub fn segment_windows<'a>(rec: &'a EmgRecording, spec: &WindowSpec) -> Result<WindowSet<'a>> {
    let (length, step) = spec.in_samples(rec.sampling_rate)?;
    let mut set = WindowSet {
        recording: rec,
        length,
        starts: Vec::new(),
        labels: Vec::new(),
        repetitions: Vec::new(),
    };
    let n = rec.len();
    let mut run_start = 0;
    while run_start < n {
        let key = (rec.stimulus[run_start], rec.repetition[run_start]);
        let mut run_end = run_start + 1;
        while run_end < n && (rec.stimulus[run_end], rec.repetition[run_end]) == key {
            run_end += 1;
        }
        let mut s = run_start;
        while s + length <= run_end {
            set.starts.push(s);
            set.labels.push(key.0);
            set.repetitions.push(key.1);
            s += step;
        }
        run_start = run_end;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SubjectKind;
    use crate::linalg::Matrix;
    use alloc::vec;

    fn recording(stimulus: Vec<u32>, repetition: Vec<u32>) -> EmgRecording {
        let n = stimulus.len();
        EmgRecording {
            subject_id: "t".into(),
            subject_kind: SubjectKind::Intact,
            sampling_rate: 100.0,
            movements: 3,
            repetitions: 3,
            samples: Matrix::zeros(n, 2),
            stimulus,
            repetition,
        }
    }

    #[test]
    fn constant_label_second() {
        let rec = recording(vec![1; 100], vec![1; 100]);
        let w = segment_windows(&rec, &WindowSpec::default()).unwrap();
        assert_eq!((w.length, w.len()), (20, 81));
        assert!(w.starts.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn too_short_gives_nothing() {
        let rec = recording(vec![1; 10], vec![1; 10]);
        assert!(segment_windows(&rec, &WindowSpec::default()).unwrap().is_empty());
    }

    #[test]
    fn label_boundary_is_never_spanned() {
        let mut stim = vec![1; 50];
        stim.extend(vec![2; 50]);
        let rec = recording(stim, vec![1; 100]);
        let w = segment_windows(&rec, &WindowSpec::default()).unwrap();
        assert_eq!(w.len(), 62);
        for (&s, &l) in w.starts.iter().zip(&w.labels) {
            assert!(rec.stimulus[s..s + w.length].iter().all(|&x| x == l));
        }
    }

    #[test]
    fn repetition_boundary_splits_runs() {
        let mut reps = vec![1; 50];
        reps.extend(vec![2; 50]);
        let rec = recording(vec![1; 100], reps);
        assert_eq!(segment_windows(&rec, &WindowSpec::default()).unwrap().len(), 62);
    }

    #[test]
    fn invalid_specs() {
        let bad = WindowSpec { length_ms: 200.0, increment_ms: 300.0 };
        assert!(bad.in_samples(100.0).is_err());
        let tiny = WindowSpec { length_ms: 10.0, increment_ms: 10.0 };
        assert!(tiny.in_samples(100.0).is_err());
    }
}
