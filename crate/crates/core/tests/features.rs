use htl_core::features::{
    extract_features, extract_features_with_reference, segment_windows, EmgRecording, FeatureKind, Standardizer,
    SubjectKind, WindowSpec,
};
use htl_core::Matrix;
use proptest::prelude::*;

/// Two repetitions of movements 1 and 2 with rest in between, 100 Hz.
fn recording(signal: &[f64], channels: usize) -> EmgRecording {
    let n = signal.len() / channels;
    let run = n / 8;
    let mut stimulus = Vec::with_capacity(n);
    let mut repetition = Vec::with_capacity(n);
    for i in 0..n {
        let block = (i / run).min(7);
        let (s, r) = [(1, 1), (0, 0), (2, 1), (0, 0), (1, 2), (0, 0), (2, 2), (0, 0)][block];
        stimulus.push(s);
        repetition.push(r);
    }
    EmgRecording {
        subject_id: "s".into(),
        subject_kind: SubjectKind::Intact,
        sampling_rate: 100.0,
        movements: 2,
        repetitions: 2,
        samples: Matrix::from_vec(n, channels, signal.to_vec()).unwrap(),
        stimulus,
        repetition,
    }
    .validated()
    .unwrap()
}

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 2 * 320)
}

const SPEC: WindowSpec = WindowSpec {
    length_ms: 200.0,
    increment_ms: 50.0,
};

fn features(rec: &EmgRecording, kind: FeatureKind) -> Matrix {
    extract_features(&segment_windows(rec, &SPEC).unwrap(), kind).unwrap().features
}

proptest! {
    #[test]
    fn windows_stay_inside_constant_runs(sig in signal()) {
        let rec = recording(&sig, 2);
        let w = segment_windows(&rec, &SPEC).unwrap();
        prop_assert!(!w.is_empty());
        for ((&start, &label), &rep) in w.starts.iter().zip(&w.labels).zip(&w.repetitions) {
            prop_assert!(start + w.length <= rec.len());
            for t in start..start + w.length {
                prop_assert_eq!(rec.stimulus[t], label);
                prop_assert_eq!(rec.repetition[t], rep);
            }
        }
    }

    #[test]
    fn amplitude_scaling(sig in signal(), a in 0.1f64..5.0) {
        let scaled: Vec<f64> = sig.iter().map(|v| a * v).collect();
        let (r, s) = (recording(&sig, 2), recording(&scaled, 2));
        for (kind, power) in [(FeatureKind::Mav, 1), (FeatureKind::Wl, 1), (FeatureKind::Var, 2), (FeatureKind::Mdwt, 1)] {
            let base = features(&r, kind);
            let expected: Vec<f64> = base.data().iter().map(|v| v * a.powi(power)).collect();
            for (got, want) in features(&s, kind).data().iter().zip(&expected) {
                prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{:?}", kind);
            }
        }
    }

    #[test]
    fn time_domain_features_are_nonnegative(sig in signal()) {
        let rec = recording(&sig, 2);
        for kind in [FeatureKind::Mav, FeatureKind::Var, FeatureKind::Wl, FeatureKind::Mdwt] {
            prop_assert!(features(&rec, kind).data().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn averaged_features_ignore_non_reference_windows(sig in signal(), bump in 0.5f64..3.0) {
        // Altering repetition 2 must leave repetition 1 features untouched.
        let rec = recording(&sig, 2);
        let mut other = rec.clone();
        for t in 0..other.len() {
            if other.repetition[t] == 2 {
                for c in 0..2 {
                    other.samples[(t, c)] *= bump;
                }
            }
        }
        let reference = |r: u32| r == 1;
        let a = extract_features_with_reference(&segment_windows(&rec, &SPEC).unwrap(), FeatureKind::AvgMvw, reference).unwrap();
        let b = extract_features_with_reference(&segment_windows(&other, &SPEC).unwrap(), FeatureKind::AvgMvw, reference).unwrap();
        for i in 0..a.len() {
            if a.repetitions[i] == 1 {
                prop_assert_eq!(a.features.row(i), b.features.row(i));
            }
        }
    }

    #[test]
    fn standardizer_is_affine_invariant(sig in signal(), a in 0.5f64..4.0, b in -3.0f64..3.0) {
        let fm = extract_features(&segment_windows(&recording(&sig, 2), &SPEC).unwrap(), FeatureKind::Mav).unwrap();
        let mut shifted = fm.clone();
        shifted.features.data_mut().iter_mut().for_each(|v| *v = a * *v + b);
        let x = Standardizer::fit(&fm).unwrap().apply(&fm).unwrap().features;
        let y = Standardizer::fit(&shifted).unwrap().apply(&shifted).unwrap().features;
        prop_assert!(x.max_abs_diff(&y) < 1e-8);
    }
}

#[test]
fn reference_without_windows_is_an_error() {
    let sig: Vec<f64> = (0..640).map(|i| (i as f64 * 0.37).sin()).collect();
    let rec = recording(&sig, 2);
    let w = segment_windows(&rec, &SPEC).unwrap();
    assert!(extract_features_with_reference(&w, FeatureKind::AvgMvw, |r| r == 9).is_err());
    assert!(extract_features_with_reference(&w, FeatureKind::Mav, |r| r == 9).is_ok());
}
