//! Synthetic multi-subject cohorts with controllable inter-subject shift.
//!
//! Every subject shares the class prototypes `mu_g`. Subject `s` sees them
//! through its own mixing `A_s = I + eps * R_s`. Each repetition of a movement
//! is a burst whose per-channel amplitude is `A_s (mu_g * gain * envelope(t))`,
//! modulating a unit-variance carrier as surface EMG does, plus additive
//! noise; bursts alternate with rest segments that carry only noise.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EmgRecording, SubjectKind, REST};
use crate::linalg::Matrix;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub intact: usize,
    pub amputee: usize,
    pub channels: usize,
    pub movements: u32,
    pub repetitions: u32,
    pub sampling_rate: f64,
    pub burst_samples: usize,
    pub rest_samples: usize,
    /// Inter-subject shift `eps`.
    pub shift: f64,
    pub noise_intact: f64,
    pub noise_amputee: f64,
    /// Gain applied to the last `attenuated_channels` channels of amputees.
    pub amputee_attenuation: f64,
    pub attenuated_channels: usize,
    /// Relative standard deviation of the per-repetition burst gain.
    pub repetition_jitter: f64,
    /// Draw every subject's randomness from one shared stream.
    pub shared_subject_streams: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            intact: 4,
            amputee: 2,
            channels: 8,
            movements: 8,
            repetitions: 6,
            sampling_rate: 100.0,
            burst_samples: 100,
            rest_samples: 50,
            shift: 0.2,
            noise_intact: 0.05,
            noise_amputee: 0.15,
            amputee_attenuation: 0.5,
            attenuated_channels: 2,
            repetition_jitter: 0.1,
            shared_subject_streams: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("channels", self.channels),
            ("movements", self.movements as usize),
            ("repetitions", self.repetitions as usize),
            ("burst_samples", self.burst_samples),
            ("subjects", self.intact + self.amputee),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
        }
        let reals = [
            ("shift", self.shift),
            ("noise_intact", self.noise_intact),
            ("noise_amputee", self.noise_amputee),
            ("amputee_attenuation", self.amputee_attenuation),
            ("repetition_jitter", self.repetition_jitter),
        ];
        if let Some((name, v)) = reals.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
        }
        if !(self.sampling_rate > 0.0) {
            return Err(Error::InvalidParameter("sampling_rate must be positive".into()));
        }
        if self.attenuated_channels > self.channels {
            return Err(Error::InvalidParameter("more attenuated channels than channels".into()));
        }
        Ok(())
    }

    /// Subject ids and kinds in generation order: intact first.
    pub fn subjects(&self) -> Vec<(alloc::string::String, SubjectKind)> {
        let intact = (1..=self.intact).map(|i| (format!("intact-{i:02}"), SubjectKind::Intact));
        let amputee = (1..=self.amputee).map(|i| (format!("amputee-{i:02}"), SubjectKind::Amputee));
        intact.chain(amputee).collect()
    }
}

const PROTOTYPE_KEY: u64 = 0x5052_4f54;
const SUBJECT_KEY: u64 = 0x5355_424a;

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Raised-cosine ramps over the first and last fifth of a burst.
fn envelope(t: usize, len: usize) -> f64 {
    let ramp = (len / 5).max(1) as f64;
    let t = t as f64;
    let from_end = (len - 1) as f64 - t;
    let edge = t.min(from_end);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * libm::cos(core::f64::consts::PI * (edge + 0.5) / ramp)
    }
}

fn prototypes(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    let mut rng = rng::derived_rng(cfg.seed, &[PROTOTYPE_KEY]);
    (0..cfg.movements)
        .map(|_| (0..cfg.channels).map(|_| rng.random_range(0.2..1.5)).collect())
        .collect()
}

pub fn generate_subject(cfg: &SynthConfig, index: usize, id: &str, kind: SubjectKind, protos: &[Vec<f64>]) -> EmgRecording {
    let stream = if cfg.shared_subject_streams { 0 } else { index as u64 + 1 };
    let mut rng = rng::derived_rng(cfg.seed, &[SUBJECT_KEY, stream]);
    let ch = cfg.channels;

    let mut mixing = Matrix::identity(ch);
    let scale = cfg.shift / libm::sqrt(ch as f64);
    for i in 0..ch {
        for j in 0..ch {
            mixing[(i, j)] += scale * normal(&mut rng);
        }
    }
    let (noise, attenuation) = match kind {
        SubjectKind::Intact => (cfg.noise_intact, 1.0),
        SubjectKind::Amputee => (cfg.noise_amputee, cfg.amputee_attenuation),
    };
    let channel_gain: Vec<f64> = (0..ch)
        .map(|c| if c >= ch - cfg.attenuated_channels { attenuation } else { 1.0 })
        .collect();

    let per_rep = cfg.burst_samples + cfg.rest_samples;
    let total = cfg.rest_samples + cfg.movements as usize * cfg.repetitions as usize * per_rep;
    let mut samples = Matrix::zeros(total, ch);
    let mut stimulus = Vec::with_capacity(total);
    let mut repetition = Vec::with_capacity(total);
    let mut row = 0;

    let rest = |samples: &mut Matrix, rng: &mut Rng, row: &mut usize, rep: u32, stimulus: &mut Vec<u32>, repetition: &mut Vec<u32>| {
        for _ in 0..cfg.rest_samples {
            for c in 0..ch {
                samples[(*row, c)] = noise * normal(rng);
            }
            stimulus.push(REST);
            repetition.push(rep);
            *row += 1;
        }
    };

    rest(&mut samples, &mut rng, &mut row, 0, &mut stimulus, &mut repetition);
    let mut amplitude = alloc::vec![0.0; ch];
    for (g, mu) in protos.iter().enumerate() {
        for r in 1..=cfg.repetitions {
            let gain = (1.0 + cfg.repetition_jitter * normal(&mut rng)).max(0.05);
            for t in 0..cfg.burst_samples {
                let env = envelope(t, cfg.burst_samples) * gain;
                let carrier: Vec<f64> = (0..ch).map(|c| mu[c] * env * normal(&mut rng)).collect();
                for (c, a) in amplitude.iter_mut().enumerate() {
                    *a = crate::linalg::dot(mixing.row(c), &carrier);
                }
                for c in 0..ch {
                    samples[(row, c)] = channel_gain[c] * amplitude[c] + noise * normal(&mut rng);
                }
                stimulus.push(g as u32 + 1);
                repetition.push(r);
                row += 1;
            }
            rest(&mut samples, &mut rng, &mut row, r, &mut stimulus, &mut repetition);
        }
    }

    EmgRecording {
        subject_id: id.into(),
        subject_kind: kind,
        sampling_rate: cfg.sampling_rate,
        movements: cfg.movements,
        repetitions: cfg.repetitions,
        samples,
        stimulus,
        repetition,
    }
}

/// All subjects of the cohort, intact first.
pub fn generate_synthetic_cohort(cfg: &SynthConfig) -> Result<Vec<EmgRecording>> {
    cfg.validate()?;
    let protos = prototypes(cfg);
    cfg.subjects()
        .iter()
        .enumerate()
        .map(|(i, (id, kind))| generate_subject(cfg, i, id, *kind, &protos).validated())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            intact: 2,
            amputee: 1,
            channels: 3,
            movements: 2,
            repetitions: 2,
            burst_samples: 30,
            rest_samples: 10,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn layout_and_labels() {
        let cohort = generate_synthetic_cohort(&small()).unwrap();
        assert_eq!(cohort.len(), 3);
        let r = &cohort[0];
        assert_eq!(r.len(), 10 + 2 * 2 * 40);
        assert_eq!(r.stimulus.iter().filter(|&&s| s == 1).count(), 60);
        assert_eq!(r.repetition[..10], [0; 10]);
        assert_eq!(cohort[2].subject_kind, SubjectKind::Amputee);
        assert_eq!(cohort[2].subject_id, "amputee-01");
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_synthetic_cohort(&small()).unwrap(), generate_synthetic_cohort(&small()).unwrap());
        let mut other = small();
        other.seed = 9;
        assert_ne!(generate_synthetic_cohort(&small()).unwrap(), generate_synthetic_cohort(&other).unwrap());
    }

    #[test]
    fn degenerate_cohort_has_identical_subjects() {
        let cfg = SynthConfig {
            amputee: 0,
            shift: 0.0,
            noise_intact: 0.0,
            repetition_jitter: 0.0,
            shared_subject_streams: true,
            ..small()
        };
        let cohort = generate_synthetic_cohort(&cfg).unwrap();
        assert_eq!(cohort[0].samples, cohort[1].samples);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small();
        cfg.channels = 0;
        assert!(generate_synthetic_cohort(&cfg).is_err());
        let mut cfg = small();
        cfg.noise_amputee = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn envelope_shape() {
        assert!(envelope(0, 100) < 0.05);
        assert_eq!(envelope(50, 100), 1.0);
        assert!((envelope(0, 100) - envelope(99, 100)).abs() < 1e-12);
    }
}
