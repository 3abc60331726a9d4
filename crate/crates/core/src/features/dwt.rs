//! Periodized Daubechies-7 decomposition and its marginals.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DWT_LEVELS: usize = 3;

/// Daubechies-7 analysis filters (14 taps).
pub struct Db7;

impl Db7 {
    pub const LOW: [f64; 14] = [
        0.00035371379997452024,
        -0.0018016407040474908,
        0.0004295779729213665,
        0.01255099855609984,
        -0.01657454163066688,
        -0.03802993693501441,
        0.08061260915108308,
        0.07130921926683026,
        -0.22403618499387498,
        -0.14390600392856498,
        0.4697822874051931,
        0.7291320908462351,
        0.3965393194819173,
        0.07785205408500918,
    ];

    pub const LEN: usize = 14;

    #[inline]
    fn high(j: usize) -> f64 {
        // quadrature mirror of the low-pass filter
        let h = Self::LOW[Self::LEN - 1 - j];
        if j.is_multiple_of(2) {
            -h
        } else {
            h
        }
    }
}

/// One analysis step with periodic extension. Odd-length input is first
/// extended by repeating its last sample.
fn dwt_step(x: &[f64], approx: &mut Vec<f64>, detail: &mut Vec<f64>) {
    let mut ext: Vec<f64> = x.to_vec();
    if ext.len() % 2 == 1 {
        ext.push(*x.last().expect("nonempty"));
    }
    let m = ext.len();
    let half = Db7::LEN / 2;
    approx.clear();
    detail.clear();
    for k in 0..m / 2 {
        let mut a = 0.0;
        let mut d = 0.0;
        for j in 0..Db7::LEN {
            // index (2k + half - j) mod m, kept nonnegative
            let idx = (2 * k + half + m * Db7::LEN - j) % m;
            a += Db7::LOW[j] * ext[idx];
            d += Db7::high(j) * ext[idx];
        }
        approx.push(a);
        detail.push(d);
    }
}

/// Sums of absolute detail coefficients at levels 1..=3 followed by the sum of
/// absolute level-3 approximation coefficients.
pub fn dwt_marginals(x: &[f64]) -> Result<[f64; DWT_LEVELS + 1]> {
    if x.len() < Db7::LEN {
        return Err(Error::WindowTooShort {
            required: Db7::LEN,
            found: x.len(),
        });
    }
    let mut out = [0.0; DWT_LEVELS + 1];
    let mut current = x.to_vec();
    let mut approx = Vec::new();
    let mut detail = Vec::new();
    for level in 0..DWT_LEVELS {
        dwt_step(&current, &mut approx, &mut detail);
        out[level] = detail.iter().map(|v| libm::fabs(*v)).sum();
        core::mem::swap(&mut current, &mut approx);
    }
    out[DWT_LEVELS] = current.iter().map(|v| libm::fabs(*v)).sum();
    Ok(out)
}
