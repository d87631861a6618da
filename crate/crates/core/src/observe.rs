//! Observables of a profile on `[0, π]`: amplitude, peak count on the
//! reflected periodic domain, and the phase relation between `u` and `k`.

use alloc::vec::Vec;

use crate::elliptic::Grid;

/// Profiles with `max − min` below this count as homogeneous.
pub const FLAT_AMPLITUDE: f64 = 1e-6;

/// Peaks less prominent than this fraction of the amplitude are ignored.
pub const PROMINENCE_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSign {
    InPhase,
    OutOfPhase,
    Flat,
}

impl core::fmt::Display for PhaseSign {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            PhaseSign::InPhase => "in_phase",
            PhaseSign::OutOfPhase => "out_of_phase",
            PhaseSign::Flat => "flat",
        })
    }
}

pub fn amplitude(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

/// Even reflection of node values onto `[−π, π)`: `2 n_cells` samples
/// starting at `x = −π`.
pub fn reflect(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    (0..2 * n)
        .map(|j| if j < n { values[n - j] } else { values[j - n] })
        .collect()
}

/// Strict local maxima of the periodic signal with prominence at least
/// `floor`.
pub fn count_periodic_peaks(signal: &[f64], floor: f64) -> usize {
    let m = signal.len();
    if m < 3 {
        return 0;
    }
    let at = |i: isize| signal[i.rem_euclid(m as isize) as usize];
    let global_min = signal.iter().copied().fold(f64::INFINITY, f64::min);
    (0..m as isize)
        .filter(|&i| {
            let top = at(i);
            if !(top > at(i - 1) && top > at(i + 1)) {
                return false;
            }
            // lowest point on each side before terrain rises above the peak
            let walk = |dir: isize| -> Option<f64> {
                let mut low = top;
                for step in 1..m as isize {
                    let v = at(i + dir * step);
                    if v > top {
                        return Some(low);
                    }
                    low = low.min(v);
                }
                None
            };
            let prominence = match (walk(-1), walk(1)) {
                (Some(a), Some(b)) => top - a.max(b),
                (Some(a), None) | (None, Some(a)) => top - a,
                (None, None) => top - global_min,
            };
            prominence >= floor
        })
        .count()
}

/// Number of peaks of the node profile reflected onto `[−π, π)`.
pub fn peak_count(values: &[f64]) -> usize {
    let amp = amplitude(values);
    if amp < FLAT_AMPLITUDE {
        return 0;
    }
    count_periodic_peaks(&reflect(values), PROMINENCE_FRACTION * amp)
}

/// Sign of `∫ (u − ū)(k − k̄) dx`.
pub fn phase_sign(grid: &Grid, u: &[f64], k: &[f64]) -> PhaseSign {
    if amplitude(u) < FLAT_AMPLITUDE {
        return PhaseSign::Flat;
    }
    let (ub, kb) = (grid.mean(u), grid.mean(k));
    let cov: Vec<f64> = u.iter().zip(k).map(|(a, b)| (a - ub) * (b - kb)).collect();
    if grid.integrate(&cov) >= 0.0 {
        PhaseSign::InPhase
    } else {
        PhaseSign::OutOfPhase
    }
}
