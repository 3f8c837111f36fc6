//! QPSK symbol handling.
//!
//! Gray-coded mapping, two bits per symbol, most significant bit first:
//!
//! ```text
//!   bits  symbol  phase
//!   00    0       pi/4
//!   01    1       3pi/4
//!   11    2       5pi/4
//!   10    3       7pi/4
//! ```
//!
//! Timing is recovered by matching quadrant decisions against the public
//! reference sequence; phase by a blind fourth-power estimate, refined on
//! pilot symbols.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::optics::QuadraturePair;

/// Minimum number of pilots accepted by [`estimate_global_phase`].
pub const MIN_PILOTS: usize = 16;

/// Sequence of QPSK symbols, each in `0..4`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolStream(Vec<u8>);

impl SymbolStream {
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if let Some(pos) = symbols.iter().position(|&s| s > 3) {
            return Err(Error::domain(format!(
                "symbol {} at index {pos} is outside 0..4",
                symbols[pos]
            )));
        }
        Ok(SymbolStream(symbols))
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }

    /// Successive phase steps `s[t] - s[t-1] mod 4`. Invariant under a
    /// constant rotation of the constellation.
    pub fn differential(&self) -> SymbolStream {
        SymbolStream(self.0.windows(2).map(|w| (w[1] + 4 - w[0]) % 4).collect())
    }

    /// Every symbol advanced by `k` quadrants.
    pub fn rotated(&self, k: u8) -> SymbolStream {
        SymbolStream(self.0.iter().map(|&s| (s + k) % 4).collect())
    }
}

/// Delay estimate between a reference and a received symbol stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    /// `rx[t + lag]` corresponds to `reference[t]`.
    pub lag: i64,
    pub match_fraction: f64,
}

const GRAY: [u8; 4] = [0, 1, 3, 2];
const GRAY_INV: [u8; 4] = [0, 1, 3, 2];

/// Maps bit pairs to symbols; an odd trailing bit is padded with 0.
pub fn bits_to_symbols(bits: &[bool]) -> SymbolStream {
    SymbolStream(
        bits.chunks(2)
            .map(|pair| {
                let hi = pair[0] as u8;
                let lo = pair.get(1).copied().unwrap_or(false) as u8;
                GRAY[(hi << 1 | lo) as usize]
            })
            .collect(),
    )
}

pub fn symbols_to_bits(symbols: &SymbolStream) -> Vec<bool> {
    symbols
        .as_slice()
        .iter()
        .flat_map(|&s| {
            let v = GRAY_INV[s as usize];
            [v & 2 != 0, v & 1 != 0]
        })
        .collect()
}

fn check_symbol(symbol: u8) -> Result<()> {
    if symbol > 3 {
        Err(Error::domain(format!("symbol {symbol} is outside 0..4")))
    } else {
        Ok(())
    }
}

pub fn symbol_phase(symbol: u8) -> Result<f64> {
    check_symbol(symbol)?;
    Ok(FRAC_PI_4 + f64::from(symbol) * FRAC_PI_2)
}

/// Symbol whose quadrant contains `q`. Points on an axis count as lying on
/// its positive side.
pub fn quadrant_decision(q: QuadraturePair) -> u8 {
    match (q.x >= 0.0, q.p >= 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

/// Rotates `q` by `theta` radians.
pub fn rotate(q: QuadraturePair, theta: f64) -> QuadraturePair {
    let (s, c) = theta.sin_cos();
    QuadraturePair::new(c * q.x - s * q.p, s * q.x + c * q.p)
}

/// Rotates `q` by minus the phase of `symbol`, mapping every cluster onto the
/// symbol-0 direction.
pub fn derotate(q: QuadraturePair, symbol: u8) -> Result<QuadraturePair> {
    Ok(rotate(q, -symbol_phase(symbol)?))
}

/// Folds an angle into `[-pi/4, pi/4)`.
pub fn fold_quarter(theta: f64) -> f64 {
    let mut r = theta.rem_euclid(FRAC_PI_2);
    if r >= FRAC_PI_4 {
        r -= FRAC_PI_2;
    }
    r
}

/// Lag in `[-max_lag, max_lag]` maximising the fraction of equal symbols on
/// the overlap of `reference[t]` and `rx[t + lag]`. Ties go to the smallest
/// `|lag|`, then to the positive lag.
///
/// Match counts for all lags come from two FFT cross-correlations of the
/// fourth-root-of-unity embeddings of the streams.
pub fn estimate_delay(
    reference: &SymbolStream,
    rx: &SymbolStream,
    max_lag: usize,
) -> Result<AlignmentResult> {
    let need = 4 * max_lag.max(1);
    if reference.len() < need || rx.len() < need {
        return Err(Error::domain(format!(
            "streams of length {} and {} are shorter than 4 * max_lag = {need}",
            reference.len(),
            rx.len()
        )));
    }
    let (a, b) = (reference.as_slice(), rx.as_slice());
    let (c1, c2) = cross_correlations(a, b);
    let size = c1.len();

    let mut best: Option<(i64, u64, u64)> = None;
    let max_lag = max_lag as i64;
    for lag in candidate_lags(max_lag) {
        let lo = (-lag).max(0);
        let hi = (a.len() as i64).min(b.len() as i64 - lag);
        if hi <= lo {
            continue;
        }
        let overlap = (hi - lo) as u64;
        let idx = lag.rem_euclid(size as i64) as usize;
        let raw = (overlap as f64 + c2[idx].re + 2.0 * c1[idx].re) / 4.0;
        let matches = (raw.round().max(0.0) as u64).min(overlap);
        let better = match best {
            None => true,
            // strict improvement only: candidates arrive in tie-break order
            Some((_, m, o)) => {
                u128::from(matches) * u128::from(o) > u128::from(m) * u128::from(overlap)
            }
        };
        if better {
            best = Some((lag, matches, overlap));
        }
    }
    let (lag, matches, overlap) =
        best.ok_or_else(|| Error::domain("no overlapping lag".to_string()))?;
    Ok(AlignmentResult {
        lag,
        match_fraction: matches as f64 / overlap as f64,
    })
}

fn candidate_lags(max_lag: i64) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=max_lag).flat_map(|l| [l, -l]))
}

/// Returns `c_m[k] = sum_t conj(u_m[t]) v_m[t + k]` for `m = 1, 2`, where
/// `u_m = i^(m a)` and `v_m = i^(m b)`; negative `k` wraps to the end.
fn cross_correlations(a: &[u8], b: &[u8]) -> (Vec<Complex64>, Vec<Complex64>) {
    const UNIT: [Complex64; 4] = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    let size = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let embed = |s: &[u8], m: u8| {
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        for (dst, &v) in buf.iter_mut().zip(s) {
            *dst = UNIT[((m * v) % 4) as usize];
        }
        fwd.process(&mut buf);
        buf
    };
    let correlate = |m: u8| {
        let ua = embed(a, m);
        let vb = embed(b, m);
        let mut prod: Vec<Complex64> = ua.iter().zip(&vb).map(|(x, y)| x.conj() * y).collect();
        inv.process(&mut prod);
        let scale = 1.0 / size as f64;
        prod.iter_mut().for_each(|v| *v *= scale);
        prod
    };
    (correlate(1), correlate(2))
}

/// Angle of the mean pilot sample after removing each pilot's symbol phase,
/// folded into `[-pi/4, pi/4)`. The remaining multiple of `pi/2` is resolved
/// by quadrant matching.
pub fn estimate_global_phase(
    pilot_rx: &[QuadraturePair],
    pilot_symbols: &SymbolStream,
) -> Result<f64> {
    if pilot_rx.len() != pilot_symbols.len() {
        return Err(Error::domain(format!(
            "{} pilot samples for {} pilot symbols",
            pilot_rx.len(),
            pilot_symbols.len()
        )));
    }
    if pilot_rx.len() < MIN_PILOTS {
        return Err(Error::domain(format!(
            "need at least {MIN_PILOTS} pilots, got {}",
            pilot_rx.len()
        )));
    }
    let sum: Complex64 = pilot_rx
        .iter()
        .zip(pilot_symbols.as_slice())
        .map(|(q, &s)| {
            q.as_complex() * Complex64::from_polar(1.0, -(FRAC_PI_4 + f64::from(s) * FRAC_PI_2))
        })
        .sum();
    Ok(fold_quarter(sum.arg()))
}

/// Blind QPSK phase estimate from the fourth power of the samples, in
/// `[-pi/4, pi/4)`. Needs no timing.
pub fn blind_phase(samples: &[QuadraturePair]) -> f64 {
    let sum: Complex64 = samples.iter().map(|q| q.as_complex().powi(4)).sum();
    // clusters at pi/4 + k pi/2 raise to a phase of pi
    fold_quarter((-sum).arg() / 4.0)
}
