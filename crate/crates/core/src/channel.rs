//! Link impairments between the source and a receiver.
//!
//! The composite model applied by [`apply_channel`] is
//!
//! ```text
//! out[t] = sqrt(T) e^{i theta(t)} in[t - D]
//!        + sum_k a_k e^{i phi_k} sqrt(T) in[t - D - d_k]
//!        + w(t)
//! ```
//!
//! where `theta` is a Gaussian random walk with occasional hops, the taps
//! model ghost reflections and multipath echoes, and `w` is circular Gaussian
//! receiver noise. Samples before the start of the stream read as vacuum.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::optics::{apply_beamsplitter, circular_gaussian, ComplexAmplitude};

/// A delayed, attenuated echo of the main path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapSpec {
    /// Extra delay relative to the main path, in symbols.
    pub delay: usize,
    /// Relative amplitude, below 1.
    pub amplitude: f64,
    pub phase: f64,
}

/// Carrier phase process: a fixed offset, a Gaussian random walk, and hops of
/// `+-hop_scale` occurring with probability `hop_prob` per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseDriftParams {
    /// Phase at the first symbol, in radians.
    pub offset: f64,
    /// Random-walk step deviation, rad per sqrt(symbol).
    pub walk_sigma: f64,
    pub hop_prob: f64,
    pub hop_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub transmittance: f64,
    #[serde(default)]
    pub delay: usize,
    #[serde(default)]
    pub drift: PhaseDriftParams,
    #[serde(default)]
    pub taps: Vec<TapSpec>,
    #[serde(default)]
    pub rx_noise_var: f64,
}

impl ChannelParams {
    /// Lossless, noiseless, undelayed link.
    pub fn identity() -> Self {
        ChannelParams {
            transmittance: 1.0,
            delay: 0,
            drift: PhaseDriftParams::default(),
            taps: Vec::new(),
            rx_noise_var: 0.0,
        }
    }

    /// Field-level range checks, with field names prefixed by `prefix`.
    pub fn validate(&self, prefix: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, field: &str, msg: String| {
            if !ok {
                errors.push(FieldError::new(format!("{prefix}.{field}"), msg));
            }
        };
        let t = self.transmittance;
        check(
            (0.0..=1.0).contains(&t),
            "transmittance",
            format!("must lie in [0, 1], got {t}"),
        );
        let v = self.rx_noise_var;
        check(
            v.is_finite() && v >= 0.0,
            "rx_noise_var",
            format!("must be >= 0, got {v}"),
        );
        let d = &self.drift;
        check(
            d.offset.is_finite(),
            "drift.offset",
            format!("must be finite, got {}", d.offset),
        );
        check(
            d.walk_sigma.is_finite() && d.walk_sigma >= 0.0,
            "drift.walk_sigma",
            format!("must be >= 0, got {}", d.walk_sigma),
        );
        check(
            (0.0..=1.0).contains(&d.hop_prob),
            "drift.hop_prob",
            format!("must lie in [0, 1], got {}", d.hop_prob),
        );
        check(
            d.hop_scale.is_finite() && d.hop_scale >= 0.0,
            "drift.hop_scale",
            format!("must be >= 0, got {}", d.hop_scale),
        );
        for (k, tap) in self.taps.iter().enumerate() {
            check(
                tap.delay >= 1,
                &format!("taps[{k}].delay"),
                format!("must be >= 1, got {}", tap.delay),
            );
            check(
                (0.0..1.0).contains(&tap.amplitude),
                &format!("taps[{k}].amplitude"),
                format!("must lie in [0, 1), got {}", tap.amplitude),
            );
            check(
                tap.phase.is_finite(),
                &format!("taps[{k}].phase"),
                format!("must be finite, got {}", tap.phase),
            );
        }
        errors
    }

    fn ensure_valid(&self) -> Result<()> {
        let errors = self.validate("channel");
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }
}

/// Carrier phase at each of `n` symbols.
pub fn phase_trajectory<R: Rng + ?Sized>(
    n: usize,
    drift: &PhaseDriftParams,
    rng: &mut R,
) -> Vec<f64> {
    let mut theta = drift.offset;
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 {
            if drift.walk_sigma > 0.0 {
                let step: f64 = rng.sample(StandardNormal);
                theta += drift.walk_sigma * step;
            }
            if drift.hop_prob > 0.0 && rng.random_bool(drift.hop_prob) {
                theta += if rng.random_bool(0.5) {
                    drift.hop_scale
                } else {
                    -drift.hop_scale
                };
            }
        }
        out.push(theta);
    }
    out
}

/// Passes `stream` through one link.
pub fn apply_channel<R: Rng + ?Sized>(
    stream: &[ComplexAmplitude],
    params: &ChannelParams,
    rng: &mut R,
) -> Result<Vec<ComplexAmplitude>> {
    if stream.is_empty() {
        return Err(Error::domain("channel input stream is empty"));
    }
    params.ensure_valid()?;
    let n = stream.len();
    let gain = params.transmittance.sqrt();
    let taps: Vec<(usize, Complex64)> = params
        .taps
        .iter()
        .map(|tap| {
            (
                params.delay + tap.delay,
                Complex64::from_polar(tap.amplitude * gain, tap.phase),
            )
        })
        .collect();
    let theta = phase_trajectory(n, &params.drift, rng);
    let zero = Complex64::new(0.0, 0.0);
    let at = |t: usize, lag: usize| if t >= lag { stream[t - lag] } else { zero };

    let mut out = Vec::with_capacity(n);
    for (t, &phase) in theta.iter().enumerate() {
        let mut v = at(t, params.delay) * Complex64::from_polar(gain, phase);
        for &(lag, coeff) in &taps {
            v += at(t, lag) * coeff;
        }
        v += circular_gaussian(params.rx_noise_var, rng);
        out.push(v);
    }
    Ok(out)
}

/// Eve's beam splitter on Bob's beam: Bob keeps the `sqrt(T)` branch, Eve
/// the `sqrt(1-T)` branch. The unused port is vacuum.
pub fn eve_tap(
    stream: &[ComplexAmplitude],
    t: f64,
) -> Result<(Vec<ComplexAmplitude>, Vec<ComplexAmplitude>)> {
    let zero = Complex64::new(0.0, 0.0);
    let mut bob = Vec::with_capacity(stream.len());
    let mut eve = Vec::with_capacity(stream.len());
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!(
            "eve transmittance must lie in [0, 1], got {t}"
        )));
    }
    for &a in stream {
        let (b, e) = apply_beamsplitter(a, zero, t)?;
        bob.push(b);
        eve.push(e);
    }
    Ok((bob, eve))
}

/// Links for Alice, Bob and Eve.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    pub alice: ChannelParams,
    pub bob: ChannelParams,
    pub eve: ChannelParams,
}

impl LinkSet {
    pub fn validate(&self) -> Vec<FieldError> {
        let mut errors = self.alice.validate("alice_link");
        errors.extend(self.bob.validate("bob_link"));
        errors.extend(self.eve.validate("eve_link"));
        errors
    }
}

/// Waveguide links. Alice's line carries one faint ghost reflection; Bob and
/// Eve sit on matched, high-transmittance lines with a little thermal phase
/// wander and rare hops. Bob's and Eve's `rx_noise_var` is the calibrated
/// value for the waveguide scenario source (`nbar = 50`).
pub fn make_waveguide_preset() -> LinkSet {
    let alice = ChannelParams {
        transmittance: 0.9,
        delay: 3,
        drift: PhaseDriftParams {
            offset: 0.4,
            walk_sigma: 1e-4,
            hop_prob: 0.0,
            hop_scale: 0.0,
        },
        taps: vec![TapSpec {
            delay: 4,
            amplitude: 0.03,
            phase: 0.7,
        }],
        rx_noise_var: 0.05,
    };
    let drift = PhaseDriftParams {
        offset: 2.1,
        walk_sigma: 3e-4,
        hop_prob: 2e-5,
        hop_scale: 0.15,
    };
    let line = ChannelParams {
        transmittance: 0.9,
        delay: 17,
        drift,
        taps: Vec::new(),
        rx_noise_var: WAVEGUIDE_BOB_EVE_RX_NOISE,
    };
    let mut eve = line.clone();
    eve.delay = 12;
    eve.drift.offset = -1.3;
    LinkSet {
        alice,
        bob: line,
        eve,
    }
}

/// Free-space links. Alice keeps her local waveguide; Bob and Eve receive the
/// omni-directional broadcast with heavy loss, faster phase drift and a few
/// multipath echoes each. Noise levels are calibrated for the free-space
/// scenario source (`nbar = 200`).
pub fn make_freespace_preset() -> LinkSet {
    let alice = ChannelParams {
        transmittance: 0.9,
        delay: 3,
        drift: PhaseDriftParams {
            offset: 0.4,
            walk_sigma: 1e-4,
            hop_prob: 0.0,
            hop_scale: 0.0,
        },
        taps: vec![TapSpec {
            delay: 4,
            amplitude: 0.03,
            phase: 0.7,
        }],
        rx_noise_var: FREESPACE_ALICE_RX_NOISE,
    };
    let bob = ChannelParams {
        transmittance: 0.25,
        delay: 41,
        drift: PhaseDriftParams {
            offset: -0.9,
            walk_sigma: 1.5e-3,
            hop_prob: 1e-4,
            hop_scale: 0.1,
        },
        taps: vec![
            TapSpec {
                delay: 2,
                amplitude: 0.02,
                phase: 1.9,
            },
            TapSpec {
                delay: 9,
                amplitude: 0.015,
                phase: -2.4,
            },
        ],
        rx_noise_var: FREESPACE_BOB_EVE_RX_NOISE,
    };
    let eve = ChannelParams {
        transmittance: 0.25,
        delay: 38,
        drift: PhaseDriftParams {
            offset: 2.6,
            walk_sigma: 1.5e-3,
            hop_prob: 1e-4,
            hop_scale: 0.1,
        },
        taps: vec![
            TapSpec {
                delay: 3,
                amplitude: 0.02,
                phase: -0.8,
            },
            TapSpec {
                delay: 7,
                amplitude: 0.015,
                phase: 0.6,
            },
            TapSpec {
                delay: 13,
                amplitude: 0.01,
                phase: 2.8,
            },
        ],
        rx_noise_var: FREESPACE_BOB_EVE_RX_NOISE,
    };
    LinkSet { alice, bob, eve }
}

// Produced by `thermal-qkd calibrate`; see configs/.
const WAVEGUIDE_BOB_EVE_RX_NOISE: f64 = 0.09259259259259259;
const FREESPACE_ALICE_RX_NOISE: f64 = 0.0;
const FREESPACE_BOB_EVE_RX_NOISE: f64 = 0.375;
