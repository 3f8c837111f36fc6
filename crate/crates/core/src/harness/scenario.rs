//! End-to-end protocol runs.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ScenarioConfig;
use crate::channel::{apply_channel, eve_tap, ChannelParams};
use crate::distill::{advantage_distill, bit_error_rate, eavesdropper_decode, PartyRecord};
use crate::error::{Error, Result};
use crate::info::{build_report, MetricsReport};
use crate::modem::{
    bits_to_symbols, blind_phase, derotate, estimate_delay, estimate_global_phase,
    quadrant_decision, rotate, symbol_phase, SymbolStream, MIN_PILOTS,
};
use crate::optics::{apply_beamsplitter, heterodyne, sample_source_field, QuadraturePair};

/// Received symbols compared during delay search, unless the run is shorter.
const ALIGN_WINDOW: usize = 1 << 16;

pub const PARTY_NAMES: [&str; 3] = ["alice", "bob", "eve"];

// Independent ChaCha streams per pipeline stage.
mod stream {
    pub const BITS: u64 = 1;
    pub const SOURCE: u64 = 2;
    pub const CHANNEL: [u64; 3] = [10, 11, 12];
    pub const DETECTOR: [u64; 3] = [20, 21, 22];
    pub const DISTILL: u64 = 30;
}

pub(crate) fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng
}

/// Timing and phase recovery outcome for one receiver.
#[derive(Debug, Clone, Serialize)]
pub struct Alignment {
    /// Receiver index minus transmit index.
    pub delay: i64,
    /// Agreement of differential quadrant decisions at the chosen delay.
    pub match_fraction: f64,
    /// Total phase correction per coherence segment.
    pub segment_phases: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PartyOutput {
    pub name: &'static str,
    pub alignment: Alignment,
    pub record: PartyRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistillationSummary {
    pub block: usize,
    pub kept_fraction: f64,
    pub kept_bits: usize,
    pub ber_ab: f64,
    pub ber_ae: f64,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: ScenarioConfig,
    pub report: MetricsReport,
    /// Transmit index of the first aligned row.
    pub start_index: usize,
    pub parties: Vec<PartyOutput>,
    pub distillation: Option<DistillationSummary>,
}

/// Runs the full protocol: random bits, QPSK displaced thermal source,
/// 50:50 split, Eve's tap, links, heterodyne, phase and delay recovery,
/// derotation, median slicing, optional advantage distillation, metrics.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunArtifacts> {
    config.ensure_valid()?;
    let n = config.n_symbols;
    let seed = config.seed;

    let mut bit_rng = stage_rng(seed, stream::BITS);
    let bits: Vec<bool> = (0..2 * n).map(|_| bit_rng.random()).collect();
    let symbols = bits_to_symbols(&bits);
    drop(bits);

    let link_inputs = {
        let mut rng = stage_rng(seed, stream::SOURCE);
        let zero = Complex64::new(0.0, 0.0);
        let mut alice = Vec::with_capacity(n);
        let mut broadcast = Vec::with_capacity(n);
        for &s in symbols.as_slice() {
            let field = sample_source_field(&config.source, symbol_phase(s)?, &mut rng);
            let (a, b) = apply_beamsplitter(field, zero, 0.5)?;
            alice.push(a);
            broadcast.push(b);
        }
        let (bob, eve) = eve_tap(&broadcast, config.eve_transmittance)?;
        [alice, bob, eve]
    };
    let links: [&ChannelParams; 3] = [&config.alice_link, &config.bob_link, &config.eve_link];

    let recovered: Vec<(Vec<QuadraturePair>, Alignment)> = link_inputs
        .into_par_iter()
        .zip(links.into_par_iter())
        .enumerate()
        .map(|(k, (input, link))| {
            let received = apply_channel(&input, link, &mut stage_rng(seed, stream::CHANNEL[k]))?;
            drop(input);
            let mut det = stage_rng(seed, stream::DETECTOR[k]);
            let measured = received
                .iter()
                .map(|&a| heterodyne(a, config.detection_noise_var, &mut det))
                .collect::<Result<Vec<_>>>()?;
            drop(received);
            recover(&measured, &symbols, config)
        })
        .collect::<Result<_>>()?;

    let n_i = n as i64;
    let lo = recovered
        .iter()
        .map(|(_, al)| (-al.delay).max(0))
        .max()
        .unwrap_or(0);
    let hi = recovered
        .iter()
        .map(|(_, al)| (n_i - al.delay).min(n_i))
        .min()
        .unwrap_or(0);
    if hi - lo < 2 {
        return Err(Error::domain(format!(
            "aligned records do not overlap (transmit range {lo}..{hi})"
        )));
    }

    let parties: Vec<PartyOutput> = recovered
        .into_par_iter()
        .enumerate()
        .map(|(k, (corrected, alignment))| {
            let from = (lo + alignment.delay) as usize;
            let to = (hi + alignment.delay) as usize;
            let record = PartyRecord::from_quadratures(corrected[from..to].to_vec())?;
            Ok(PartyOutput {
                name: PARTY_NAMES[k],
                alignment,
                record,
            })
        })
        .collect::<Result<_>>()?;

    let [a, b, e] = [&parties[0].record, &parties[1].record, &parties[2].record];
    let report = build_report(a, b, e)?;

    let distillation = match config.ad_block {
        Some(block) if a.bits.len() >= block => {
            let mut rng = stage_rng(seed, stream::DISTILL);
            let d = advantage_distill(&a.bits, &b.bits, block, &mut rng)?;
            let eve_guess = eavesdropper_decode(&e.bits, &d.transcript)?;
            let kept = d.a_kept.len();
            let rate = |x, y| {
                if kept == 0 {
                    Ok(0.0)
                } else {
                    bit_error_rate(x, y)
                }
            };
            Some(DistillationSummary {
                block,
                kept_fraction: d.kept_fraction,
                kept_bits: kept,
                ber_ab: rate(&d.a_kept, &d.b_kept)?,
                ber_ae: rate(&d.a_kept, &eve_guess)?,
            })
        }
        _ => None,
    };

    Ok(RunArtifacts {
        config: config.clone(),
        report,
        start_index: lo as usize,
        parties,
        distillation,
    })
}

/// Recovers timing and carrier phase for one receiver against the public
/// reference symbols, returning the derotated quadratures indexed like the
/// received stream.
///
/// 1. Blind fourth-power phase per coherence segment, so quadrant decisions
///    are right up to a multiple of `pi/2`.
/// 2. Delay from differential quadrant decisions, which do not see that
///    multiple.
/// 3. Per segment: fine phase from the pilot symbols at its start, the
///    quadrant multiple from majority agreement with the reference, then
///    derotation by the receiver's own decisions.
fn recover(
    measured: &[QuadraturePair],
    reference: &SymbolStream,
    config: &ScenarioConfig,
) -> Result<(Vec<QuadraturePair>, Alignment)> {
    let n = measured.len();
    let seg = config.coherence_len;

    let mut coarse = Vec::with_capacity(n);
    let mut blind = Vec::new();
    for chunk in measured.chunks(seg) {
        let theta = blind_phase(chunk);
        blind.push(theta);
        coarse.extend(chunk.iter().map(|&q| rotate(q, -theta)));
    }

    let window = n.min(ALIGN_WINDOW.max(4 * config.max_lag + 1));
    let decisions = SymbolStream::new(
        coarse[..window]
            .iter()
            .map(|&q| quadrant_decision(q))
            .collect(),
    )?;
    let ref_window = SymbolStream::new(reference.as_slice()[..window].to_vec())?;
    let found = estimate_delay(
        &ref_window.differential(),
        &decisions.differential(),
        config.max_lag,
    )?;
    let delay = found.lag;

    let refs = reference.as_slice();
    let mut out = Vec::with_capacity(n);
    let mut segment_phases = Vec::with_capacity(blind.len());
    for (c, chunk) in coarse.chunks(seg).enumerate() {
        let start = (c * seg) as i64;
        // received indices in this segment with a transmit counterpart
        let first = start.max(delay);
        let last = (start + chunk.len() as i64).min(n as i64 + delay);
        let valid = if last > first {
            (first - start) as usize..(last - start) as usize
        } else {
            0..0
        };
        let tx = |i: usize| refs[(start + i as i64 - delay) as usize];

        let pilots = valid.start..valid.end.min(valid.start + config.pilot_len);
        let fine = if pilots.len() >= MIN_PILOTS {
            let pilot_symbols = SymbolStream::new(pilots.clone().map(tx).collect())?;
            estimate_global_phase(&chunk[pilots], &pilot_symbols)?
        } else {
            0.0
        };

        let mut votes = [0usize; 4];
        for i in valid.clone() {
            let s = quadrant_decision(rotate(chunk[i], -fine));
            votes[usize::from((s + 4 - tx(i)) % 4)] += 1;
        }
        let quarter = (0..4)
            .max_by_key(|&k| (votes[k], std::cmp::Reverse(k)))
            .unwrap_or(0);
        let correction = fine + quarter as f64 * FRAC_PI_2;
        segment_phases.push(blind[c] + correction);

        for &q in chunk {
            let q = rotate(q, -correction);
            out.push(derotate(q, quadrant_decision(q))?);
        }
    }

    Ok((
        out,
        Alignment {
            delay,
            match_fraction: found.match_fraction,
            segment_phases,
        },
    ))
}

/// Runs `configs` in parallel; output order follows input order.
pub fn run_many(configs: &[ScenarioConfig]) -> Result<Vec<RunArtifacts>> {
    configs.par_iter().map(run_scenario).collect()
}

/// Seeds `seed, seed + 1, ...` for `trials` independent runs of `base`.
pub fn seeded_trials(base: &ScenarioConfig, trials: usize) -> Vec<ScenarioConfig> {
    (0..trials)
        .map(|i| ScenarioConfig {
            seed: base.seed.wrapping_add(i as u64),
            ..base.clone()
        })
        .collect()
}

/// One row of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub report: MetricsReport,
}

/// Runs `base` at each value of the dotted setting `key`, with the point's
/// seed offset by its index.
pub fn sweep(base: &ScenarioConfig, key: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = base.clone();
            cfg.set_param(key, v)?;
            cfg.seed = base.seed.wrapping_add(i as u64);
            cfg.ensure_valid()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = run_many(&configs)?;
    Ok(values
        .iter()
        .zip(runs)
        .map(|(&value, run)| SweepPoint {
            value,
            report: run.report,
        })
        .collect())
}

/// `start, start + step, ..` up to `stop` inclusive, tolerant of rounding.
pub fn sweep_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(Error::domain(format!(
            "invalid sweep range {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}
