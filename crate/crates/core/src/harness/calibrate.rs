//! Fits preset noise levels to reference statistics.

use std::fmt::Write as _;

use serde::Serialize;

use super::config::ScenarioConfig;
use super::scenario::run_many;
use crate::error::{Error, Result};
use crate::info::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    RAb,
    RBe,
    RAe,
    BerAb,
    IAb,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::RAb => "r_ab",
            Statistic::RBe => "r_be",
            Statistic::RAe => "r_ae",
            Statistic::BerAb => "ber_ab",
            Statistic::IAb => "i_ab",
        }
    }

    pub fn of(self, r: &MetricsReport) -> f64 {
        match self {
            Statistic::RAb => r.r_ab,
            Statistic::RBe => r.r_be,
            Statistic::RAe => r.r_ae,
            Statistic::BerAb => r.ber_ab,
            Statistic::IAb => r.i_ab,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Target {
    pub statistic: Statistic,
    pub value: f64,
    pub tolerance: f64,
}

impl Target {
    pub fn deviation(&self, r: &MetricsReport) -> f64 {
        self.statistic.of(r) - self.value
    }

    pub fn met(&self, r: &MetricsReport) -> bool {
        self.deviation(r).abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationTarget {
    pub preset: String,
    pub targets: Vec<Target>,
}

impl CalibrationTarget {
    pub fn waveguide() -> Self {
        CalibrationTarget {
            preset: "waveguide".into(),
            targets: vec![Target {
                statistic: Statistic::RAb,
                value: 0.9264,
                tolerance: 0.02,
            }],
        }
    }

    pub fn freespace() -> Self {
        CalibrationTarget {
            preset: "freespace".into(),
            targets: vec![
                Target {
                    statistic: Statistic::RBe,
                    value: 0.89,
                    tolerance: 0.02,
                },
                Target {
                    statistic: Statistic::BerAb,
                    value: 0.113,
                    tolerance: 0.015,
                },
            ],
        }
    }

    /// Sum of squared deviations, each scaled by its tolerance.
    pub fn loss(&self, r: &MetricsReport) -> f64 {
        self.targets
            .iter()
            .map(|t| (t.deviation(r) / t.tolerance).powi(2))
            .sum()
    }

    pub fn met(&self, r: &MetricsReport) -> bool {
        self.targets.iter().all(|t| t.met(r))
    }
}

/// A scenario parameter adjusted during calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    AliceRxNoise,
    /// Bob's and Eve's receiver noise, moved together.
    BobEveRxNoise,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Knob::AliceRxNoise => "alice_link.rx_noise_var",
            Knob::BobEveRxNoise => "bob_link.rx_noise_var,eve_link.rx_noise_var",
        }
    }

    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            Knob::AliceRxNoise => cfg.alice_link.rx_noise_var = value,
            Knob::BobEveRxNoise => {
                cfg.bob_link.rx_noise_var = value;
                cfg.eve_link.rx_noise_var = value;
            }
        }
    }

    pub fn get(self, cfg: &ScenarioConfig) -> f64 {
        match self {
            Knob::AliceRxNoise => cfg.alice_link.rx_noise_var,
            Knob::BobEveRxNoise => cfg.bob_link.rx_noise_var,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchRange {
    pub knob: Knob,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSpace {
    pub ranges: Vec<SearchRange>,
    /// Grid points per knob and round.
    pub points: usize,
    /// Rounds of grid refinement around the incumbent after the first.
    pub refine_rounds: usize,
    /// Symbols per trial run.
    pub n_symbols: usize,
}

impl SearchSpace {
    pub fn waveguide() -> Self {
        SearchSpace {
            ranges: vec![SearchRange {
                knob: Knob::BobEveRxNoise,
                lo: 0.0,
                hi: 3.0,
            }],
            points: 7,
            refine_rounds: 3,
            n_symbols: 200_000,
        }
    }

    pub fn freespace() -> Self {
        SearchSpace {
            ranges: vec![
                SearchRange {
                    knob: Knob::AliceRxNoise,
                    lo: 0.0,
                    hi: 40.0,
                },
                SearchRange {
                    knob: Knob::BobEveRxNoise,
                    lo: 0.0,
                    hi: 4.0,
                },
            ],
            points: 5,
            refine_rounds: 3,
            n_symbols: 200_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationOutcome {
    pub preset: String,
    /// Knob settings of the best trial, in search-space order.
    pub settings: Vec<(Knob, f64)>,
    pub report: MetricsReport,
    pub loss: f64,
    pub trials: usize,
}

impl CalibrationOutcome {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        for &(knob, value) in &self.settings {
            knob.apply(cfg, value);
        }
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 || hi <= lo {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Grid search with successive refinement, minimising
/// [`CalibrationTarget::loss`] over short runs of `base`. Every trial reuses
/// the base seed. Fails with [`Error::Calibration`] if the best trial misses
/// any target tolerance.
pub fn calibrate_preset(
    base: &ScenarioConfig,
    target: &CalibrationTarget,
    space: &SearchSpace,
) -> Result<CalibrationOutcome> {
    if space.ranges.is_empty() {
        return Err(Error::Calibration("empty search space".into()));
    }
    let mut trial_base = base.clone();
    trial_base.n_symbols = space.n_symbols;
    trial_base.ad_block = None;
    trial_base.ensure_valid()?;

    let mut bounds: Vec<(f64, f64)> = space.ranges.iter().map(|r| (r.lo, r.hi)).collect();
    let mut best: Option<(Vec<f64>, MetricsReport, f64)> = None;
    let mut trials = 0;
    for _ in 0..=space.refine_rounds {
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| grid(lo, hi, space.points))
            .collect();
        let candidates = cartesian(&axes);
        let configs: Vec<ScenarioConfig> = candidates
            .iter()
            .map(|values| {
                let mut cfg = trial_base.clone();
                for (r, &v) in space.ranges.iter().zip(values) {
                    r.knob.apply(&mut cfg, v);
                }
                cfg
            })
            .collect();
        let runs = run_many(&configs)?;
        trials += runs.len();
        for (values, run) in candidates.into_iter().zip(runs) {
            let loss = target.loss(&run.report);
            if best.as_ref().is_none_or(|(_, _, l)| loss < *l) {
                best = Some((values, run.report, loss));
            }
        }
        let (values, _, _) = best.as_ref().expect("at least one trial");
        bounds = bounds
            .iter()
            .zip(space.ranges.iter().zip(values))
            .map(|(&(lo, hi), (r, &v))| {
                let half = if space.points > 1 {
                    (hi - lo) / (space.points - 1) as f64
                } else {
                    0.0
                };
                ((v - half).max(r.lo), (v + half).min(r.hi))
            })
            .collect();
    }

    let (values, report, loss) = best.expect("at least one trial");
    let outcome = CalibrationOutcome {
        preset: target.preset.clone(),
        settings: space.ranges.iter().map(|r| r.knob).zip(values).collect(),
        report,
        loss,
        trials,
    };
    if target.met(&outcome.report) {
        Ok(outcome)
    } else {
        let mut msg = format!("no setting met the {} targets; best found:", target.preset);
        for t in &target.targets {
            let _ = write!(
                msg,
                " {} = {:.4} (target {} +- {})",
                t.statistic.name(),
                t.statistic.of(&outcome.report),
                t.value,
                t.tolerance
            );
        }
        for (k, v) in &outcome.settings {
            let _ = write!(msg, "; {} = {v:.4}", k.name());
        }
        Err(Error::Calibration(msg))
    }
}

/// Preset file for a calibrated configuration, with the achieved statistics
/// as leading comments.
pub fn preset_file(
    cfg: &ScenarioConfig,
    outcome: &CalibrationOutcome,
    target: &CalibrationTarget,
) -> String {
    let mut out = format!(
        "# {} preset, calibrated over {} trials ({} aligned bits each)\n",
        outcome.preset, outcome.trials, outcome.report.n_bits
    );
    for t in &target.targets {
        let _ = writeln!(
            out,
            "# {} = {:.4} (target {} +- {})",
            t.statistic.name(),
            t.statistic.of(&outcome.report),
            t.value,
            t.tolerance
        );
    }
    out.push_str(&cfg.to_config_string());
    out
}
