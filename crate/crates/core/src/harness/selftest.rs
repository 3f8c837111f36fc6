//! Fast sanity checks for the `selftest` command.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::scenario::run_scenario;
use crate::distill::{advantage_distill, median_slice, BitString};
use crate::error::Result;
use crate::info::{
    conditional_mutual_information, gaussian_mi_from_r, mutual_information, JointCounts,
};
use crate::modem::{bits_to_symbols, estimate_delay, symbols_to_bits, SymbolStream};
use crate::optics::apply_beamsplitter;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

type CheckFn = fn() -> Result<(bool, String)>;

/// Runs every check; errors inside a check count as failures.
pub fn run_selftest() -> Vec<Check> {
    let cases: [(&'static str, CheckFn); 7] = [
        ("beamsplitter_energy", beamsplitter_energy),
        ("gray_round_trip", gray_round_trip),
        ("delay_recovery", delay_recovery),
        ("median_balance", median_balance),
        ("information_identities", information_identities),
        ("distillation_error_free", distillation_error_free),
        ("short_run_alignment", short_run_alignment),
    ];
    cases
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((ok, detail)) => check(name, ok, detail),
            Err(e) => check(name, false, e.to_string()),
        })
        .collect()
}

fn beamsplitter_energy() -> Result<(bool, String)> {
    let a = Complex64::new(1.3, -0.4);
    let b = Complex64::new(-0.2, 2.0);
    let (c, d) = apply_beamsplitter(a, b, 0.3)?;
    let err = (c.norm_sqr() + d.norm_sqr() - a.norm_sqr() - b.norm_sqr()).abs();
    Ok((err < 1e-12, format!("energy error {err:.1e}")))
}

fn gray_round_trip() -> Result<(bool, String)> {
    let bits: Vec<bool> = (0..64).map(|i| (i * 7) % 3 == 0).collect();
    let back = symbols_to_bits(&bits_to_symbols(&bits));
    Ok((back == bits, "64 bits".into()))
}

fn delay_recovery() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reference: Vec<u8> = (0..400).map(|_| rng.random_range(0..4u8)).collect();
    let mut rx = vec![0u8; 9];
    rx.extend(&reference[..391]);
    let found = estimate_delay(&SymbolStream::new(reference)?, &SymbolStream::new(rx)?, 50)?;
    Ok((found.lag == 9, format!("lag {}", found.lag)))
}

fn median_balance() -> Result<(bool, String)> {
    let zs: Vec<f64> = (0..1001).map(|i| ((i * 37) % 1001) as f64).collect();
    let ones = median_slice(&zs)?.count_ones();
    Ok((ones == 500, format!("{ones} ones of 1001")))
}

fn information_identities() -> Result<(bool, String)> {
    let perfect = mutual_information(&JointCounts::new(2, vec![50, 0, 0, 50])?)?;
    let independent = conditional_mutual_information(&JointCounts::new(3, vec![10; 8])?)?;
    let gauss = gaussian_mi_from_r(0.0)?;
    let ok = (perfect - 1.0).abs() < 1e-12 && independent.abs() < 1e-12 && gauss == 0.0;
    Ok((ok, format!("I = {perfect}, CMI = {independent}")))
}

fn distillation_error_free() -> Result<(bool, String)> {
    let a = BitString((0..100).map(|i| i % 5 < 2).collect());
    let d = advantage_distill(&a, &a, 2, &mut ChaCha8Rng::seed_from_u64(0))?;
    Ok((
        d.kept_fraction == 1.0 && d.a_kept == d.b_kept,
        format!("kept {}", d.a_kept.len()),
    ))
}

fn short_run_alignment() -> Result<(bool, String)> {
    let mut cfg = ScenarioConfig::waveguide();
    cfg.n_symbols = 20_000;
    let run = run_scenario(&cfg)?;
    let delays: Vec<i64> = run.parties.iter().map(|p| p.alignment.delay).collect();
    let expected = [cfg.alice_link.delay, cfg.bob_link.delay, cfg.eve_link.delay].map(|d| d as i64);
    Ok((
        delays == expected,
        format!("delays {delays:?}, r_ab {:.3}", run.report.r_ab),
    ))
}
