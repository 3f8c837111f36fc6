//! Run artefacts on disk.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::scenario::{PartyOutput, RunArtifacts, SweepPoint};
use crate::error::Result;
use crate::info::MetricsReport;

#[derive(Debug, Clone, Copy)]
pub struct OutputOptions {
    /// Write per-party CSV measurement tables.
    pub measurements: bool,
    /// Also write bits as one character per line.
    pub text_bits: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            measurements: true,
            text_bits: false,
        }
    }
}

#[derive(Serialize)]
struct AlignmentEntry<'a> {
    party: &'a str,
    delay: i64,
    match_fraction: f64,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    seed: u64,
    start_index: usize,
    alignment: Vec<AlignmentEntry<'a>>,
}

/// Writes `report.json`, `config.toml`, `alignment.json`, packed bits per
/// party and, when enabled, the measurement tables and distillation summary.
/// Returns the paths written.
pub fn write_run(run: &RunArtifacts, dir: &Path, opts: OutputOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };

    put("report.json", report_json(&run.report)?.as_bytes())?;
    put("config.toml", run.config.to_config_string().as_bytes())?;
    let summary = RunSummary {
        seed: run.config.seed,
        start_index: run.start_index,
        alignment: run
            .parties
            .iter()
            .map(|p| AlignmentEntry {
                party: p.name,
                delay: p.alignment.delay,
                match_fraction: p.alignment.match_fraction,
            })
            .collect(),
    };
    put(
        "alignment.json",
        (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
    )?;
    for p in &run.parties {
        put(&format!("{}_bits.bin", p.name), &p.record.bits.to_packed())?;
        if opts.text_bits {
            put(
                &format!("{}_bits.txt", p.name),
                p.record.bits.to_text_lines().as_bytes(),
            )?;
        }
    }
    if let Some(d) = &run.distillation {
        put(
            "distillation.json",
            (serde_json::to_string_pretty(d)? + "\n").as_bytes(),
        )?;
    }

    if opts.measurements {
        for p in &run.parties {
            let path = dir.join(format!("{}.csv", p.name));
            write_measurements(p, run.start_index, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn report_json(report: &MetricsReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// `index,x,p,z,bit`, indexed by transmit symbol.
fn write_measurements(party: &PartyOutput, start: usize, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,x,p,z,bit")?;
    let r = &party.record;
    for (i, ((q, z), &b)) in r
        .quadratures
        .iter()
        .zip(&r.amplitudes)
        .zip(r.bits.as_slice())
        .enumerate()
    {
        writeln!(
            w,
            "{},{:.8e},{:.8e},{:.8e},{}",
            start + i,
            q.x,
            q.p,
            z,
            u8::from(b)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: &str =
    "value,r_ab,r_be,r_ae,i_ab,i_ae,i_be,i_ab_given_e,delta_dr,delta_rr,ber_ab,n_bits";

pub fn sweep_csv(param: &str, points: &[SweepPoint]) -> String {
    let mut out = SWEEP_HEADER.replacen("value", param, 1);
    out.push('\n');
    for p in points {
        let r = &p.report;
        let fields = [
            p.value,
            r.r_ab,
            r.r_be,
            r.r_ae,
            r.i_ab,
            r.i_ae,
            r.i_be,
            r.i_ab_given_e,
            r.delta_dr,
            r.delta_rr,
            r.ber_ab,
        ];
        for f in fields {
            out.push_str(&format!("{f:.8e},"));
        }
        out.push_str(&format!("{}\n", r.n_bits));
    }
    out
}
