use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thermal_qkd::harness::calibrate::{
    calibrate_preset, preset_file, CalibrationTarget, SearchSpace,
};
use thermal_qkd::harness::output::{report_json, sweep_csv, write_run, OutputOptions};
use thermal_qkd::harness::{run_scenario, run_selftest, sweep, sweep_values, ScenarioConfig};
use thermal_qkd::{Error, Result};

/// Monte Carlo simulator for key distribution from a broadcast thermal source.
#[derive(Parser, Debug)]
#[command(name = "thermal-qkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario and write its artefacts.
    Run {
        /// Scenario file, or the preset name `waveguide` / `freespace`.
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_symbols: Option<usize>,
        #[arg(long, env = "THERMAL_QKD_OUT", default_value = "out")]
        out: PathBuf,
        /// Skip the per-party CSV tables.
        #[arg(long)]
        no_measurements: bool,
        /// Also write bits as text, one per line.
        #[arg(long)]
        text_bits: bool,
    },
    /// Fit a preset's receiver noise to its reference statistics.
    Calibrate {
        /// `waveguide` or `freespace`.
        preset: String,
        #[arg(long, default_value = "configs")]
        out: PathBuf,
        /// Symbols per trial run.
        #[arg(long)]
        n_symbols: Option<usize>,
    },
    /// Vary one numeric setting over a range and tabulate the metrics.
    Sweep {
        /// Dotted setting name, e.g. `eve_transmittance`.
        param: String,
        start: f64,
        stop: f64,
        step: f64,
        #[arg(long, default_value = "waveguide")]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_symbols: Option<usize>,
        /// CSV destination; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run quick internal consistency checks.
    Selftest,
}

fn load_config(source: &str) -> Result<ScenarioConfig> {
    match ScenarioConfig::preset(source) {
        Some(cfg) => Ok(cfg),
        None => ScenarioConfig::load(source.as_ref()),
    }
}

fn overrides(cfg: &mut ScenarioConfig, seed: Option<u64>, n_symbols: Option<usize>) -> Result<()> {
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(n) = n_symbols {
        cfg.n_symbols = n;
    }
    cfg.ensure_valid()
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            n_symbols,
            out,
            no_measurements,
            text_bits,
        } => {
            let mut cfg = load_config(&config)?;
            overrides(&mut cfg, seed, n_symbols)?;
            let run = run_scenario(&cfg)?;
            let opts = OutputOptions {
                measurements: !no_measurements,
                text_bits,
            };
            write_run(&run, &out, opts)?;
            print!("{}", report_json(&run.report)?);
            if let Some(d) = &run.distillation {
                eprintln!(
                    "advantage distillation (block {}): kept {:.4}, ber_ab {:.4}, ber_ae {:.4}",
                    d.block, d.kept_fraction, d.ber_ab, d.ber_ae
                );
            }
            eprintln!("wrote {}", out.display());
        }
        Command::Calibrate {
            preset,
            out,
            n_symbols,
        } => {
            let (base, target, mut space) = match preset.as_str() {
                "waveguide" => (
                    ScenarioConfig::waveguide(),
                    CalibrationTarget::waveguide(),
                    SearchSpace::waveguide(),
                ),
                "freespace" | "free-space" => (
                    ScenarioConfig::freespace(),
                    CalibrationTarget::freespace(),
                    SearchSpace::freespace(),
                ),
                other => {
                    return Err(Error::Validation(vec![thermal_qkd::FieldError::new(
                        "preset",
                        format!("unknown preset `{other}`"),
                    )]))
                }
            };
            if let Some(n) = n_symbols {
                space.n_symbols = n;
            }
            let outcome = calibrate_preset(&base, &target, &space)?;
            let mut cfg = base;
            outcome.apply(&mut cfg);
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{}.toml", target.preset));
            std::fs::write(&path, preset_file(&cfg, &outcome, &target))?;
            for (knob, value) in &outcome.settings {
                println!("{} = {value}", knob.name());
            }
            print!("{}", report_json(&outcome.report)?);
            eprintln!("wrote {}", path.display());
        }
        Command::Sweep {
            param,
            start,
            stop,
            step,
            config,
            seed,
            n_symbols,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            overrides(&mut cfg, seed, n_symbols)?;
            let values = sweep_values(start, stop, step)?;
            let points = sweep(&cfg, &param, &values)?;
            let csv = sweep_csv(&param, &points);
            match out {
                Some(path) => {
                    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                        std::fs::create_dir_all(dir)?;
                    }
                    std::fs::write(&path, csv)?;
                }
                None => print!("{csv}"),
            }
        }
        Command::Selftest => {
            let checks = run_selftest();
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Error::Domain(format!(
                    "{failed} of {} checks failed",
                    checks.len()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Validation(fields) => {
                    eprintln!("error: invalid configuration");
                    for f in fields {
                        eprintln!("  {f}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
