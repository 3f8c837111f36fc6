//! Scenario configuration.
//!
//! The file format is TOML restricted to flat, dotted keys, one setting per
//! line:
//!
//! ```text
//! seed = 7
//! n_symbols = 3000000
//! eve_transmittance = 0.5
//! source.nbar = 50.0
//! source.d0 = 35.0
//! bob_link.transmittance = 0.9
//! bob_link.drift.walk_sigma = 0.0003
//! bob_link.taps = [{ delay = 2, amplitude = 0.06, phase = 1.9 }]
//! ```
//!
//! Keys not listed fall back to their defaults where one exists; unknown keys
//! are rejected. Seeds must fit in a signed 64-bit integer.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{make_freespace_preset, make_waveguide_preset, ChannelParams, LinkSet};
use crate::error::{Error, FieldError, Result};
use crate::modem::MIN_PILOTS;
use crate::optics::SourceParams;

pub const MIN_SYMBOLS: usize = 1000;

/// Hardware figures of the reference apparatus. Recorded in outputs, never
/// used by the symbol-level simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Metadata {
    pub carrier_hz: f64,
    pub sample_rate_hz: f64,
    pub max_input_dbm: f64,
    pub distance_m: f64,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata {
            carrier_hz: 2.0e9,
            sample_rate_hz: 250.0e3,
            max_input_dbm: -30.0,
            distance_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_symbols: usize,
    pub source: SourceParams,
    pub alice_link: ChannelParams,
    pub bob_link: ChannelParams,
    pub eve_link: ChannelParams,
    /// Fraction of the broadcast intensity that Eve's splitter passes to Bob.
    pub eve_transmittance: f64,
    #[serde(default = "defaults::coherence_len")]
    pub coherence_len: usize,
    #[serde(default = "defaults::pilot_len")]
    pub pilot_len: usize,
    #[serde(default)]
    pub ad_block: Option<usize>,
    /// Largest link delay searched during alignment.
    #[serde(default = "defaults::max_lag")]
    pub max_lag: usize,
    /// Heterodyne noise per quadrature, in vacuum units.
    #[serde(default = "defaults::detection_noise_var")]
    pub detection_noise_var: f64,
    #[serde(default)]
    pub metadata: Metadata,
}

mod defaults {
    pub fn coherence_len() -> usize {
        10_000
    }
    pub fn pilot_len() -> usize {
        64
    }
    pub fn max_lag() -> usize {
        1000
    }
    pub fn detection_noise_var() -> f64 {
        1.0
    }
}

impl ScenarioConfig {
    fn with_links(seed: u64, source: SourceParams, links: LinkSet) -> Self {
        ScenarioConfig {
            seed,
            n_symbols: 3_000_000,
            source,
            alice_link: links.alice,
            bob_link: links.bob,
            eve_link: links.eve,
            eve_transmittance: 0.5,
            coherence_len: defaults::coherence_len(),
            pilot_len: defaults::pilot_len(),
            ad_block: Some(2),
            max_lag: defaults::max_lag(),
            detection_noise_var: defaults::detection_noise_var(),
            metadata: Metadata::default(),
        }
    }

    /// Waveguide apparatus with an attenuated source.
    pub fn waveguide() -> Self {
        Self::with_links(
            1,
            SourceParams {
                nbar: 50.0,
                d0: 35.0,
            },
            make_waveguide_preset(),
        )
    }

    /// Free-space broadcast over 1 m.
    pub fn freespace() -> Self {
        Self::with_links(
            1,
            SourceParams {
                nbar: 200.0,
                d0: 70.0,
            },
            make_freespace_preset(),
        )
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "waveguide" => Some(Self::waveguide()),
            "freespace" | "free-space" => Some(Self::freespace()),
            _ => None,
        }
    }

    pub fn links(&self) -> LinkSet {
        LinkSet {
            alice: self.alice_link.clone(),
            bob: self.bob_link.clone(),
            eve: self.eve_link.clone(),
        }
    }

    /// Every violated constraint, by field.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if self.n_symbols < MIN_SYMBOLS {
            errors.push(FieldError::new(
                "n_symbols",
                format!("must be >= {MIN_SYMBOLS}, got {}", self.n_symbols),
            ));
        }
        errors.extend(self.source.validate("source"));
        errors.extend(self.links().validate());
        if !(0.0..=1.0).contains(&self.eve_transmittance) {
            errors.push(FieldError::new(
                "eve_transmittance",
                format!("must lie in [0, 1], got {}", self.eve_transmittance),
            ));
        }
        if self.pilot_len < MIN_PILOTS {
            errors.push(FieldError::new(
                "pilot_len",
                format!("must be >= {MIN_PILOTS}, got {}", self.pilot_len),
            ));
        }
        if self.coherence_len < self.pilot_len {
            errors.push(FieldError::new(
                "coherence_len",
                format!(
                    "must be >= pilot_len ({}), got {}",
                    self.pilot_len, self.coherence_len
                ),
            ));
        } else if self.n_symbols < self.pilot_len * (self.n_symbols / self.coherence_len) {
            errors.push(FieldError::new(
                "pilot_len",
                "pilots exceed the symbol budget",
            ));
        }
        if let Some(block) = self.ad_block {
            if block < 2 {
                errors.push(FieldError::new(
                    "ad_block",
                    format!("must be >= 2, got {block}"),
                ));
            }
        }
        if self.max_lag == 0 {
            errors.push(FieldError::new("max_lag", "must be >= 1"));
        } else if self.n_symbols < 4 * self.max_lag {
            errors.push(FieldError::new(
                "max_lag",
                format!(
                    "n_symbols ({}) must be at least 4 * max_lag ({})",
                    self.n_symbols,
                    4 * self.max_lag
                ),
            ));
        }
        for (name, link) in [
            ("alice_link", &self.alice_link),
            ("bob_link", &self.bob_link),
            ("eve_link", &self.eve_link),
        ] {
            if link.delay > self.max_lag {
                errors.push(FieldError::new(
                    format!("{name}.delay"),
                    format!("exceeds max_lag ({}), got {}", self.max_lag, link.delay),
                ));
            }
        }
        let v = self.detection_noise_var;
        if !(v.is_finite() && v >= 0.0) {
            errors.push(FieldError::new(
                "detection_noise_var",
                format!("must be >= 0, got {v}"),
            ));
        }
        errors
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let errors = self.validate();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    /// Parses and validates a configuration.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.ensure_valid()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    /// Flat dotted-key rendering, parseable by [`Self::from_config_str`].
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut line = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        line("seed", self.seed.to_string());
        line("n_symbols", self.n_symbols.to_string());
        line("eve_transmittance", float(self.eve_transmittance));
        line("coherence_len", self.coherence_len.to_string());
        line("pilot_len", self.pilot_len.to_string());
        line("max_lag", self.max_lag.to_string());
        line("detection_noise_var", float(self.detection_noise_var));
        if let Some(block) = self.ad_block {
            line("ad_block", block.to_string());
        }
        line("source.nbar", float(self.source.nbar));
        line("source.d0", float(self.source.d0));
        for (name, link) in [
            ("alice_link", &self.alice_link),
            ("bob_link", &self.bob_link),
            ("eve_link", &self.eve_link),
        ] {
            line(&format!("{name}.transmittance"), float(link.transmittance));
            line(&format!("{name}.delay"), link.delay.to_string());
            line(&format!("{name}.rx_noise_var"), float(link.rx_noise_var));
            line(&format!("{name}.drift.offset"), float(link.drift.offset));
            line(
                &format!("{name}.drift.walk_sigma"),
                float(link.drift.walk_sigma),
            );
            line(
                &format!("{name}.drift.hop_prob"),
                float(link.drift.hop_prob),
            );
            line(
                &format!("{name}.drift.hop_scale"),
                float(link.drift.hop_scale),
            );
            let taps: Vec<String> = link
                .taps
                .iter()
                .map(|t| {
                    format!(
                        "{{ delay = {}, amplitude = {}, phase = {} }}",
                        t.delay,
                        float(t.amplitude),
                        float(t.phase)
                    )
                })
                .collect();
            line(&format!("{name}.taps"), format!("[{}]", taps.join(", ")));
        }
        line("metadata.carrier_hz", float(self.metadata.carrier_hz));
        line(
            "metadata.sample_rate_hz",
            float(self.metadata.sample_rate_hz),
        );
        line("metadata.max_input_dbm", float(self.metadata.max_input_dbm));
        line("metadata.distance_m", float(self.metadata.distance_m));
        out
    }

    /// Overwrites the numeric setting at a dotted `key`, e.g.
    /// `bob_link.rx_noise_var`. Integer settings must receive integral values.
    pub fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        let unknown = || Error::Validation(vec![FieldError::new(key, "not a numeric setting")]);
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Parse(e.to_string()))?;
        let mut node = &mut root;
        for part in key.split('.') {
            node = node.get_mut(part).ok_or_else(unknown)?;
        }
        *node = match node {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 && value >= 0.0 => {
                toml::Value::Integer(value as i64)
            }
            toml::Value::Integer(_) => {
                return Err(Error::Validation(vec![FieldError::new(
                    key,
                    format!("expects a non-negative integer, got {value}"),
                )]))
            }
            _ => return Err(unknown()),
        };
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

/// Shortest round-trip float text, always valid TOML.
fn float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'i', 'N']) {
        s
    } else {
        format!("{s}.0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [ScenarioConfig::waveguide(), ScenarioConfig::freespace()] {
            assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
            let text = cfg.to_config_string();
            let back = ScenarioConfig::from_config_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let text = "\
seed = 3
n_symbols = 5000
eve_transmittance = 0.5
source.nbar = 2.0
source.d0 = 7.0
alice_link.transmittance = 1.0
bob_link.transmittance = 1.0
eve_link.transmittance = 1.0
";
        let cfg = ScenarioConfig::from_config_str(text).unwrap();
        assert_eq!(cfg.coherence_len, 10_000);
        assert_eq!(cfg.pilot_len, 64);
        assert_eq!(cfg.ad_block, None);
        assert_eq!(cfg.detection_noise_var, 1.0);
        assert!(cfg.bob_link.taps.is_empty());
    }

    #[test]
    fn validation_lists_every_offending_field() {
        let mut cfg = ScenarioConfig::waveguide();
        cfg.n_symbols = 10;
        cfg.eve_transmittance = 1.5;
        cfg.bob_link.rx_noise_var = -1.0;
        cfg.ad_block = Some(1);
        let fields: Vec<String> = cfg.validate().into_iter().map(|f| f.field).collect();
        for expected in [
            "n_symbols",
            "eve_transmittance",
            "bob_link.rx_noise_var",
            "ad_block",
            "max_lag",
        ] {
            assert!(
                fields.iter().any(|f| f == expected),
                "{expected} missing from {fields:?}"
            );
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ScenarioConfig::waveguide().to_config_string();
        text.push_str("bob_link.colour = 3\n");
        let err = ScenarioConfig::from_config_str(&text).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn set_param_by_dotted_key() {
        let mut cfg = ScenarioConfig::waveguide();
        cfg.set_param("eve_transmittance", 0.3).unwrap();
        cfg.set_param("bob_link.drift.walk_sigma", 0.01).unwrap();
        cfg.set_param("alice_link.delay", 9.0).unwrap();
        assert_eq!(cfg.eve_transmittance, 0.3);
        assert_eq!(cfg.bob_link.drift.walk_sigma, 0.01);
        assert_eq!(cfg.alice_link.delay, 9);
        assert!(cfg.set_param("alice_link.delay", 1.5).is_err());
        assert!(cfg.set_param("nonsense.key", 1.0).is_err());
        assert!(cfg.set_param("bob_link.taps", 1.0).is_err());
    }
}
