//! Flat `key = value` experiment configuration.
//!
//! Every key has a default and a value type. Files and command-line
//! overrides are applied in order; unknown keys and malformed values are
//! rejected. [`Config::manifest`] writes the fully resolved configuration in
//! the same format, so a run can be repeated from its manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::alloc::RadioParams;
use crate::discovery::ImportantParams;
use crate::error::ConfigError;
use crate::geo::NodeId;
use crate::sim::SimConfig;
use crate::topology::ReceiverPlacement;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Float,
    Bool,
    Text,
    /// Unsigned integer or `none`.
    OptInt,
    Choice(&'static [&'static str]),
}

struct Key {
    name: &'static str,
    default: &'static str,
    kind: Kind,
    help: &'static str,
}

const fn key(name: &'static str, default: &'static str, kind: Kind, help: &'static str) -> Key {
    Key {
        name,
        default,
        kind,
        help,
    }
}

const KEYS: &[Key] = &[
    key("seed", "1", Kind::Int, "master seed"),
    key("repetitions", "1", Kind::Int, "independent repetitions"),
    key(
        "topology",
        "random",
        Kind::Choice(&["random", "grid", "file"]),
        "topology source",
    ),
    key(
        "topology_file",
        "",
        Kind::Text,
        "topology CSV when topology = file",
    ),
    key(
        "grid",
        "tynset",
        Kind::Text,
        "bundled grid name or population grid CSV path",
    ),
    key("n_pairs", "5000", Kind::Int, "links in a random topology"),
    key(
        "side_m",
        "5000",
        Kind::Float,
        "side of the square random topology area",
    ),
    key(
        "max_link_distance_m",
        "50",
        Kind::Float,
        "maximum transmitter-receiver distance",
    ),
    key(
        "receiver_placement",
        "square",
        Kind::Choice(&["square", "disc"]),
        "receiver offset distribution",
    ),
    key(
        "persons_per_household",
        "2.22",
        Kind::Float,
        "population per link in grid topologies",
    ),
    key("latency_ms", "50", Kind::Int, "one-way message latency"),
    key("news_period_ms", "15000", Kind::Int, "news exchange period"),
    key(
        "important_period_ms",
        "15000",
        Kind::Int,
        "mean important-nodes exchange period",
    ),
    key("news_table_size", "40", Kind::Int, "news table size N"),
    key(
        "exchange_k",
        "100",
        Kind::Int,
        "important nodes sent per exchange K",
    ),
    key(
        "max_table_size",
        "600",
        Kind::Int,
        "important table size limit M",
    ),
    key(
        "dynamic_table",
        "true",
        Kind::Bool,
        "grow the important table by K as needed",
    ),
    key(
        "warm_start",
        "true",
        Kind::Bool,
        "start with random news tables",
    ),
    key(
        "warm_start_items",
        "40",
        Kind::Int,
        "news items per node at a warm start",
    ),
    key(
        "bootstrap_node",
        "none",
        Kind::OptInt,
        "well-known node id for cold starts",
    ),
    key("max_time_s", "3600", Kind::Int, "event engine cut-off"),
    key("max_iterations", "200", Kind::Int, "cycle engine cut-off"),
    key(
        "sample_interval_s",
        "10",
        Kind::Int,
        "metric sampling interval",
    ),
    key(
        "verify",
        "false",
        Kind::Bool,
        "check invariants while running",
    ),
    key(
        "join_links",
        "1",
        Kind::Int,
        "links added by discovery-join",
    ),
    key("channels", "10", Kind::Int, "available channels"),
    key("max_power_w", "0.1", Kind::Float, "transmit power cap"),
    key("noise_w", "1e-8", Kind::Float, "thermal noise power"),
    key(
        "path_loss_exponent",
        "3",
        Kind::Float,
        "gain = distance^-exponent",
    ),
    key(
        "min_gain_distance_m",
        "1",
        Kind::Float,
        "distances below this are clamped",
    ),
    key(
        "alloc_max_iterations",
        "20",
        Kind::Int,
        "best-response iteration limit",
    ),
    key(
        "focus",
        "tynset",
        Kind::Text,
        "links the allocation updates: tynset, all or x0,y0,x1,y1",
    ),
    key(
        "knowledge",
        "discovered",
        Kind::Choice(&["discovered", "full", "empty"]),
        "receivers each transmitter knows",
    ),
    key(
        "duration_s",
        "300",
        Kind::Int,
        "length of allocation time series",
    ),
    key(
        "insert_links",
        "10",
        Kind::Int,
        "links inserted by the domino experiment",
    ),
    key(
        "insert_at_s",
        "230",
        Kind::Int,
        "insertion time in the domino experiment",
    ),
];

fn find_key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|k| (k.name, k.default.to_string()))
                .collect(),
        }
    }
}

impl Config {
    /// Sets one key after validating the value.
    pub fn set(&mut self, name: &str, value: &str) -> Result<(), ConfigError> {
        let key = find_key(name).ok_or_else(|| ConfigError::UnknownKey(name.to_string()))?;
        let value = value.trim();
        let invalid = |reason: &str| ConfigError::InvalidValue {
            key: name.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        match key.kind {
            Kind::Int => {
                value.parse::<u64>().map_err(|e| invalid(&e.to_string()))?;
            }
            Kind::Float => {
                let v: f64 = value
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| invalid(&e.to_string()))?;
                if !v.is_finite() {
                    return Err(invalid("must be finite"));
                }
            }
            Kind::Bool => {
                value.parse::<bool>().map_err(|e| invalid(&e.to_string()))?;
            }
            Kind::OptInt => {
                if value != "none" {
                    value.parse::<u64>().map_err(|e| invalid(&e.to_string()))?;
                }
            }
            Kind::Choice(options) => {
                if !options.contains(&value) {
                    return Err(invalid(&format!("expected one of {}", options.join(", "))));
                }
            }
            Kind::Text => {}
        }
        self.values.insert(key.name, value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(k.trim(), v)
    }

    /// Applies every assignment in `text`. Blank lines and `#` comments are
    /// skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: n + 1 })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    pub fn get(&self, name: &str) -> &str {
        self.values
            .get(name)
            .unwrap_or_else(|| panic!("unknown configuration key `{name}`"))
    }

    pub fn u64(&self, name: &str) -> u64 {
        self.get(name).parse().expect("validated on set")
    }

    pub fn u32(&self, name: &str) -> u32 {
        self.u64(name).try_into().unwrap_or(u32::MAX)
    }

    pub fn usize(&self, name: &str) -> usize {
        self.u64(name).try_into().unwrap_or(usize::MAX)
    }

    pub fn f64(&self, name: &str) -> f64 {
        self.get(name).parse().expect("validated on set")
    }

    pub fn bool(&self, name: &str) -> bool {
        self.get(name).parse().expect("validated on set")
    }

    pub fn opt_u64(&self, name: &str) -> Option<u64> {
        match self.get(name) {
            "none" => None,
            v => Some(v.parse().expect("validated on set")),
        }
    }

    /// Resolved configuration, one `key = value` per line in key order.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Keys with their defaults and descriptions.
    pub fn describe() -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{:<24} {:<12} {}", k.name, k.default, k.help);
        }
        out
    }

    pub fn receiver_placement(&self) -> ReceiverPlacement {
        self.get("receiver_placement")
            .parse()
            .expect("validated on set")
    }

    pub fn sim_config(&self) -> SimConfig {
        let k = self.usize("exchange_k");
        let m = self.usize("max_table_size");
        SimConfig {
            latency_ms: self.u32("latency_ms"),
            news_period_ms: self.u32("news_period_ms"),
            important_period_ms: self.u32("important_period_ms"),
            news_table_size: self.usize("news_table_size"),
            important: if self.bool("dynamic_table") {
                ImportantParams::dynamic(k, m)
            } else {
                ImportantParams::fixed(k, m)
            },
            warm_start: self.bool("warm_start"),
            warm_start_items: self.usize("warm_start_items"),
            bootstrap: self.opt_u64("bootstrap_node").map(NodeId),
            seed: self.u64("seed"),
            stop_when_stable: true,
            max_time_ms: self.u32("max_time_s").saturating_mul(1000),
            max_iterations: self.u32("max_iterations"),
            sample_interval_ms: self.u32("sample_interval_s").saturating_mul(1000),
            verify: self.bool("verify"),
        }
    }

    pub fn radio_params(&self) -> RadioParams {
        RadioParams {
            channels: self.u64("channels").try_into().unwrap_or(u16::MAX),
            max_power_w: self.f64("max_power_w"),
            noise_w: self.f64("noise_w"),
            path_loss_exponent: self.f64("path_loss_exponent"),
            min_gain_distance: self.f64("min_gain_distance_m"),
            max_iterations: self.u32("alloc_max_iterations"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_engine_defaults() {
        let c = Config::default();
        let sim = c.sim_config();
        let d = SimConfig {
            seed: 1,
            ..SimConfig::default()
        };
        assert_eq!(sim, d);
        assert_eq!(c.radio_params(), RadioParams::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let mut c = Config::default();
        assert!(matches!(
            c.set("nonsense", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            c.set("seed", "-3"),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            c.set("topology", "mesh"),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            c.set("noise_w", "inf"),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            c.apply_text("seed 3"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        c.set("bootstrap_node", "none").unwrap();
        c.set("bootstrap_node", "17").unwrap();
        assert_eq!(c.opt_u64("bootstrap_node"), Some(17));
    }

    #[test]
    fn manifest_round_trips() {
        let mut c = Config::default();
        c.apply_text("# comment\nseed = 9\n\nwarm_start=false\n")
            .unwrap();
        c.apply_override("channels=4").unwrap();
        let mut d = Config::default();
        d.apply_text(&c.manifest()).unwrap();
        assert_eq!(c, d);
        assert_eq!(d.u64("seed"), 9);
        assert!(!d.bool("warm_start"));
        assert_eq!(d.radio_params().channels, 4);
    }
}
