//! Flat key=value run configuration with `[system]` and `[experiment]`
//! sections.
//!
//! Every key has a desk-scale default, so a config file only lists what it
//! overrides; unknown sections or keys are rejected with the offending line
//! number. The resolved configuration is what `sweep` echoes into its run
//! manifest.
//!
//! ```text
//! [system]
//! n_subcarriers = 512
//! n_antennas = 8
//!
//! [experiment]
//! sweep_variable = snr
//! sweep_values = 0,10,20,30,40
//! trials = 200
//! methods = ls,somp,bsomp
//! pilot_scheme = bdso
//! pilot_iterations = 500
//! seed = 1
//! ```

use crate::channel::SystemConfig;
use crate::recovery::RecoveryMethod;
use crate::sim::{ExperimentSpec, PilotScheme, SweepVariable};
use crate::{Error, Result};

/// Parsed run configuration: a system plus an experiment over it.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spec: ExperimentSpec {
                sweep_variable: SweepVariable::Snr,
                sweep_values: vec![0.0, 10.0, 20.0, 30.0, 40.0],
                trials: 50,
                methods: vec![RecoveryMethod::Ls, RecoveryMethod::Somp, RecoveryMethod::Bsomp],
                pilot_scheme: PilotScheme::Bdso,
                pilot_iterations: 500,
                base_config: SystemConfig::desk_scale(),
                seed: 1,
            },
        }
    }
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| bad(line, format!("key '{key}' expects a number, got '{v}'")))
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| bad(line, format!("key '{key}' expects a non-negative integer, got '{v}'")))
}

fn parse_u64(line: usize, key: &str, v: &str) -> Result<u64> {
    v.parse::<u64>()
        .map_err(|_| bad(line, format!("key '{key}' expects a non-negative integer, got '{v}'")))
}

impl RunConfig {
    /// Parse configuration text; `Default` values fill anything not set.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| bad(line_no, "unterminated section header"))?;
                match name {
                    "system" | "experiment" => section = name.to_string(),
                    other => return Err(bad(line_no, format!("unknown section '[{other}]'"))),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line_no, format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            let value = value.trim();
            match section.as_str() {
                "system" => cfg.apply_system_key(line_no, key, value)?,
                "experiment" => cfg.apply_experiment_key(line_no, key, value)?,
                _ => {
                    return Err(bad(
                        line_no,
                        format!("key '{key}' appears before any [system]/[experiment] section"),
                    ))
                }
            }
        }
        // well-formed text describing an infeasible system keeps its
        // parameter-error identity (the CLI maps it to a distinct exit code)
        cfg.spec.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    fn apply_system_key(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let sys = &mut self.spec.base_config;
        match key {
            "n_subcarriers" => sys.n_subcarriers = parse_usize(line, key, value)?,
            "n_groups" => sys.n_groups = parse_usize(line, key, value)?,
            "bem_order" => sys.bem_order = parse_usize(line, key, value)?,
            "channel_length" => sys.channel_length = parse_usize(line, key, value)?,
            "sparsity" => sys.sparsity = parse_usize(line, key, value)?,
            "n_antennas" => sys.n_antennas = parse_usize(line, key, value)?,
            "carrier_hz" => sys.carrier_hz = parse_f64(line, key, value)?,
            "bandwidth_hz" => sys.bandwidth_hz = parse_f64(line, key, value)?,
            "speed_mps" => sys.speed_mps = parse_f64(line, key, value)?,
            "snr_db" => sys.snr_db = parse_f64(line, key, value)?,
            "max_antenna_spacing_m" => sys.max_antenna_spacing_m = parse_f64(line, key, value)?,
            other => return Err(bad(line, format!("unknown key '{other}' in [system]"))),
        }
        Ok(())
    }

    fn apply_experiment_key(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let spec = &mut self.spec;
        match key {
            "sweep_variable" => {
                spec.sweep_variable = SweepVariable::parse(value).ok_or_else(|| {
                    bad(
                        line,
                        format!(
                            "key 'sweep_variable' must be one of snr|doppler|sparsity|iterations, got '{value}'"
                        ),
                    )
                })?
            }
            "sweep_values" => {
                let mut vals = Vec::new();
                for tok in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    vals.push(parse_f64(line, key, tok)?);
                }
                if vals.is_empty() {
                    return Err(bad(line, "key 'sweep_values' needs at least one value"));
                }
                spec.sweep_values = vals;
            }
            "trials" => spec.trials = parse_usize(line, key, value)?,
            "methods" => {
                let mut methods = Vec::new();
                for tok in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    methods.push(RecoveryMethod::parse(tok).ok_or_else(|| {
                        bad(
                            line,
                            format!(
                                "key 'methods' accepts ls|somp|bsomp|uplink_dcs, got '{tok}'"
                            ),
                        )
                    })?);
                }
                spec.methods = methods;
            }
            "pilot_scheme" => {
                spec.pilot_scheme = PilotScheme::parse(value).ok_or_else(|| {
                    bad(
                        line,
                        format!(
                            "key 'pilot_scheme' must be one of equidistant|ga|bdso, got '{value}'"
                        ),
                    )
                })?
            }
            "pilot_iterations" => spec.pilot_iterations = parse_usize(line, key, value)?,
            "seed" => spec.seed = parse_u64(line, key, value)?,
            other => return Err(bad(line, format!("unknown key '{other}' in [experiment]"))),
        }
        Ok(())
    }
}
