//! Flat `section.key=value` configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; missing
//! keys keep the reference defaults (16×16 grid, 12 V drive).

use std::path::Path;
use std::str::FromStr;

use tactile_core::circuit::{GateLogic, PowerParams, ThermalParams};
use tactile_core::device::DeviceConfig;
use tactile_core::firmware::Timing;
use tactile_core::taxel::{SolenoidSpec, RATED_AMBIENT_C};
use tactile_core::GridDims;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub rows: usize,
    pub cols: usize,
    pub power: PowerParams,
    pub timing: Timing,
    pub thermal: ThermalParams,
    pub ambient_c: f64,
    pub solenoid: SolenoidSpec,
    pub strict_hazards: bool,
    pub skip_reset_if_clear: bool,
}

impl Default for Config {
    fn default() -> Self {
        let solenoid = SolenoidSpec::default();
        Self {
            rows: 16,
            cols: 16,
            power: PowerParams::for_solenoid(&solenoid),
            timing: Timing::default(),
            thermal: ThermalParams::default(),
            ambient_c: RATED_AMBIENT_C,
            solenoid,
            strict_hazards: false,
            skip_reset_if_clear: false,
        }
    }
}

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.into(),
        value: value.into(),
    })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let f = |v: &mut f64| -> Result<(), ConfigError> {
                *v = parse(line, key, value)?;
                Ok(())
            };
            match key {
                "grid.rows" => cfg.rows = parse(line, key, value)?,
                "grid.cols" => cfg.cols = parse(line, key, value)?,
                "power.u_dc_v" => f(&mut cfg.power.u_dc_v)?,
                "power.duty" => f(&mut cfg.power.duty)?,
                "power.pulse_width_s" => f(&mut cfg.power.pulse_width_s)?,
                "power.coil_resistance_ohm" => f(&mut cfg.power.coil_resistance_ohm)?,
                "timing.pulse_width_s" => f(&mut cfg.timing.pulse_width_s)?,
                "timing.settle_s" => f(&mut cfg.timing.settle_s)?,
                "thermal.c_per_joule" => f(&mut cfg.thermal.c_per_joule)?,
                "thermal.cooling_rate_per_s" => f(&mut cfg.thermal.cooling_rate_per_s)?,
                "thermal.ambient_c" => f(&mut cfg.ambient_c)?,
                "solenoid.width_mm" => f(&mut cfg.solenoid.width_mm)?,
                "solenoid.depth_mm" => f(&mut cfg.solenoid.depth_mm)?,
                "solenoid.height_mm" => f(&mut cfg.solenoid.height_mm)?,
                "solenoid.mass_g" => f(&mut cfg.solenoid.mass_g)?,
                "solenoid.holding_force_g" => f(&mut cfg.solenoid.holding_force_g)?,
                "solenoid.coil_resistance_ohm" => f(&mut cfg.solenoid.coil_resistance_ohm)?,
                "solenoid.nominal_dc_voltage_v" => f(&mut cfg.solenoid.nominal_dc_voltage_v)?,
                "solenoid.release_at_threshold" => {
                    cfg.solenoid.release_at_threshold = parse(line, key, value)?
                }
                "sim.strict_hazards" => cfg.strict_hazards = parse(line, key, value)?,
                "firmware.skip_reset_if_clear" => {
                    cfg.skip_reset_if_clear = parse(line, key, value)?
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.into(),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn dims(&self) -> Result<GridDims, ConfigError> {
        GridDims::new(self.rows, self.cols).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        let dims = self.dims()?;
        tactile_core::circuit::check_addressable(dims).map_err(|e| invalid(&e))?;
        self.power.validate().map_err(|e| invalid(&e))?;
        self.timing.validate().map_err(|e| invalid(&e))?;
        self.solenoid.validate().map_err(|e| invalid(&e))?;
        if !(self.thermal.c_per_joule >= 0.0 && self.thermal.cooling_rate_per_s >= 0.0) {
            return Err(ConfigError::Invalid("thermal constants must be non-negative".into()));
        }
        if !self.ambient_c.is_finite() {
            return Err(ConfigError::Invalid("ambient temperature must be finite".into()));
        }
        Ok(())
    }

    pub fn device_config(&self, logic: GateLogic, trace: bool) -> Result<DeviceConfig, ConfigError> {
        Ok(DeviceConfig {
            dims: self.dims()?,
            power: self.power,
            thermal: self.thermal,
            ambient_c: self.ambient_c,
            timing: self.timing,
            skip_reset_if_clear: self.skip_reset_if_clear,
            strict_hazards: self.strict_hazards,
            logic,
            trace,
        })
    }
}
