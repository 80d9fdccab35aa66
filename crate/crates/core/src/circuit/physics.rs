//! Solenoid response to coil pulses, pulse energy and a lumped thermal model.

use super::logic::{CoilExcitation, Drive};
use super::CircuitError;
use crate::taxel::{GridState, Plunger, SolenoidSpec, SolenoidState};

/// Electrical drive parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    /// Catalogue DC voltage for continuous operation.
    pub u_dc_v: f64,
    /// Filling coefficient of the pulsed drive, in (0, 1].
    pub duty: f64,
    pub pulse_width_s: f64,
    pub coil_resistance_ohm: f64,
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), CircuitError> {
        if !(self.u_dc_v > 0.0 && self.u_dc_v.is_finite()) {
            return Err(CircuitError::InvalidPower("u_dc_v must be > 0"));
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(CircuitError::InvalidDuty(self.duty));
        }
        if !(self.pulse_width_s > 0.0 && self.pulse_width_s.is_finite()) {
            return Err(CircuitError::InvalidPower("pulse_width_s must be > 0"));
        }
        if !(self.coil_resistance_ohm > 0.0 && self.coil_resistance_ohm.is_finite()) {
            return Err(CircuitError::InvalidPower("coil_resistance_ohm must be > 0"));
        }
        Ok(())
    }

    /// Continuous 12 V drive of the default solenoid with a 10 ms pulse.
    pub fn for_solenoid(spec: &SolenoidSpec) -> Self {
        Self {
            u_dc_v: spec.nominal_dc_voltage_v,
            duty: 1.0,
            pulse_width_s: 0.01,
            coil_resistance_ohm: spec.coil_resistance_ohm,
        }
    }
}

impl Default for PowerParams {
    fn default() -> Self {
        Self::for_solenoid(&SolenoidSpec::default())
    }
}

/// Pulse voltage for a pulsed drive: the DC rating scaled by `1 / duty`.
pub fn pulse_voltage(power: &PowerParams) -> Result<f64, CircuitError> {
    power.validate()?;
    Ok(power.u_dc_v / power.duty)
}

/// Resistive energy of one coil pulse, `U_P² / R · t`.
pub fn pulse_energy(power: &PowerParams) -> Result<f64, CircuitError> {
    let u = pulse_voltage(power)?;
    Ok(u * u / power.coil_resistance_ohm * power.pulse_width_s)
}

/// Running totals of coil activity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    pub set_pulses: u64,
    pub reset_pulses: u64,
    pub total_joules: f64,
    /// Energy drawn while plungers are merely held. Latched solenoids draw
    /// none, so this stays at zero.
    pub static_joules: f64,
}

impl EnergyLedger {
    pub fn pulses(&self) -> u64 {
        self.set_pulses + self.reset_pulses
    }
}

/// Fires one step's coil pulses into the board.
///
/// Returns the energy deposited in each taxel, row-major. A taxel driven on
/// both coils at once is pulled both ways: its plunger keeps its position
/// and both pulses are charged.
pub fn apply_pulse(
    grid: &mut GridState,
    excitation: &CoilExcitation,
    power: &PowerParams,
    ledger: &mut EnergyLedger,
) -> Result<Vec<f64>, CircuitError> {
    if grid.dims() != excitation.dims() {
        return Err(CircuitError::DimsMismatch {
            grid: grid.dims(),
            excitation: excitation.dims(),
        });
    }
    let per_pulse = pulse_energy(power)?;
    let mut deposited = vec![0.0; grid.cells().len()];
    for ((cell, &drive), heat) in grid
        .cells_mut()
        .iter_mut()
        .zip(excitation.drives())
        .zip(deposited.iter_mut())
    {
        if drive.drives_set() {
            cell.set_pulse_count += 1;
            ledger.set_pulses += 1;
            *heat += per_pulse;
        }
        if drive.drives_reset() {
            cell.reset_pulse_count += 1;
            ledger.reset_pulses += 1;
            *heat += per_pulse;
        }
        match drive {
            Drive::Set => cell.plunger = Plunger::Up,
            Drive::Reset => cell.plunger = Plunger::Down,
            Drive::None | Drive::Both => {}
        }
        ledger.total_joules += *heat;
    }
    Ok(deposited)
}

/// Lumped thermal constants of one solenoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    /// Temperature rise per joule deposited in the coil.
    pub c_per_joule: f64,
    /// Newtonian cooling rate towards ambient.
    pub cooling_rate_per_s: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            c_per_joule: 5.0,
            cooling_rate_per_s: 0.1,
        }
    }
}

/// Advances one cell's temperature by `dt` seconds after absorbing
/// `joules_in`.
pub fn thermal_step(
    cell: &SolenoidState,
    joules_in: f64,
    dt: f64,
    ambient_c: f64,
    thermal: &ThermalParams,
) -> Result<SolenoidState, CircuitError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(CircuitError::InvalidDuration(dt));
    }
    let t = cell.temperature_c;
    Ok(SolenoidState {
        temperature_c: t + thermal.c_per_joule * joules_in
            - thermal.cooling_rate_per_s * (t - ambient_c) * dt,
        ..cell.clone()
    })
}

/// A finger pressing on a taxel. An up plunger pressed at or beyond the
/// holding force (strictly beyond, if the spec says so) is pushed back down.
/// No energy is involved.
pub fn apply_press(cell: &SolenoidState, force_g: f64, spec: &SolenoidSpec) -> SolenoidState {
    let overcomes = if spec.release_at_threshold {
        force_g >= spec.holding_force_g
    } else {
        force_g > spec.holding_force_g
    };
    let mut out = cell.clone();
    if cell.is_up() && overcomes {
        out.plunger = Plunger::Down;
    }
    out
}
