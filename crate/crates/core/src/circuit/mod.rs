//! Switch-level model of the addressing circuit and solenoid board.

mod budget;
mod logic;
mod physics;

use thiserror::Error;

use crate::taxel::GridDims;

pub use budget::{resource_budget, ResourceBudget};
pub use logic::{
    check_addressable, column_gate, decode_row, excite, excite_with, scan_hazards, CoilExcitation,
    Drive, GateLogic, Hazard, HazardKind, HazardReport, PinState, COLUMN_PORT_BITS,
    DECODER_LINES, ROW_ADDR_BITS,
};
pub use physics::{
    apply_press, apply_pulse, pulse_energy, pulse_voltage, thermal_step, EnergyLedger,
    PowerParams, ThermalParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("row address {0} does not fit in 4 bits")]
    RowAddrOutOfRange(u8),
    #[error("{0} grid exceeds the 16-row decoder or 16-bit column port")]
    Unaddressable(GridDims),
    #[error("excitation is {excitation} but the grid is {grid}")]
    DimsMismatch { grid: GridDims, excitation: GridDims },
    #[error("filling coefficient must be in (0, 1], got {0}")]
    InvalidDuty(f64),
    #[error("invalid power parameters: {0}")]
    InvalidPower(&'static str),
    #[error("duration must be positive, got {0}")]
    InvalidDuration(f64),
}
