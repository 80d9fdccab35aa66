//! Row decoder, column gates and the transistor matrix.
//!
//! Port A drives a 4-to-16 line decoder whose outputs each switch one row's
//! common line to ground. PA4 is the mode line. Each of the 16 port B bits
//! feeds two gates: `PA4 XOR PBn` drives the set transistor of column `n`,
//! `PA4 AND PBn` drives its reset transistor. A coil conducts only when its
//! row is grounded and its column transistor is open.

use std::fmt;

use super::CircuitError;
use crate::taxel::GridDims;

/// Number of row-address lines (PA0..PA3).
pub const ROW_ADDR_BITS: u32 = 4;
/// Decoder outputs.
pub const DECODER_LINES: usize = 1 << ROW_ADDR_BITS;
/// Width of the column port (PB0..PB15).
pub const COLUMN_PORT_BITS: usize = 16;

/// Controller outputs seen by the addressing circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PinState {
    row_addr: u8,
    pub row_enable: bool,
    /// PA4: `false` selects the set phase, `true` the reset phase.
    pub mode: bool,
    /// PB0..PB15, bit `n` = PBn.
    pub col: u16,
}

impl PinState {
    pub fn new(row_addr: u8, row_enable: bool, mode: bool, col: u16) -> Result<Self, CircuitError> {
        if usize::from(row_addr) >= DECODER_LINES {
            return Err(CircuitError::RowAddrOutOfRange(row_addr));
        }
        Ok(Self {
            row_addr,
            row_enable,
            mode,
            col,
        })
    }

    /// All outputs low, decoder disabled.
    pub fn idle() -> Self {
        Self::default()
    }

    pub fn row_addr(&self) -> u8 {
        self.row_addr
    }

    pub fn col_bit(&self, col: usize) -> bool {
        col < COLUMN_PORT_BITS && self.col >> col & 1 == 1
    }
}

impl fmt::Display for PinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PA={:04b} EN={} PA4={} PB={:04x}",
            self.row_addr, self.row_enable as u8, self.mode as u8, self.col
        )
    }
}

/// Which gate network drives the column transistors.
///
/// `SetGateAnd` is a deliberately broken variant used to check that the
/// verification oracle notices faulty gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateLogic {
    #[default]
    Reference,
    SetGateAnd,
}

impl GateLogic {
    /// `(set_gate, reset_gate)` for one column.
    pub fn column_gate(self, mode: bool, col_bit: bool) -> (bool, bool) {
        let set = match self {
            GateLogic::Reference => mode ^ col_bit,
            GateLogic::SetGateAnd => mode & col_bit,
        };
        (set, mode & col_bit)
    }
}

/// Active decoder outputs, bit `n` = line `n`.
///
/// The decoder is one-of-sixteen: at most one line is active.
pub fn decode_row(row_addr: u8, enable: bool) -> u16 {
    if enable {
        1 << (row_addr & 0x0f)
    } else {
        0
    }
}

/// Gate levels of the reference network.
pub fn column_gate(mode: bool, col_bit: bool) -> (bool, bool) {
    GateLogic::Reference.column_gate(mode, col_bit)
}

/// Drive on one taxel's coils during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Drive {
    #[default]
    None,
    Set,
    Reset,
    /// Both coils conducting. Unreachable with the reference gates; kept so a
    /// faulty network can be observed rather than silently masked.
    Both,
}

impl Drive {
    fn from_gates(set: bool, reset: bool) -> Self {
        match (set, reset) {
            (false, false) => Drive::None,
            (true, false) => Drive::Set,
            (false, true) => Drive::Reset,
            (true, true) => Drive::Both,
        }
    }

    pub fn drives_set(self) -> bool {
        matches!(self, Drive::Set | Drive::Both)
    }

    pub fn drives_reset(self) -> bool {
        matches!(self, Drive::Reset | Drive::Both)
    }
}

/// Coil drive for every taxel during one step, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoilExcitation {
    dims: GridDims,
    drives: Vec<Drive>,
}

impl CoilExcitation {
    pub fn idle(dims: GridDims) -> Self {
        Self {
            dims,
            drives: vec![Drive::None; dims.cell_count()],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn get(&self, row: usize, col: usize) -> Drive {
        self.drives[self.dims.index(row, col)]
    }

    pub fn drives(&self) -> &[Drive] {
        &self.drives
    }

    pub fn is_idle(&self) -> bool {
        self.drives.iter().all(|&d| d == Drive::None)
    }

    /// Coordinates with a non-`None` drive matching `pred`, row-major.
    pub fn coords(&self, pred: impl Fn(Drive) -> bool) -> Vec<(usize, usize)> {
        let cols = self.dims.cols();
        self.drives
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != Drive::None && pred(d))
            .map(|(i, _)| (i / cols, i % cols))
            .collect()
    }

    /// Rows containing at least one driven coil.
    pub fn driven_rows(&self) -> Vec<usize> {
        let cols = self.dims.cols();
        let mut rows: Vec<usize> = self
            .drives
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != Drive::None)
            .map(|(i, _)| i / cols)
            .collect();
        rows.dedup();
        rows
    }
}

/// Checks that a grid can be wired to the 4-bit row address and 16-bit port.
pub fn check_addressable(dims: GridDims) -> Result<(), CircuitError> {
    if dims.rows() > DECODER_LINES || dims.cols() > COLUMN_PORT_BITS {
        return Err(CircuitError::Unaddressable(dims));
    }
    Ok(())
}

/// Evaluates the reference gate network.
pub fn excite(pins: &PinState, dims: GridDims) -> Result<CoilExcitation, CircuitError> {
    excite_with(GateLogic::Reference, pins, dims)
}

/// Evaluates `logic` for one pin state. Taxels in rows whose common line is
/// not grounded see no current whatever the column gates do.
pub fn excite_with(
    logic: GateLogic,
    pins: &PinState,
    dims: GridDims,
) -> Result<CoilExcitation, CircuitError> {
    check_addressable(dims)?;
    let mut exc = CoilExcitation::idle(dims);
    let lines = decode_row(pins.row_addr, pins.row_enable);
    let cols = dims.cols();
    for row in (0..dims.rows()).filter(|&r| lines >> r & 1 == 1) {
        for col in 0..cols {
            let (set, reset) = logic.column_gate(pins.mode, pins.col_bit(col));
            exc.drives[row * cols + col] = Drive::from_gates(set, reset);
        }
    }
    Ok(exc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HazardKind {
    /// Reset phase with a low column bit: that column's set transistor opens.
    UnintendedSetDuringReset,
    MultipleRowsSelected,
    DoubleCoilDrive,
}

impl fmt::Display for HazardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HazardKind::UnintendedSetDuringReset => "UnintendedSetDuringReset",
            HazardKind::MultipleRowsSelected => "MultipleRowsSelected",
            HazardKind::DoubleCoilDrive => "DoubleCoilDrive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hazard {
    pub step: usize,
    pub kind: HazardKind,
    pub coords: Vec<(usize, usize)>,
}

impl fmt::Display for Hazard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.kind)?;
        for (r, c) in &self.coords {
            write!(f, " ({r},{c})")?;
        }
        Ok(())
    }
}

/// Hazards accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HazardReport {
    pub hazards: Vec<Hazard>,
}

impl HazardReport {
    pub fn is_empty(&self) -> bool {
        self.hazards.is_empty()
    }

    pub fn len(&self) -> usize {
        self.hazards.len()
    }

    pub fn count(&self, kind: HazardKind) -> usize {
        self.hazards.iter().filter(|h| h.kind == kind).count()
    }

    pub fn extend(&mut self, hazards: impl IntoIterator<Item = Hazard>) {
        self.hazards.extend(hazards);
    }
}

/// Inspects one evaluated step for gating hazards.
pub fn scan_hazards(pins: &PinState, excitation: &CoilExcitation, step: usize) -> Vec<Hazard> {
    let dims = excitation.dims();
    let mut out = Vec::new();

    let lines = decode_row(pins.row_addr, pins.row_enable);
    let selected: Vec<usize> = (0..dims.rows()).filter(|&r| lines >> r & 1 == 1).collect();
    let driven = excitation.driven_rows();
    if lines.count_ones() > 1 || driven.len() > 1 {
        let mut rows = selected.clone();
        rows.extend(driven);
        rows.sort_unstable();
        rows.dedup();
        out.push(Hazard {
            step,
            kind: HazardKind::MultipleRowsSelected,
            coords: rows.into_iter().map(|r| (r, 0)).collect(),
        });
    }

    if pins.mode {
        let coords: Vec<_> = selected
            .iter()
            .flat_map(|&r| {
                (0..dims.cols())
                    .filter(|&c| !pins.col_bit(c))
                    .map(move |c| (r, c))
            })
            .collect();
        if !coords.is_empty() {
            out.push(Hazard {
                step,
                kind: HazardKind::UnintendedSetDuringReset,
                coords,
            });
        }
    }

    let both = excitation.coords(|d| d == Drive::Both);
    if !both.is_empty() {
        out.push(Hazard {
            step,
            kind: HazardKind::DoubleCoilDrive,
            coords: both,
        });
    }
    out
}
