//! Display controller: the command state machine and the row-scan sequencer.
//!
//! The controller never drives a partial reset. With the XOR/AND column
//! gates, holding PA4 high while a column bit is low opens that column's set
//! transistor, so a reset row always has every column bit high. Showing a new
//! image over an old one therefore clears the whole display first.

use std::fmt;

use thiserror::Error;

use crate::circuit::{
    apply_pulse, check_addressable, excite_with, scan_hazards, thermal_step, CircuitError,
    Drive, EnergyLedger, GateLogic, Hazard, HazardReport, PinState, PowerParams, ThermalParams,
};
use crate::protocol::Command;
use crate::taxel::{Bitmap, GridDims, GridState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FirmwareError {
    #[error("scan in progress")]
    Busy,
    #[error("frame is {frame} but the display is {display}")]
    DimsMismatch { display: GridDims, frame: GridDims },
    #[error("invalid timing: {0}")]
    InvalidTiming(&'static str),
    #[error("aborted on hazard: {0}")]
    HazardAbort(Hazard),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    RowReset,
    RowSet,
    Settle,
    Idle,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::RowReset => "RowReset",
            Phase::RowSet => "RowSet",
            Phase::Settle => "Settle",
            Phase::Idle => "Idle",
        })
    }
}

/// Pin levels held for `duration_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformStep {
    pub pins: PinState,
    pub duration_s: f64,
    pub phase: Phase,
}

impl WaveformStep {
    /// The row this step addresses, if it drives one.
    pub fn row(&self) -> Option<usize> {
        self.pins.row_enable.then(|| usize::from(self.pins.row_addr()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub pulse_width_s: f64,
    pub settle_s: f64,
}

impl Timing {
    pub fn validate(&self) -> Result<(), FirmwareError> {
        if !(self.pulse_width_s > 0.0 && self.pulse_width_s.is_finite()) {
            return Err(FirmwareError::InvalidTiming("pulse_width_s must be > 0"));
        }
        if !(self.settle_s > 0.0 && self.settle_s.is_finite()) {
            return Err(FirmwareError::InvalidTiming("settle_s must be > 0"));
        }
        Ok(())
    }
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            pulse_width_s: 0.010,
            settle_s: 0.005,
        }
    }
}

fn all_columns(dims: GridDims) -> u16 {
    (((1u32 << dims.cols()) - 1) & 0xffff) as u16
}

struct Planner {
    dims: GridDims,
    timing: Timing,
    steps: Vec<WaveformStep>,
}

impl Planner {
    fn new(dims: GridDims, timing: Timing) -> Result<Self, FirmwareError> {
        check_addressable(dims)?;
        timing.validate()?;
        Ok(Self {
            dims,
            timing,
            steps: Vec::new(),
        })
    }

    fn drive(&mut self, phase: Phase, row: usize, mode: bool, col: u16) {
        let pins = PinState::new(row as u8, true, mode, col).expect("row checked addressable");
        self.steps.push(WaveformStep {
            pins,
            duration_s: self.timing.pulse_width_s,
            phase,
        });
        self.rest(Phase::Settle);
    }

    fn reset_row(&mut self, row: usize) {
        let all = all_columns(self.dims);
        self.drive(Phase::RowReset, row, true, all);
    }

    fn rest(&mut self, phase: Phase) {
        self.steps.push(WaveformStep {
            pins: PinState::idle(),
            duration_s: self.timing.settle_s,
            phase,
        });
    }
}

/// Scan schedule that brings the display to `frame`.
///
/// Rows are visited in ascending order. Each row is reset (all columns, PA4
/// high) and then, if the frame has anything in it, set with PA4 low and the
/// row's bits on port B. With `skip_reset_if_clear` the reset is omitted for
/// rows that `shadow` says are already clear.
pub fn plan_show(
    frame: &Bitmap,
    timing: &Timing,
    skip_reset_if_clear: bool,
    shadow: &Bitmap,
) -> Result<Vec<WaveformStep>, FirmwareError> {
    let dims = frame.dims();
    if shadow.dims() != dims {
        return Err(FirmwareError::DimsMismatch {
            display: shadow.dims(),
            frame: dims,
        });
    }
    let mut p = Planner::new(dims, *timing)?;
    for row in 0..dims.rows() {
        if !(skip_reset_if_clear && shadow.row_is_empty(row)) {
            p.reset_row(row);
        }
        if !frame.row_is_empty(row) {
            p.drive(Phase::RowSet, row, false, frame.row_word(row) as u16);
        }
        p.rest(Phase::Idle);
    }
    Ok(p.steps)
}

/// Row-by-row reset of the whole display.
pub fn plan_clear(dims: GridDims, timing: &Timing) -> Result<Vec<WaveformStep>, FirmwareError> {
    let mut p = Planner::new(dims, *timing)?;
    for row in 0..dims.rows() {
        p.reset_row(row);
    }
    p.rest(Phase::Idle);
    Ok(p.steps)
}

/// What follows a reset scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AfterReset {
    Ready,
    Show(Bitmap),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControllerState {
    Ready,
    ScanningSet { row: usize, pending: Bitmap },
    Displayed(Bitmap),
    ScanningReset { row: usize, next: AfterReset },
}

impl ControllerState {
    /// One-byte code reported in STATUS replies.
    pub fn code(&self) -> u8 {
        match self {
            ControllerState::Ready => 0,
            ControllerState::ScanningSet { .. } => 1,
            ControllerState::Displayed(_) => 2,
            ControllerState::ScanningReset { .. } => 3,
        }
    }

    pub fn is_scanning(&self) -> bool {
        matches!(
            self,
            ControllerState::ScanningSet { .. } | ControllerState::ScanningReset { .. }
        )
    }
}

impl fmt::Display for ControllerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerState::Ready => f.write_str("Ready"),
            ControllerState::ScanningSet { row, .. } => write!(f, "ScanningSet(row {row})"),
            ControllerState::Displayed(_) => f.write_str("Displayed"),
            ControllerState::ScanningReset { row, .. } => write!(f, "ScanningReset(row {row})"),
        }
    }
}

/// The command loop. It plans scans; executing them is the caller's job
/// (see [`run_schedule`]), which reports progress through
/// [`Controller::on_step`] and [`Controller::scan_complete`].
#[derive(Debug, Clone)]
pub struct Controller {
    dims: GridDims,
    timing: Timing,
    skip_reset_if_clear: bool,
    state: ControllerState,
    shadow: Bitmap,
    shadow_trusted: bool,
}

impl Controller {
    /// Power-on: ready for commands at once, display contents untouched.
    pub fn boot(dims: GridDims, timing: Timing, skip_reset_if_clear: bool) -> Result<Self, FirmwareError> {
        check_addressable(dims)?;
        timing.validate()?;
        Ok(Self {
            dims,
            timing,
            skip_reset_if_clear,
            state: ControllerState::Ready,
            shadow: Bitmap::new(dims),
            shadow_trusted: true,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    /// What the controller believes the display shows.
    pub fn shadow(&self) -> &Bitmap {
        &self.shadow
    }

    fn show_schedule(&self, frame: &Bitmap) -> Result<Vec<WaveformStep>, FirmwareError> {
        let skip = self.skip_reset_if_clear && self.shadow_trusted;
        plan_show(frame, &self.timing, skip, &self.shadow)
    }

    /// Accepts one command and returns the scan it starts (empty for
    /// STATUS and PING, which never change state).
    pub fn handle_command(&mut self, cmd: &Command) -> Result<Vec<WaveformStep>, FirmwareError> {
        match cmd {
            Command::Status | Command::Ping => return Ok(Vec::new()),
            _ if self.state.is_scanning() => return Err(FirmwareError::Busy),
            _ => {}
        }
        match cmd {
            Command::Show(frame) => {
                if frame.dims() != self.dims {
                    return Err(FirmwareError::DimsMismatch {
                        display: self.dims,
                        frame: frame.dims(),
                    });
                }
                if let ControllerState::Displayed(_) = self.state {
                    let steps = plan_clear(self.dims, &self.timing)?;
                    self.state = ControllerState::ScanningReset {
                        row: 0,
                        next: AfterReset::Show(frame.clone()),
                    };
                    Ok(steps)
                } else {
                    let steps = self.show_schedule(frame)?;
                    self.state = ControllerState::ScanningSet {
                        row: 0,
                        pending: frame.clone(),
                    };
                    Ok(steps)
                }
            }
            Command::Clear => {
                let steps = plan_clear(self.dims, &self.timing)?;
                self.state = ControllerState::ScanningReset {
                    row: 0,
                    next: AfterReset::Ready,
                };
                Ok(steps)
            }
            Command::Status | Command::Ping => unreachable!(),
        }
    }

    /// Advances the row cursor past a step that drove a row.
    pub fn on_step(&mut self, step: &WaveformStep) {
        let Some(r) = step.row() else { return };
        match &mut self.state {
            ControllerState::ScanningSet { row, .. } | ControllerState::ScanningReset { row, .. } => {
                *row = (r + 1).min(self.dims.rows());
            }
            _ => {}
        }
    }

    /// Marks the running scan finished. Returns the follow-up scan when a
    /// clear was chained into a show.
    pub fn scan_complete(&mut self) -> Result<Option<Vec<WaveformStep>>, FirmwareError> {
        match std::mem::replace(&mut self.state, ControllerState::Ready) {
            ControllerState::ScanningSet { pending, .. } => {
                self.shadow = pending.clone();
                self.shadow_trusted = true;
                self.state = ControllerState::Displayed(pending);
                Ok(None)
            }
            ControllerState::ScanningReset { next, .. } => {
                self.shadow = Bitmap::new(self.dims);
                self.shadow_trusted = true;
                match next {
                    AfterReset::Ready => Ok(None),
                    AfterReset::Show(frame) => {
                        let steps = self.show_schedule(&frame)?;
                        self.state = ControllerState::ScanningSet {
                            row: 0,
                            pending: frame,
                        };
                        Ok(Some(steps))
                    }
                }
            }
            other => {
                self.state = other;
                Ok(None)
            }
        }
    }

    /// Abandons the running scan. The display contents are unknown
    /// afterwards, so the skip-reset shortcut is disabled until a scan
    /// completes.
    pub fn abort(&mut self) {
        self.state = ControllerState::Ready;
        self.shadow_trusted = false;
    }
}

/// The simulated hardware a schedule is played into.
#[derive(Debug, Clone)]
pub struct Board {
    pub grid: GridState,
    pub power: PowerParams,
    pub thermal: ThermalParams,
    pub ambient_c: f64,
    pub logic: GateLogic,
}

/// One line of the execution trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub pins: PinState,
    pub set: Vec<(usize, usize)>,
    pub reset: Vec<(usize, usize)>,
    pub joules: f64,
    pub hazards: Vec<Hazard>,
}

impl TraceRecord {
    pub const HEADER: &'static str =
        "step\trow_addr\trow_enable\tmode\tcol_bits\tset\treset\tjoules\thazards";
}

fn write_coords(f: &mut fmt::Formatter<'_>, coords: &[(usize, usize)]) -> fmt::Result {
    if coords.is_empty() {
        return f.write_str("-");
    }
    for (i, (r, c)) in coords.iter().enumerate() {
        if i > 0 {
            f.write_str(";")?;
        }
        write!(f, "{r},{c}")?;
    }
    Ok(())
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{:04x}\t",
            self.step,
            self.pins.row_addr(),
            self.pins.row_enable as u8,
            self.pins.mode as u8,
            self.pins.col
        )?;
        write_coords(f, &self.set)?;
        f.write_str("\t")?;
        write_coords(f, &self.reset)?;
        write!(f, "\t{}\t", self.joules)?;
        if self.hazards.is_empty() {
            return f.write_str("-");
        }
        for (i, h) in self.hazards.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{}@", h.kind)?;
            write_coords(f, &h.coords)?;
        }
        Ok(())
    }
}

/// Execution options for [`run_schedule`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Stop at the first hazard.
    pub strict: bool,
    pub trace: bool,
    /// Index given to the first step in hazard and trace records.
    pub first_step: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ScheduleRun {
    pub steps: usize,
    pub elapsed_s: f64,
    pub joules: f64,
    pub hazards: HazardReport,
    pub trace: Vec<TraceRecord>,
    pub max_temperature_c: f64,
}

/// Plays a schedule into the board, step by step: evaluate the gates, check
/// for hazards, fire the pulses, then let every coil cool for the step's
/// duration. `observer` sees each step after it has been applied.
///
/// In strict mode the first hazard aborts the run before its pulses fire.
pub fn run_schedule(
    schedule: &[WaveformStep],
    board: &mut Board,
    ledger: &mut EnergyLedger,
    opts: RunOptions,
    mut observer: impl FnMut(&WaveformStep),
) -> Result<ScheduleRun, FirmwareError> {
    let dims = board.grid.dims();
    let mut out = ScheduleRun {
        max_temperature_c: board.grid.max_temperature_c(),
        ..ScheduleRun::default()
    };
    for (i, step) in schedule.iter().enumerate() {
        let index = opts.first_step + i;
        let exc = excite_with(board.logic, &step.pins, dims)?;
        let hazards = scan_hazards(&step.pins, &exc, index);
        if opts.strict {
            if let Some(h) = hazards.first() {
                return Err(FirmwareError::HazardAbort(h.clone()));
            }
        }
        let before = ledger.total_joules;
        let heat = apply_pulse(&mut board.grid, &exc, &board.power, ledger)?;
        for (cell, q) in board.grid.cells_mut().iter_mut().zip(&heat) {
            *cell = thermal_step(cell, *q, step.duration_s, board.ambient_c, &board.thermal)?;
        }
        let joules = ledger.total_joules - before;
        if opts.trace {
            out.trace.push(TraceRecord {
                step: index,
                pins: step.pins,
                set: exc.coords(Drive::drives_set),
                reset: exc.coords(Drive::drives_reset),
                joules,
                hazards: hazards.clone(),
            });
        }
        out.hazards.extend(hazards);
        out.steps += 1;
        out.elapsed_s += step.duration_s;
        out.joules += joules;
        out.max_temperature_c = out.max_temperature_c.max(board.grid.max_temperature_c());
        observer(step);
    }
    Ok(out)
}
