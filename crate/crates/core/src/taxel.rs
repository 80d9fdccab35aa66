//! Display geometry, frames and the physical state of the solenoid board.
//!
//! Orientation is fixed crate-wide: row 0 is the top physical row, column 0
//! the leftmost, and a `true` bit means the plunger is up (taxel raised).

use std::fmt;

use thiserror::Error;

/// Rows and columns in the reference 16×16 display.
pub const REFERENCE_ROWS: usize = 16;
pub const REFERENCE_COLS: usize = 16;

/// Ambient temperature at which solenoid catalogue ratings are given.
pub const RATED_AMBIENT_C: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("grid dimensions must be positive, got {rows}x{cols}")]
    ZeroDims { rows: usize, cols: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimsMismatch { left: GridDims, right: GridDims },
    #[error("expected {expected} bits/bytes for {dims}, got {actual}")]
    LengthMismatch {
        dims: GridDims,
        expected: usize,
        actual: usize,
    },
    #[error("solenoid parameter `{0}` must be strictly positive")]
    NonPositiveSpec(&'static str),
}

/// Taxel grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDims {
    rows: usize,
    cols: usize,
}

impl GridDims {
    pub fn new(rows: usize, cols: usize) -> Result<Self, ModelError> {
        if rows == 0 || cols == 0 {
            return Err(ModelError::ZeroDims { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    /// The 16×16, 256-taxel reference display.
    pub const fn reference() -> Self {
        Self {
            rows: REFERENCE_ROWS,
            cols: REFERENCE_COLS,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Bytes per row in the canonical serialization.
    pub fn row_bytes(&self) -> usize {
        self.cols.div_ceil(8)
    }

    /// Length of a frame in the canonical serialization.
    pub fn frame_bytes(&self) -> usize {
        self.row_bytes() * self.rows
    }

    pub(crate) fn index(&self, row: usize, col: usize) -> usize {
        assert!(
            row < self.rows && col < self.cols,
            "taxel ({row},{col}) outside {self}"
        );
        row * self.cols + col
    }
}

impl Default for GridDims {
    fn default() -> Self {
        Self::reference()
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// A frame: one boolean per taxel, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    dims: GridDims,
    bits: Vec<bool>,
}

impl Bitmap {
    /// All-clear frame.
    pub fn new(dims: GridDims) -> Self {
        Self {
            dims,
            bits: vec![false; dims.cell_count()],
        }
    }

    pub fn filled(dims: GridDims) -> Self {
        Self {
            dims,
            bits: vec![true; dims.cell_count()],
        }
    }

    /// Builds a frame from a row-major bit sequence.
    pub fn from_bits(dims: GridDims, bits: Vec<bool>) -> Result<Self, ModelError> {
        if bits.len() != dims.cell_count() {
            return Err(ModelError::LengthMismatch {
                dims,
                expected: dims.cell_count(),
                actual: bits.len(),
            });
        }
        Ok(Self { dims, bits })
    }

    /// Frame whose bit `i` (row-major) is bit `i` of `word`. Handy for
    /// enumerating every frame of a small grid.
    pub fn from_index(dims: GridDims, word: u64) -> Self {
        assert!(dims.cell_count() <= 64, "{dims} does not fit in a u64 index");
        let bits = (0..dims.cell_count()).map(|i| word >> i & 1 == 1).collect();
        Self { dims, bits }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[self.dims.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, raised: bool) {
        let i = self.dims.index(row, col);
        self.bits[i] = raised;
    }

    /// Row-major bits.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn row(&self, row: usize) -> &[bool] {
        let start = self.dims.index(row, 0);
        &self.bits[start..start + self.dims.cols]
    }

    /// Row `row` packed into a column word, bit `c` = column `c`.
    pub fn row_word(&self, row: usize) -> u64 {
        self.row(row)
            .iter()
            .enumerate()
            .fold(0, |w, (c, &b)| if b { w | 1 << c } else { w })
    }

    pub fn row_is_empty(&self, row: usize) -> bool {
        !self.row(row).iter().any(|&b| b)
    }

    pub fn count_raised(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_clear(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Self {
        Self {
            dims: self.dims,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Raised taxels in row-major order.
    pub fn raised(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.dims.cols;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / cols, i % cols))
    }

    /// Canonical byte serialization: `ceil(cols/8)` bytes per row, the most
    /// significant bit of each byte holding the lowest column index, rows
    /// concatenated top to bottom. Padding bits are zero.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.dims.frame_bytes()];
        let row_bytes = self.dims.row_bytes();
        for (r, c) in self.raised() {
            out[r * row_bytes + c / 8] |= 0x80 >> (c % 8);
        }
        out
    }

    /// Inverse of [`Bitmap::to_bytes`]. Padding bits are ignored.
    pub fn from_bytes(dims: GridDims, bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() != dims.frame_bytes() {
            return Err(ModelError::LengthMismatch {
                dims,
                expected: dims.frame_bytes(),
                actual: bytes.len(),
            });
        }
        let row_bytes = dims.row_bytes();
        let bits = (0..dims.cell_count())
            .map(|i| {
                let (r, c) = (i / dims.cols, i % dims.cols);
                bytes[r * row_bytes + c / 8] & (0x80 >> (c % 8)) != 0
            })
            .collect();
        Ok(Self { dims, bits })
    }
}

impl fmt::Display for Bitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.dims.rows {
            let line: String = self
                .row(r)
                .iter()
                .map(|&b| if b { '#' } else { '.' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Coordinates where `a` and `b` differ, row-major.
pub fn bitmap_diff(a: &Bitmap, b: &Bitmap) -> Result<Vec<(usize, usize)>, ModelError> {
    if a.dims != b.dims {
        return Err(ModelError::DimsMismatch {
            left: a.dims,
            right: b.dims,
        });
    }
    let cols = a.dims.cols;
    Ok(a.bits
        .iter()
        .zip(&b.bits)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, _)| (i / cols, i % cols))
        .collect())
}

/// Catalogue data for one bi-stable solenoid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidSpec {
    pub width_mm: f64,
    pub depth_mm: f64,
    pub height_mm: f64,
    pub mass_g: f64,
    /// Largest press the magnetic latch resists, in gram-force.
    pub holding_force_g: f64,
    pub coil_resistance_ohm: f64,
    pub nominal_dc_voltage_v: f64,
    /// Whether a press exactly equal to `holding_force_g` releases the latch.
    pub release_at_threshold: bool,
}

impl SolenoidSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("width_mm", self.width_mm),
            ("depth_mm", self.depth_mm),
            ("height_mm", self.height_mm),
            ("mass_g", self.mass_g),
            ("holding_force_g", self.holding_force_g),
            ("coil_resistance_ohm", self.coil_resistance_ohm),
            ("nominal_dc_voltage_v", self.nominal_dc_voltage_v),
        ];
        match fields.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            Some((name, _)) => Err(ModelError::NonPositiveSpec(name)),
            None => Ok(()),
        }
    }
}

impl Default for SolenoidSpec {
    /// SC0323L-class part: 7×8.4×23 mm, 6 g, ~500 g holding force, 12 V.
    /// The 24 Ω coil resistance is an assumed value (0.5 A at 12 V).
    fn default() -> Self {
        Self {
            width_mm: 7.0,
            depth_mm: 8.4,
            height_mm: 23.0,
            mass_g: 6.0,
            holding_force_g: 500.0,
            coil_resistance_ohm: 24.0,
            nominal_dc_voltage_v: 12.0,
            release_at_threshold: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Plunger {
    #[default]
    Down,
    Up,
}

/// One taxel. The plunger is always latched in one of its two positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidState {
    pub plunger: Plunger,
    pub temperature_c: f64,
    pub set_pulse_count: u64,
    pub reset_pulse_count: u64,
}

impl SolenoidState {
    pub fn at_rest(ambient_c: f64) -> Self {
        Self {
            plunger: Plunger::Down,
            temperature_c: ambient_c,
            set_pulse_count: 0,
            reset_pulse_count: 0,
        }
    }

    pub fn is_up(&self) -> bool {
        self.plunger == Plunger::Up
    }
}

/// The solenoid board: one [`SolenoidState`] per taxel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    dims: GridDims,
    cells: Vec<SolenoidState>,
}

impl GridState {
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn cell(&self, row: usize, col: usize) -> &SolenoidState {
        &self.cells[self.dims.index(row, col)]
    }

    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut SolenoidState {
        let i = self.dims.index(row, col);
        &mut self.cells[i]
    }

    pub fn cells(&self) -> &[SolenoidState] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [SolenoidState] {
        &mut self.cells
    }

    pub fn max_temperature_c(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.temperature_c)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A board with every plunger down at `ambient_c`.
pub fn new_grid(dims: GridDims, ambient_c: f64) -> GridState {
    GridState {
        dims,
        cells: vec![SolenoidState::at_rest(ambient_c); dims.cell_count()],
    }
}

/// Reads the plunger positions back as a frame.
pub fn snapshot(grid: &GridState) -> Bitmap {
    Bitmap {
        dims: grid.dims,
        bits: grid.cells.iter().map(SolenoidState::is_up).collect(),
    }
}
