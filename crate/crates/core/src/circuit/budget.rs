//! Active-element counts for the row-scan drive versus per-taxel bridges.

use std::fmt;

use super::logic::ROW_ADDR_BITS;
use crate::taxel::GridDims;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceBudget {
    pub column_transistors: usize,
    pub row_transistors: usize,
    pub controller_pins: usize,
    pub naive_half_bridge: usize,
    pub naive_full_bridge: usize,
}

impl ResourceBudget {
    /// How many times more switching devices per-taxel half bridges need
    /// than the shared column transistors.
    pub fn half_bridge_ratio(&self) -> f64 {
        self.naive_half_bridge as f64 / self.column_transistors as f64
    }
}

impl fmt::Display for ResourceBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} column + {} row transistors, {} pins; naive half-bridge {} ({:.1}\u{d7} more column devices), full-bridge {}",
            self.column_transistors,
            self.row_transistors,
            self.controller_pins,
            self.naive_half_bridge,
            self.half_bridge_ratio(),
            self.naive_full_bridge,
        )
    }
}

/// Two transistors per column (set, reset), one per row, and four address
/// pins plus the mode pin plus one port bit per column.
pub fn resource_budget(dims: GridDims) -> ResourceBudget {
    let (rows, cols) = (dims.rows(), dims.cols());
    ResourceBudget {
        column_transistors: 2 * cols,
        row_transistors: rows,
        controller_pins: ROW_ADDR_BITS as usize + 1 + cols,
        naive_half_bridge: 2 * rows * cols,
        naive_full_bridge: 4 * rows * cols,
    }
}
