use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Valid cells of the 24-2 pattern (right-eye orientation) on an 8×9 grid.
///
/// Columns are spaced 6° apart from x = -27° to x = +21°, rows from
/// y = +21° to y = -21°. The two 9-cell rows reach the extra nasal column
/// (column 0, x = -27°). Row counts are 4, 6, 8, 9, 9, 8, 6, 4.
pub const MASK_24_2: [[bool; 9]; 8] = {
    const O: bool = false;
    const X: bool = true;
    [
        [O, O, O, X, X, X, X, O, O],
        [O, O, X, X, X, X, X, X, O],
        [O, X, X, X, X, X, X, X, X],
        [X, X, X, X, X, X, X, X, X],
        [X, X, X, X, X, X, X, X, X],
        [O, X, X, X, X, X, X, X, X],
        [O, O, X, X, X, X, X, X, O],
        [O, O, O, X, X, X, X, O, O],
    ]
};

/// A (row, column) position on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

/// Masked rectangular grid with a bijection between valid cells and
/// location indices. Indices run row-major over valid cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
    cells: Vec<Cell>,
    index_of: Vec<Option<usize>>,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, mask: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || mask.len() != rows * cols {
            return Err(Error::Config(format!(
                "mask of length {} does not match a {rows}x{cols} grid",
                mask.len()
            )));
        }
        let mut cells = Vec::new();
        let mut index_of = vec![None; rows * cols];
        for row in 0..rows {
            for col in 0..cols {
                if mask[row * cols + col] {
                    index_of[row * cols + col] = Some(cells.len());
                    cells.push(Cell { row, col });
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Config("grid mask has no valid cells".into()));
        }
        Ok(Self { rows, cols, mask, cells, index_of })
    }

    /// The shipped 24-2 layout, shared process-wide.
    pub fn standard() -> &'static GridSpec {
        static GRID: OnceLock<GridSpec> = OnceLock::new();
        GRID.get_or_init(|| {
            let mask = MASK_24_2.iter().flat_map(|r| r.iter().copied()).collect();
            GridSpec::new(8, 9, mask).expect("24-2 mask is valid")
        })
    }

    /// [`GridSpec::standard`] behind a shared handle.
    pub fn shared() -> Arc<GridSpec> {
        static SHARED: OnceLock<Arc<GridSpec>> = OnceLock::new();
        SHARED.get_or_init(|| Arc::new(GridSpec::standard().clone())).clone()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of cells in the full rectangle (valid or not).
    pub fn area(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of valid locations.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        row < self.rows && col < self.cols && self.mask[row * self.cols + col]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cell(&self, location: usize) -> Result<Cell> {
        self.cells.get(location).copied().ok_or(Error::InvalidLocation(location))
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn location(&self, cell: Cell) -> Option<usize> {
        if cell.row < self.rows && cell.col < self.cols {
            self.index_of[cell.row * self.cols + cell.col]
        } else {
            None
        }
    }

    /// Row-major offset of a location inside the full rectangle.
    pub fn offset(&self, location: usize) -> usize {
        let c = self.cells[location];
        c.row * self.cols + c.col
    }

    /// Valid locations in the 8-neighbourhood of `location`.
    pub fn neighbors(&self, location: usize) -> Vec<usize> {
        let c = self.cells[location];
        let mut out = Vec::with_capacity(8);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (r, k) = (c.row as i64 + dr, c.col as i64 + dc);
                if r < 0 || k < 0 {
                    continue;
                }
                if let Some(l) = self.location(Cell { row: r as usize, col: k as usize }) {
                    out.push(l);
                }
            }
        }
        out
    }

    /// Valid locations sharing an edge with `location`.
    pub fn edge_neighbors(&self, location: usize) -> Vec<usize> {
        let c = self.cells[location];
        let mut out = Vec::with_capacity(4);
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (r, k) = (c.row as i64 + dr, c.col as i64 + dc);
            if r < 0 || k < 0 {
                continue;
            }
            if let Some(l) = self.location(Cell { row: r as usize, col: k as usize }) {
                out.push(l);
            }
        }
        out
    }
}
