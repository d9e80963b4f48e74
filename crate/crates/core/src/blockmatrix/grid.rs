use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BoxTag, PhasedBox, PhasedEntry};
use crate::error::{Error, Result};
use crate::linalg::{unitarity_residual, CMatrix};

/// Largest block dimension accepted from a dump.
pub const MAX_DUMP_BLOCKS: usize = 256;
/// Largest exponent magnitude accepted from a dump.
const MAX_DUMP_EXPONENT: i32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLayout {
    Concentric,
    Moire,
    Custom,
}

/// An `R x C` grid of boxes.
///
/// Boxes are stored with the exponents they were built with. Column swaps move
/// boxes and record where each column came from; a box sitting `d` columns
/// away from its original column has its exponents multiplied by `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    rows: usize,
    cols: usize,
    layout: GridLayout,
    cyclic: bool,
    cells: BTreeMap<(usize, usize), PhasedBox>,
    column_origin: Vec<usize>,
}

impl BoxGrid {
    pub fn new(rows: usize, cols: usize, layout: GridLayout, cyclic: bool) -> Self {
        BoxGrid {
            rows,
            cols,
            layout,
            cyclic,
            cells: BTreeMap::new(),
            column_origin: (0..cols).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn column_origin(&self) -> &[usize] {
        &self.column_origin
    }

    /// Adds `b` at `(row, col)`, merging with a box already there.
    pub fn insert(&mut self, row: usize, col: usize, b: PhasedBox) -> Result<()> {
        if row >= self.rows {
            return Err(Error::IndexOutOfRange {
                index: row,
                len: self.rows,
            });
        }
        if col >= self.cols {
            return Err(Error::IndexOutOfRange {
                index: col,
                len: self.cols,
            });
        }
        let merged = match self.cells.get(&(row, col)) {
            Some(existing) => existing.merge(&b)?,
            None => b,
        };
        self.cells.insert((row, col), merged);
        Ok(())
    }

    /// Removes the box at `(row, col)`.
    pub fn remove(&mut self, row: usize, col: usize) -> Option<PhasedBox> {
        self.cells.remove(&(row, col))
    }

    fn column_scale(&self, col: usize) -> i32 {
        let d = col.abs_diff(self.column_origin[col]);
        d.max(1) as i32
    }

    /// Box at `(row, col)` with its exponents as currently in effect.
    pub fn get(&self, row: usize, col: usize) -> Option<PhasedBox> {
        self.cells
            .get(&(row, col))
            .map(|b| b.with_exponent_scale(self.column_scale(col)))
    }

    /// All occupied cells with effective exponents, row-major.
    pub fn cells(&self) -> Vec<((usize, usize), PhasedBox)> {
        self.cells
            .iter()
            .map(|(&(r, c), b)| ((r, c), b.with_exponent_scale(self.column_scale(c))))
            .collect()
    }

    pub fn block_row(&self, row: usize) -> Vec<(usize, PhasedBox)> {
        self.cells()
            .into_iter()
            .filter(|((r, _), _)| *r == row)
            .map(|((_, c), b)| (c, b))
            .collect()
    }

    pub fn block_col(&self, col: usize) -> Vec<(usize, PhasedBox)> {
        self.cells()
            .into_iter()
            .filter(|((_, c), _)| *c == col)
            .map(|((r, _), b)| (r, b))
            .collect()
    }

    /// Dense `4R x 4C` matrix at momenta `(k_a, k_b)`.
    pub fn evaluate(&self, k_a: f64, k_b: f64) -> CMatrix {
        let mut m = CMatrix::zeros(4 * self.rows, 4 * self.cols);
        for ((r, c), b) in self.cells() {
            for (i, row) in b.entries.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    if !e.is_zero() {
                        m[(4 * r + i, 4 * c + j)] = e.value(k_a, k_b);
                    }
                }
            }
        }
        m
    }

    /// Block conjugate transpose, with the current exponents baked in.
    pub fn adjoint(&self) -> BoxGrid {
        let mut out = BoxGrid::new(self.cols, self.rows, self.layout, self.cyclic);
        for ((r, c), b) in self.cells() {
            out.cells.insert((c, r), b.adjoint());
        }
        out
    }

    /// Interchanges block columns `i` and `j`.
    ///
    /// Moved boxes keep their rows; their exponents are rescaled so that a
    /// box `d` columns away from where it was built carries `exp(i d p K)` in
    /// place of `exp(i p K)`. Swapping the same pair twice restores the grid
    /// exactly. The grid must evaluate to a unitary matrix.
    pub fn swap_block_columns(&self, i: usize, j: usize) -> Result<BoxGrid> {
        for idx in [i, j] {
            if idx >= self.cols {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    len: self.cols,
                });
            }
        }
        let residual = self.sampled_unitarity_residual();
        if residual.is_nan() || residual > 1e-10 {
            return Err(Error::Contract {
                what: "unitarity of grid before column swap",
                residual,
                tolerance: 1e-10,
            });
        }
        if i == j {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        out.cells = self
            .cells
            .iter()
            .map(|(&(r, c), b)| {
                let c = if c == i {
                    j
                } else if c == j {
                    i
                } else {
                    c
                };
                ((r, c), b.clone())
            })
            .collect();
        out.column_origin.swap(i, j);
        Ok(out)
    }

    /// Unitarity residual at a few fixed momenta; infinite for non-square grids.
    pub fn sampled_unitarity_residual(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        [(0.0, 0.0), (0.731, -1.917), (-2.403, 0.389)]
            .iter()
            .map(|&(ka, kb)| unitarity_residual(&self.evaluate(ka, kb)))
            .fold(0.0, f64::max)
    }

    /// Structured-text dump: tags, angles and every entry as
    /// `[re, im, p_a, p_b]` with exponents as built; `column_origin` records
    /// the swaps applied since.
    pub fn to_dump(&self) -> String {
        let dump = GridDump {
            layout: self.layout,
            rows: self.rows,
            cols: self.cols,
            cyclic: self.cyclic,
            column_origin: self.column_origin.clone(),
            cells: self
                .cells
                .iter()
                .map(|(&(row, col), b)| CellDump {
                    row,
                    col,
                    tag: b.tag.clone(),
                    theta_n: b.theta_n,
                    theta1: b.theta1,
                    entries: b.entries.map(|r| r.map(|e| (e.coeff.re, e.coeff.im, e.p_a, e.p_b))),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&dump).expect("grid dump serializes");
        s.push('\n');
        s
    }

    /// Parses and validates a dump produced by [`BoxGrid::to_dump`].
    pub fn from_dump(text: &str) -> Result<BoxGrid> {
        let dump: GridDump = serde_json::from_str(text).map_err(|e| Error::Dump(e.to_string()))?;
        if dump.rows == 0 || dump.cols == 0 {
            return Err(Error::Dump("grid has no blocks".into()));
        }
        if dump.rows > MAX_DUMP_BLOCKS || dump.cols > MAX_DUMP_BLOCKS {
            return Err(Error::Dump(format!(
                "grid {}x{} exceeds {MAX_DUMP_BLOCKS} blocks per side",
                dump.rows, dump.cols
            )));
        }
        let mut seen = vec![false; dump.cols];
        if dump.column_origin.len() != dump.cols {
            return Err(Error::Dump("column_origin length differs from cols".into()));
        }
        for &o in &dump.column_origin {
            if o >= dump.cols || seen[o] {
                return Err(Error::Dump("column_origin is not a permutation".into()));
            }
            seen[o] = true;
        }
        let mut grid = BoxGrid::new(dump.rows, dump.cols, dump.layout, dump.cyclic);
        grid.column_origin = dump.column_origin;
        for cell in dump.cells {
            if cell.row >= dump.rows || cell.col >= dump.cols {
                return Err(Error::Dump(format!(
                    "cell ({}, {}) outside the grid",
                    cell.row, cell.col
                )));
            }
            let mut entries = [[PhasedEntry::ZERO; 4]; 4];
            for (i, r) in cell.entries.iter().enumerate() {
                for (j, &(re, im, p_a, p_b)) in r.iter().enumerate() {
                    if !(re.is_finite() && im.is_finite()) {
                        return Err(Error::Dump("non-finite coefficient".into()));
                    }
                    if p_a.abs() > MAX_DUMP_EXPONENT || p_b.abs() > MAX_DUMP_EXPONENT {
                        return Err(Error::Dump("exponent out of range".into()));
                    }
                    entries[i][j] = PhasedEntry {
                        coeff: Complex64::new(re, im),
                        p_a,
                        p_b,
                    };
                }
            }
            if !(cell.theta_n.is_finite() && cell.theta1.is_finite()) {
                return Err(Error::Dump("non-finite angle".into()));
            }
            let b = PhasedBox {
                tag: cell.tag,
                theta_n: cell.theta_n,
                theta1: cell.theta1,
                entries,
            };
            if grid.cells.insert((cell.row, cell.col), b).is_some() {
                return Err(Error::Dump(format!("duplicate cell ({}, {})", cell.row, cell.col)));
            }
        }
        Ok(grid)
    }
}

type EntryDump = (f64, f64, i32, i32);

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDump {
    row: usize,
    col: usize,
    tag: BoxTag,
    theta_n: f64,
    theta1: f64,
    entries: [[EntryDump; 4]; 4],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDump {
    layout: GridLayout,
    rows: usize,
    cols: usize,
    cyclic: bool,
    column_origin: Vec<usize>,
    cells: Vec<CellDump>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmatrix::{assemble_concentric, make_box};
    use crate::linalg::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> BoxGrid {
        let mut g = BoxGrid::new(rows, cols, GridLayout::Custom, false);
        for r in 0..rows {
            for c in 0..cols {
                if rng.gen_bool(0.5) {
                    let mut entries = [[PhasedEntry::ZERO; 4]; 4];
                    for e in entries.iter_mut().flatten() {
                        *e = PhasedEntry {
                            coeff: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                            p_a: rng.gen_range(-3..=3),
                            p_b: rng.gen_range(-3..=3),
                        };
                    }
                    g.insert(r, c, PhasedBox::custom("random", entries)).unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn empty_grid_evaluates_to_zero() {
        let g = BoxGrid::new(3, 2, GridLayout::Custom, false);
        let m = g.evaluate(0.4, 1.0);
        assert_eq!(m.shape(), (12, 8));
        assert!(m.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn single_m13_at_zero_momentum_is_coin_rows() {
        let mut g = BoxGrid::new(1, 1, GridLayout::Custom, false);
        let b = make_box(BoxTag::M13, 0.5, 0.25).unwrap();
        g.insert(0, 0, b.clone()).unwrap();
        let m = g.evaluate(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[(i, j)], b.entries[i][j].coeff);
            }
        }
    }

    #[test]
    fn evaluation_commutes_with_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let rows = rng.gen_range(1..5);
            let cols = rng.gen_range(1..5);
            let g = random_grid(&mut rng, rows, cols);
            let (ka, kb) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let lhs = g.adjoint().evaluate(ka, kb);
            let rhs = g.evaluate(ka, kb).adjoint();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-15);
        }
    }

    #[test]
    fn insert_out_of_range() {
        let mut g = BoxGrid::new(2, 2, GridLayout::Custom, false);
        assert!(g.insert(2, 0, PhasedBox::zero()).is_err());
        assert!(g.insert(0, 5, PhasedBox::zero()).is_err());
    }

    #[test]
    fn swap_rescales_by_column_distance() {
        let profile = [0.3; 5];
        let g = assemble_concentric(5, &profile, 0.7).unwrap();
        // Column 0 holds M13 at row 1 and M24 at row 4; swapping with column 2
        // (one column in between) doubles every exponent of the moved boxes.
        let s = g.swap_block_columns(0, 2).unwrap();
        let moved = s.get(1, 2).unwrap();
        assert_eq!(moved.tag, BoxTag::M13);
        assert!(moved.entries[0].iter().all(|e| (e.p_a, e.p_b) == (-2, 0)));
        assert!(moved.entries[2].iter().all(|e| (e.p_a, e.p_b) == (0, -2)));
        let moved = s.get(4, 2).unwrap();
        assert!(moved.entries[1].iter().all(|e| (e.p_a, e.p_b) == (2, 0)));
        // Untouched column keeps unit exponents.
        let still = s.get(2, 1).unwrap();
        assert!(still.entries[0].iter().all(|e| (e.p_a, e.p_b) == (-1, 0)));
        // Involution.
        assert_eq!(s.swap_block_columns(0, 2).unwrap(), g);
        assert_eq!(g.swap_block_columns(3, 3).unwrap(), g);
        assert!(g.swap_block_columns(0, 5).is_err());
    }

    #[test]
    fn swap_requires_unitary_grid() {
        let mut g = assemble_concentric(4, &[0.1; 4], 0.2).unwrap();
        g.remove(1, 0);
        assert!(matches!(g.swap_block_columns(0, 2), Err(Error::Contract { .. })));
    }

    #[test]
    fn dump_round_trip() {
        let g = assemble_concentric(3, &[0.2, 0.0, 1.1], 0.4).unwrap();
        let s = g.swap_block_columns(0, 2).unwrap();
        for grid in [g, s] {
            let text = grid.to_dump();
            let back = BoxGrid::from_dump(&text).unwrap();
            assert_eq!(back, grid);
        }
    }

    #[test]
    fn dump_rejects_malformed_input() {
        let g = assemble_concentric(2, &[0.2, 0.0], 0.4).unwrap();
        let text = g.to_dump();
        assert!(BoxGrid::from_dump("{}").is_err());
        assert!(BoxGrid::from_dump(&text.replace("\"rows\": 2", "\"rows\": 0")).is_err());
        assert!(BoxGrid::from_dump(&text.replace("\"cols\": 2", "\"cols\": 9999")).is_err());
        assert!(BoxGrid::from_dump(&text.replace("\"row\": 1", "\"row\": 7")).is_err());
        let bad_origin = text.replacen("0,\n    1", "1,\n    1", 1);
        assert_ne!(bad_origin, text);
        assert!(BoxGrid::from_dump(&bad_origin).is_err());
    }
}
