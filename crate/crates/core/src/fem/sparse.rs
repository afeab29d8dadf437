//! Compressed sparse column matrices over the free DOFs and the scatter of
//! element contributions through the Dirichlet and hanging-node constraints.

use alloc::vec::Vec;

use super::dofs::{DofSystem, FIELDS};
use super::reference::NODES;
use crate::error::{Error, Result};

/// Local element DOFs: 9 nodes times 4 fields, ordered `4 * node + field`.
pub const LOCAL: usize = NODES * FIELDS;

/// Square CSC matrix with sorted row indices in every column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Zero matrix whose pattern couples every pair of free nodes that share a
    /// cell after constraint expansion, as full 4x4 field blocks.
    pub fn pattern_for(dofs: &DofSystem) -> SparseMatrix {
        let nf = dofs.num_free_nodes();
        let mut adj: Vec<Vec<u32>> = alloc::vec![Vec::new(); nf];
        let mut cell_free = Vec::with_capacity(2 * NODES);
        for c in 0..dofs.num_cells() {
            cell_free.clear();
            for &node in dofs.cell_nodes(c) {
                cell_free.extend(dofs.expansion(node).iter().map(|&(f, _)| f));
            }
            cell_free.sort_unstable();
            cell_free.dedup();
            for &a in &cell_free {
                adj[a as usize].extend_from_slice(&cell_free);
            }
        }
        let dim = FIELDS * nf;
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            for _ in 0..FIELDS {
                for &r in list.iter() {
                    row_idx.extend((0..FIELDS).map(|f| FIELDS * r as usize + f));
                }
                col_ptr.push(row_idx.len());
            }
        }
        let values = alloc::vec![0.0; row_idx.len()];
        SparseMatrix {
            dim,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> SparseMatrix {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = alloc::vec![0usize; dim + 1];
        let mut row_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last = None;
        for (r, c, v) in sorted {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside a {dim}x{dim} matrix");
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            last = Some((r, c));
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
        }
        for c in 0..dim {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseMatrix {
            dim,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.col_ptr[col];
        let rows = &self.row_idx[lo..self.col_ptr[col + 1]];
        rows.binary_search(&row).ok().map(|p| lo + p)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |p| self.values[p])
    }

    /// Adds to an entry of the pattern.
    ///
    /// # Panics
    /// If `(row, col)` is not in the pattern.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let p = self
            .position(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) outside the sparsity pattern"));
        self.values[p] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = alloc::vec![0.0; self.dim];
        for c in 0..self.dim {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[p]] += self.values[p] * x[c];
            }
        }
        y
    }

    /// `max |A - A^T|` over all stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.dim {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[p];
                worst = worst.max((self.values[p] - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Scatters a row-major `LOCAL x LOCAL` element matrix of cell `cell`.
    pub fn distribute(&mut self, dofs: &DofSystem, cell: usize, local: &[f64]) {
        debug_assert_eq!(local.len(), LOCAL * LOCAL);
        let nodes = dofs.cell_nodes(cell);
        for (b, &nb) in nodes.iter().enumerate() {
            for &(fb, wb) in dofs.expansion(nb) {
                for g in 0..FIELDS {
                    let col = FIELDS * fb as usize + g;
                    let (lo, hi) = (self.col_ptr[col], self.col_ptr[col + 1]);
                    for (a, &na) in nodes.iter().enumerate() {
                        for &(fa, wa) in dofs.expansion(na) {
                            let first = FIELDS * fa as usize;
                            let p = lo + self.row_idx[lo..hi]
                                .binary_search(&first)
                                .unwrap_or_else(|_| panic!("node block ({fa}, {fb}) outside the sparsity pattern"));
                            let w = wa * wb;
                            for f in 0..FIELDS {
                                self.values[p + f] += w * local[(FIELDS * a + f) * LOCAL + FIELDS * b + g];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Scatters an element vector of cell `cell` into a free-DOF vector.
pub fn distribute_vector(dofs: &DofSystem, cell: usize, local: &[f64], global: &mut [f64]) {
    debug_assert_eq!(local.len(), LOCAL);
    for (a, &na) in dofs.cell_nodes(cell).iter().enumerate() {
        for &(fa, wa) in dofs.expansion(na) {
            for f in 0..FIELDS {
                global[FIELDS * fa as usize + f] += wa * local[FIELDS * a + f];
            }
        }
    }
}

/// Condenses per-cell element vectors and row-major element matrices onto the
/// free DOFs.
pub fn constrain_and_distribute(
    dofs: &DofSystem,
    vectors: &[Vec<f64>],
    matrices: &[Vec<f64>],
) -> Result<(Vec<f64>, SparseMatrix)> {
    let cells = dofs.num_cells();
    for (len, expected) in [(vectors.len(), cells), (matrices.len(), cells)] {
        if len != expected {
            return Err(Error::DimensionMismatch { expected, found: len });
        }
    }
    let mut rhs = alloc::vec![0.0; dofs.num_free()];
    let mut mat = SparseMatrix::pattern_for(dofs);
    for c in 0..cells {
        if vectors[c].len() != LOCAL {
            return Err(Error::DimensionMismatch {
                expected: LOCAL,
                found: vectors[c].len(),
            });
        }
        if matrices[c].len() != LOCAL * LOCAL {
            return Err(Error::DimensionMismatch {
                expected: LOCAL * LOCAL,
                found: matrices[c].len(),
            });
        }
        distribute_vector(dofs, c, &vectors[c], &mut rhs);
        mat.distribute(dofs, c, &matrices[c]);
    }
    Ok((rhs, mat))
}
