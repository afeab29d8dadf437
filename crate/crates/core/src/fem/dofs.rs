//! Q2 degree-of-freedom numbering for the four fields `(n1, n2, n3, phi)`.
//!
//! Every Q2 node carries one value per field, stored node-major: the global
//! DOF of field `f` at node `k` is `4 k + f`. Nodes on the boundary are
//! Dirichlet nodes; nodes sitting at the quarter points of a coarse cell side
//! are hanging nodes whose values follow from the coarse side's quadratic
//! trace. Everything else is free.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::reference::{lagrange, NODES};
use crate::mesh::{EdgeKind, QuadMesh, MAX_LEVEL};
use crate::problem::BoundaryData;

pub const FIELDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Index into the list of free nodes.
    Free(u32),
    Dirichlet,
    /// Index into the list of hanging constraints.
    Hanging(u32),
}

/// A hanging node's value as a weighted sum of three coarse-side nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HangingConstraint {
    pub node: u32,
    pub masters: [(u32, f64); 3],
}

#[derive(Debug, Clone)]
pub struct DofSystem {
    root: u32,
    lattice: Vec<[u64; 2]>,
    cell_nodes: Vec<[u32; NODES]>,
    kinds: Vec<NodeKind>,
    hanging: Vec<HangingConstraint>,
    boundary_values: Vec<[f64; FIELDS]>,
    free_nodes: Vec<u32>,
    // Free-node expansion of every node: which free nodes (with weights) its
    // value depends on.
    expansion_ptr: Vec<u32>,
    expansion: Vec<(u32, f64)>,
}

impl DofSystem {
    pub fn new(mesh: &QuadMesh, boundary: &BoundaryData) -> Self {
        let root = mesh.root();
        let mut index: BTreeMap<[u64; 2], u32> = BTreeMap::new();
        let mut lattice = Vec::new();
        let mut cell_nodes = Vec::with_capacity(mesh.len());
        for cell in mesh.cells() {
            let [ox, oy] = cell.lattice_origin();
            let half = cell.lattice_size() / 2;
            let mut nodes = [0u32; NODES];
            for (a, slot) in nodes.iter_mut().enumerate() {
                let key = [ox + (a % 3) as u64 * half, oy + (a / 3) as u64 * half];
                *slot = *index.entry(key).or_insert_with(|| {
                    lattice.push(key);
                    (lattice.len() - 1) as u32
                });
            }
            cell_nodes.push(nodes);
        }

        let extent = u64::from(root) << (u32::from(MAX_LEVEL) + 1);
        let scale = 1.0 / extent as f64;
        let on_boundary = |k: [u64; 2]| k[0] == 0 || k[1] == 0 || k[0] == extent || k[1] == extent;

        let mut kinds = alloc::vec![NodeKind::Dirichlet; lattice.len()];
        let mut boundary_values = alloc::vec![[0.0; FIELDS]; lattice.len()];
        for (k, key) in lattice.iter().enumerate() {
            if on_boundary(*key) {
                let (x, y) = (key[0] as f64 * scale, key[1] as f64 * scale);
                let n = boundary.director(x, y);
                boundary_values[k] = [n[0], n[1], n[2], boundary.potential(x, y)];
            }
        }

        // Hanging nodes: the midpoint of every fine sub-edge on a coarse-fine
        // interface lies at a quarter point of the coarse side.
        let mut hanging = Vec::new();
        for edge in mesh.interior_edges() {
            let EdgeKind::Hanging { coarse } = edge.kind else {
                continue;
            };
            let fine = if edge.minus == coarse { edge.plus } else { edge.minus };
            let fine_half = fine.lattice_size() / 2;
            let [cx, cy] = coarse.lattice_origin();
            let cs = coarse.lattice_size();
            let [fx, fy] = fine.lattice_origin();
            // Coarse side nodes along the shared side, and the hanging key.
            let (side_nodes, key, t) = if edge.is_vertical() {
                let x = if edge.minus == coarse { cx + cs } else { cx };
                let y = fy + fine_half;
                let keys = [[x, cy], [x, cy + cs / 2], [x, cy + cs]];
                (keys, [x, y], (y - cy) as f64 / cs as f64)
            } else {
                let y = if edge.minus == coarse { cy + cs } else { cy };
                let x = fx + fine_half;
                let keys = [[cx, y], [cx + cs / 2, y], [cx + cs, y]];
                (keys, [x, y], (x - cx) as f64 / cs as f64)
            };
            let node = index[&key];
            if on_boundary(key) {
                continue;
            }
            let w = lagrange(t);
            let masters = [
                (index[&side_nodes[0]], w[0]),
                (index[&side_nodes[1]], w[1]),
                (index[&side_nodes[2]], w[2]),
            ];
            kinds[node as usize] = NodeKind::Hanging(hanging.len() as u32);
            hanging.push(HangingConstraint { node, masters });
        }

        let mut free_nodes = Vec::new();
        for (k, key) in lattice.iter().enumerate() {
            if !on_boundary(*key) && !matches!(kinds[k], NodeKind::Hanging(_)) {
                kinds[k] = NodeKind::Free(free_nodes.len() as u32);
                free_nodes.push(k as u32);
            }
        }

        let mut expansion_ptr = Vec::with_capacity(lattice.len() + 1);
        let mut expansion = Vec::new();
        expansion_ptr.push(0);
        for k in 0..lattice.len() {
            match kinds[k] {
                NodeKind::Free(f) => expansion.push((f, 1.0)),
                NodeKind::Dirichlet => {}
                NodeKind::Hanging(h) => {
                    for (m, w) in hanging[h as usize].masters {
                        match kinds[m as usize] {
                            NodeKind::Free(f) => expansion.push((f, w)),
                            NodeKind::Dirichlet => {}
                            NodeKind::Hanging(_) => unreachable!("hanging master in a 1-irregular mesh"),
                        }
                    }
                }
            }
            expansion_ptr.push(expansion.len() as u32);
        }

        DofSystem {
            root,
            lattice,
            cell_nodes,
            kinds,
            hanging,
            boundary_values,
            free_nodes,
            expansion_ptr,
            expansion,
        }
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn num_nodes(&self) -> usize {
        self.lattice.len()
    }

    /// Total DOFs, constrained ones included.
    pub fn num_dofs(&self) -> usize {
        FIELDS * self.lattice.len()
    }

    pub fn num_free(&self) -> usize {
        FIELDS * self.free_nodes.len()
    }

    pub fn num_free_nodes(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn num_dirichlet_dofs(&self) -> usize {
        FIELDS * self.kinds.iter().filter(|k| matches!(k, NodeKind::Dirichlet)).count()
    }

    pub fn num_hanging_dofs(&self) -> usize {
        FIELDS * self.hanging.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_nodes.len()
    }

    pub fn cell_nodes(&self, cell_index: usize) -> &[u32; NODES] {
        &self.cell_nodes[cell_index]
    }

    pub fn kind(&self, node: u32) -> NodeKind {
        self.kinds[node as usize]
    }

    pub fn hanging_constraints(&self) -> &[HangingConstraint] {
        &self.hanging
    }

    pub fn free_node(&self, free_index: usize) -> u32 {
        self.free_nodes[free_index]
    }

    pub fn boundary_value(&self, node: u32) -> [f64; FIELDS] {
        self.boundary_values[node as usize]
    }

    pub fn node_lattice(&self, node: u32) -> [u64; 2] {
        self.lattice[node as usize]
    }

    pub fn node_position(&self, node: u32) -> [f64; 2] {
        let extent = (u64::from(self.root) << (u32::from(MAX_LEVEL) + 1)) as f64;
        let [x, y] = self.lattice[node as usize];
        [x as f64 / extent, y as f64 / extent]
    }

    /// Free nodes (and weights) that determine this node's value. Empty for
    /// Dirichlet nodes.
    pub fn expansion(&self, node: u32) -> &[(u32, f64)] {
        let k = node as usize;
        &self.expansion[self.expansion_ptr[k] as usize..self.expansion_ptr[k + 1] as usize]
    }
}
