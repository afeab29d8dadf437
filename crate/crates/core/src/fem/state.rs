//! Discrete fields `(n1, n2, n3, phi)` on a Q2 space.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::dofs::{DofSystem, NodeKind, FIELDS};
use super::reference::{shape, ShapeValues, NODES};
use crate::error::{Error, Result};
use crate::mesh::{CellId, QuadMesh};
use crate::problem::BoundaryData;

/// A mesh, its DOF numbering and the boundary data the constraints came from.
#[derive(Debug)]
pub struct Space {
    pub mesh: QuadMesh,
    pub dofs: DofSystem,
    pub boundary: BoundaryData,
}

impl Space {
    pub fn new(mesh: QuadMesh, boundary: BoundaryData) -> Arc<Space> {
        let dofs = DofSystem::new(&mesh, &boundary);
        Arc::new(Space { mesh, dofs, boundary })
    }
}

/// Values and physical derivatives of all four fields at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldSample {
    pub value: [f64; FIELDS],
    pub grad: [[f64; 2]; FIELDS],
    pub hess: [[[f64; 2]; 2]; FIELDS],
}

impl FieldSample {
    pub fn director(&self) -> [f64; 3] {
        [self.value[0], self.value[1], self.value[2]]
    }

    pub fn potential(&self) -> f64 {
        self.value[3]
    }

    /// `grad phi` lifted to three components.
    pub fn field_gradient(&self) -> [f64; 3] {
        [self.grad[3][0], self.grad[3][1], 0.0]
    }
}

/// Combines local coefficients with shape data on a cell of side `h`.
///
/// Works with differences to the first node's coefficients, so constant
/// fields come out exact.
pub fn sample(coeffs: &[[f64; FIELDS]; NODES], s: &ShapeValues, h: f64) -> FieldSample {
    let (inv, inv2) = (1.0 / h, 1.0 / (h * h));
    let base = coeffs[0];
    let mut out = FieldSample {
        value: base,
        ..FieldSample::default()
    };
    for (a, c) in coeffs.iter().enumerate().skip(1) {
        for f in 0..FIELDS {
            let u = c[f] - base[f];
            if u == 0.0 {
                continue;
            }
            out.value[f] += u * s.value[a];
            for k in 0..2 {
                out.grad[f][k] += u * s.grad[a][k] * inv;
                for l in 0..2 {
                    out.hess[f][k][l] += u * s.hess[a][k][l] * inv2;
                }
            }
        }
    }
    out
}

/// Full nodal coefficient vector (node-major, constrained entries included).
#[derive(Debug, Clone)]
pub struct State {
    space: Arc<Space>,
    values: Vec<f64>,
}

impl State {
    /// Interior nodes take `interior(x, y)`, boundary nodes the boundary data,
    /// hanging nodes their constrained values.
    pub fn lifted(space: Arc<Space>, interior: impl Fn(f64, f64) -> [f64; FIELDS]) -> State {
        let dofs = &space.dofs;
        let mut values = alloc::vec![0.0; dofs.num_dofs()];
        for i in 0..dofs.num_free_nodes() {
            let node = dofs.free_node(i);
            let [x, y] = dofs.node_position(node);
            let k = FIELDS * node as usize;
            values[k..k + FIELDS].copy_from_slice(&interior(x, y));
        }
        let mut state = State { space, values };
        state.apply_constraints();
        state
    }

    /// Takes a full coefficient vector; constrained entries are overwritten.
    pub fn from_values(space: Arc<Space>, values: Vec<f64>) -> Result<State> {
        if values.len() != space.dofs.num_dofs() {
            return Err(Error::DimensionMismatch {
                expected: space.dofs.num_dofs(),
                found: values.len(),
            });
        }
        let mut state = State { space, values };
        state.apply_constraints();
        Ok(state)
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn mesh(&self) -> &QuadMesh {
        &self.space.mesh
    }

    pub fn dofs(&self) -> &DofSystem {
        &self.space.dofs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_values(&self, node: u32) -> [f64; FIELDS] {
        let k = FIELDS * node as usize;
        let mut out = [0.0; FIELDS];
        out.copy_from_slice(&self.values[k..k + FIELDS]);
        out
    }

    /// Values at the free DOFs, ordered `4 * free_node + field`.
    pub fn free_values(&self) -> Vec<f64> {
        let dofs = &self.space.dofs;
        let mut out = Vec::with_capacity(dofs.num_free());
        for i in 0..dofs.num_free_nodes() {
            out.extend_from_slice(&self.node_values(dofs.free_node(i)));
        }
        out
    }

    pub fn set_free_values(&mut self, free: &[f64]) -> Result<()> {
        self.update_free(free, |_, new| new)
    }

    /// `x <- x + alpha * delta` on the free DOFs.
    pub fn add_free(&mut self, alpha: f64, delta: &[f64]) -> Result<()> {
        self.update_free(delta, |old, d| old + alpha * d)
    }

    fn update_free(&mut self, free: &[f64], op: impl Fn(f64, f64) -> f64) -> Result<()> {
        let dofs = &self.space.dofs;
        if free.len() != dofs.num_free() {
            return Err(Error::DimensionMismatch {
                expected: dofs.num_free(),
                found: free.len(),
            });
        }
        for i in 0..dofs.num_free_nodes() {
            let k = FIELDS * dofs.free_node(i) as usize;
            for f in 0..FIELDS {
                self.values[k + f] = op(self.values[k + f], free[FIELDS * i + f]);
            }
        }
        self.apply_constraints();
        Ok(())
    }

    fn apply_constraints(&mut self) {
        let dofs = &self.space.dofs;
        for node in 0..dofs.num_nodes() as u32 {
            if dofs.kind(node) == NodeKind::Dirichlet {
                let k = FIELDS * node as usize;
                self.values[k..k + FIELDS].copy_from_slice(&dofs.boundary_value(node));
            }
        }
        for h in dofs.hanging_constraints() {
            let mut v = [0.0; FIELDS];
            for &(m, w) in &h.masters {
                let mv = self.node_values(m);
                for f in 0..FIELDS {
                    v[f] += w * mv[f];
                }
            }
            let k = FIELDS * h.node as usize;
            self.values[k..k + FIELDS].copy_from_slice(&v);
        }
    }

    pub fn cell_coefficients(&self, cell_index: usize) -> [[f64; FIELDS]; NODES] {
        let nodes = self.space.dofs.cell_nodes(cell_index);
        let mut out = [[0.0; FIELDS]; NODES];
        for (a, &n) in nodes.iter().enumerate() {
            out[a] = self.node_values(n);
        }
        out
    }

    /// Samples at reference points of an active cell.
    pub fn evaluate(&self, cell: &CellId, points: &[[f64; 2]]) -> Result<Vec<FieldSample>> {
        let i = self.space.mesh.index_of(cell).ok_or(Error::CellNotActive(*cell))?;
        let coeffs = self.cell_coefficients(i);
        let h = self.space.mesh.side_length(cell);
        Ok(points.iter().map(|p| sample(&coeffs, &shape(p[0], p[1]), h)).collect())
    }

    /// Sample at a physical point.
    pub fn evaluate_at(&self, x: f64, y: f64) -> Option<FieldSample> {
        let mesh = &self.space.mesh;
        let cell = mesh.locate(x, y)?;
        let h = mesh.side_length(&cell);
        let o = mesh.origin(&cell);
        let p = [(x - o[0]) / h, (y - o[1]) / h];
        self.evaluate(&cell, &[p]).ok().map(|v| v[0])
    }

    /// Interpolates this state onto a refinement of its mesh. Boundary values
    /// come from the fine space's own boundary data.
    pub fn prolong(&self, fine: Arc<Space>) -> Result<State> {
        let coarse = &self.space.mesh;
        if fine.mesh.root() != coarse.root() {
            return Err(Error::MeshesNotNested);
        }
        let mut values = alloc::vec![0.0; fine.dofs.num_dofs()];
        for (i, cell) in fine.mesh.cells().iter().enumerate() {
            let parent = coarse.covering(cell).ok_or(Error::MeshesNotNested)?;
            let coeffs = self.cell_coefficients(coarse.index_of(&parent).expect("covering cell is active"));
            let [px, py] = parent.lattice_origin();
            let size = parent.lattice_size() as f64;
            for &node in fine.dofs.cell_nodes(i) {
                if !matches!(fine.dofs.kind(node), NodeKind::Free(_)) {
                    continue;
                }
                let [kx, ky] = fine.dofs.node_lattice(node);
                let s = shape((kx - px) as f64 / size, (ky - py) as f64 / size);
                let k = FIELDS * node as usize;
                let mut v = [0.0; FIELDS];
                for (a, c) in coeffs.iter().enumerate() {
                    for f in 0..FIELDS {
                        v[f] += c[f] * s.value[a];
                    }
                }
                values[k..k + FIELDS].copy_from_slice(&v);
            }
        }
        State::from_values(fine, values)
    }
}
