//! Frank-Oseen free energy with dielectric and flexoelectric coupling, its
//! first variation and second variation on a Q2 space.
//!
//! Everything is built from a pointwise energy density `W(u)` over eleven local
//! variables `u = (n, grad n, grad phi)`. The domain is planar, so `d/dz = 0`
//! while the director keeps three components.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::reference::{shape, ShapeValues, NODES};
use crate::fem::sparse::{distribute_vector, SparseMatrix, LOCAL};
use crate::fem::state::{sample, FieldSample, State};
use crate::fem::FIELDS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub eps0: f64,
    pub eps_perp: f64,
    /// Dielectric anisotropy `eps_parallel - eps_perp`.
    pub eps_a: f64,
    pub e_s: f64,
    pub e_b: f64,
    /// Unit-length penalty weight.
    pub zeta: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            k1: 1.0,
            k2: 0.62903,
            k3: 1.32258,
            eps0: 1.42809,
            eps_perp: 7.0,
            eps_a: 11.5,
            e_s: 1.5,
            e_b: -1.5,
            zeta: 1e5,
        }
    }
}

impl MaterialParams {
    pub fn kappa(&self) -> f64 {
        self.k2 / self.k3
    }

    pub fn eps_parallel(&self) -> f64 {
        self.eps_a + self.eps_perp
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("eps0", self.eps0),
            ("eps_perp", self.eps_perp),
            ("zeta", self.zeta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(alloc::format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("eps_a", self.eps_a), ("e_s", self.e_s), ("e_b", self.e_b)] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(alloc::format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Director derivatives at a point, with `d/dz = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectorCalculus {
    pub n: [f64; 3],
    pub div: f64,
    pub curl: [f64; 3],
    pub grad_phi: [f64; 3],
    pub z: [[f64; 3]; 3],
}

impl DirectorCalculus {
    pub fn new(s: &FieldSample, params: &MaterialParams) -> Self {
        let g = &s.grad;
        let n = s.director();
        DirectorCalculus {
            n,
            div: g[0][0] + g[1][1],
            curl: [g[2][1], -g[2][0], g[1][0] - g[0][1]],
            grad_phi: s.field_gradient(),
            z: z_matrix(n, params.kappa()),
        }
    }
}

/// `I - (1 - kappa) n n^T`.
pub fn z_matrix(n: [f64; 3], kappa: f64) -> [[f64; 3]; 3] {
    let mut z = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            z[i][j] = if i == j { 1.0 } else { 0.0 } - (1.0 - kappa) * n[i] * n[j];
        }
    }
    z
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Number of local variables: `n` (3), `d n_i / d x_k` (6), `grad phi` (2).
pub const VARS: usize = 11;
/// Index of `d n_i / d x_k`.
pub const fn grad_var(i: usize, k: usize) -> usize {
    3 + 2 * i + k
}
/// Index of `d phi / d x_k`.
pub const fn field_var(k: usize) -> usize {
    9 + k
}

pub type Hessian = [[f64; VARS]; VARS];

pub fn local_vars(s: &FieldSample) -> [f64; VARS] {
    let mut u = [0.0; VARS];
    for i in 0..3 {
        u[i] = s.value[i];
        for k in 0..2 {
            u[grad_var(i, k)] = s.grad[i][k];
        }
    }
    u[field_var(0)] = s.grad[3][0];
    u[field_var(1)] = s.grad[3][1];
    u
}

const fn unit(v: usize) -> [f64; VARS] {
    let mut e = [0.0; VARS];
    e[v] = 1.0;
    e
}

const DIV_FORM: [f64; VARS] = {
    let mut e = [0.0; VARS];
    e[grad_var(0, 0)] = 1.0;
    e[grad_var(1, 1)] = 1.0;
    e
};

const CURL_FORMS: [[f64; VARS]; 3] = {
    let mut c = [[0.0; VARS]; 3];
    c[0][grad_var(2, 1)] = 1.0;
    c[1][grad_var(2, 0)] = -1.0;
    c[2][grad_var(1, 0)] = 1.0;
    c[2][grad_var(0, 1)] = -1.0;
    c
};

const FIELD_FORMS: [[f64; VARS]; 3] = [unit(field_var(0)), unit(field_var(1)), [0.0; VARS]];

const LEVI_CIVITA: [(usize, usize, usize, f64); 6] = [
    (0, 1, 2, 1.0),
    (1, 2, 0, 1.0),
    (2, 0, 1, 1.0),
    (0, 2, 1, -1.0),
    (2, 1, 0, -1.0),
    (1, 0, 2, -1.0),
];

fn form(f: &[f64; VARS], u: &[f64; VARS]) -> f64 {
    f.iter().zip(u).map(|(a, b)| a * b).sum()
}

fn axpy(y: &mut [f64; VARS], a: f64, x: &[f64; VARS]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn add_outer(h: &mut Hessian, s: f64, a: &[f64; VARS], b: &[f64; VARS]) {
    for i in 0..VARS {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..VARS {
            h[i][j] += s * a[i] * b[j];
        }
    }
}

fn add_sym_outer(h: &mut Hessian, s: f64, a: &[f64; VARS], b: &[f64; VARS]) {
    add_outer(h, s, a, b);
    add_outer(h, s, b, a);
}

// Intermediate quantities shared by the density and its derivatives.
struct Parts {
    n: [f64; 3],
    e: [f64; 3],
    div: f64,
    curl: [f64; 3],
    twist: f64,
    align: f64,
    stretch: f64,
    bend: f64,
}

impl Parts {
    fn new(u: &[f64; VARS]) -> Self {
        let n = [u[0], u[1], u[2]];
        let e = [u[field_var(0)], u[field_var(1)], 0.0];
        let curl = [form(&CURL_FORMS[0], u), form(&CURL_FORMS[1], u), form(&CURL_FORMS[2], u)];
        Parts {
            n,
            e,
            div: form(&DIV_FORM, u),
            curl,
            twist: dot(n, curl),
            align: dot(n, e),
            stretch: dot(n, n) - 1.0,
            bend: dot(e, cross(n, curl)),
        }
    }
}

/// Energy density split into the coupled Frank-Oseen part and the penalty.
pub fn density(u: &[f64; VARS], p: &MaterialParams) -> (f64, f64) {
    let q = Parts::new(u);
    let w = 0.5 * p.k1 * q.div * q.div + 0.5 * p.k3 * dot(q.curl, q.curl) - 0.5 * (p.k3 - p.k2) * q.twist * q.twist
        - 0.5 * p.eps0 * p.eps_perp * dot(q.e, q.e)
        - 0.5 * p.eps0 * p.eps_a * q.align * q.align
        + p.e_s * q.div * q.align
        + p.e_b * q.bend;
    (w, 0.5 * p.zeta * q.stretch * q.stretch)
}

/// Gradient of the full density (penalty included) and, optionally, its
/// Hessian.
pub fn density_derivatives(u: &[f64; VARS], p: &MaterialParams, hess: Option<&mut Hessian>) -> [f64; VARS] {
    let q = Parts::new(u);
    let n_forms = [unit(0), unit(1), unit(2)];

    let mut d_twist = [0.0; VARS];
    let mut d_align = [0.0; VARS];
    let mut d_bend = [0.0; VARS];
    for i in 0..3 {
        axpy(&mut d_twist, q.curl[i], &n_forms[i]);
        axpy(&mut d_twist, q.n[i], &CURL_FORMS[i]);
        axpy(&mut d_align, q.e[i], &n_forms[i]);
        axpy(&mut d_align, q.n[i], &FIELD_FORMS[i]);
    }
    // bend = sum eps_ijk e_i n_j curl_k
    for &(i, j, k, sgn) in &LEVI_CIVITA {
        axpy(&mut d_bend, sgn * q.n[j] * q.curl[k], &FIELD_FORMS[i]);
        axpy(&mut d_bend, sgn * q.e[i] * q.curl[k], &n_forms[j]);
        axpy(&mut d_bend, sgn * q.e[i] * q.n[j], &CURL_FORMS[k]);
    }

    let twist_coef = -(p.k3 - p.k2);
    let align_coef = -p.eps0 * p.eps_a;

    let mut g = [0.0; VARS];
    axpy(&mut g, p.k1 * q.div, &DIV_FORM);
    for k in 0..3 {
        axpy(&mut g, p.k3 * q.curl[k], &CURL_FORMS[k]);
    }
    axpy(&mut g, twist_coef * q.twist, &d_twist);
    g[field_var(0)] -= p.eps0 * p.eps_perp * q.e[0];
    g[field_var(1)] -= p.eps0 * p.eps_perp * q.e[1];
    axpy(&mut g, align_coef * q.align, &d_align);
    axpy(&mut g, p.e_s * q.align, &DIV_FORM);
    axpy(&mut g, p.e_s * q.div, &d_align);
    axpy(&mut g, p.e_b, &d_bend);
    for i in 0..3 {
        g[i] += 2.0 * p.zeta * q.stretch * q.n[i];
    }

    if let Some(h) = hess {
        *h = [[0.0; VARS]; VARS];
        add_outer(h, p.k1, &DIV_FORM, &DIV_FORM);
        for k in 0..3 {
            add_outer(h, p.k3, &CURL_FORMS[k], &CURL_FORMS[k]);
        }
        add_outer(h, twist_coef, &d_twist, &d_twist);
        for i in 0..3 {
            add_sym_outer(h, twist_coef * q.twist, &n_forms[i], &CURL_FORMS[i]);
        }
        h[field_var(0)][field_var(0)] -= p.eps0 * p.eps_perp;
        h[field_var(1)][field_var(1)] -= p.eps0 * p.eps_perp;
        add_outer(h, align_coef, &d_align, &d_align);
        for i in 0..2 {
            add_sym_outer(h, align_coef * q.align + p.e_s * q.div, &n_forms[i], &FIELD_FORMS[i]);
        }
        add_sym_outer(h, p.e_s, &DIV_FORM, &d_align);
        for &(i, j, k, sgn) in &LEVI_CIVITA {
            if i == 2 {
                continue;
            }
            let s = sgn * p.e_b;
            add_sym_outer(h, s * q.curl[k], &FIELD_FORMS[i], &n_forms[j]);
            add_sym_outer(h, s * q.n[j], &FIELD_FORMS[i], &CURL_FORMS[k]);
            add_sym_outer(h, s * q.e[i], &n_forms[j], &CURL_FORMS[k]);
        }
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += 4.0 * p.zeta * q.n[i] * q.n[j];
            }
            h[i][i] += 2.0 * p.zeta * q.stretch;
        }
    }
    g
}

pub fn density_gradient(u: &[f64; VARS], p: &MaterialParams) -> [f64; VARS] {
    density_derivatives(u, p, None)
}

pub fn density_hessian(u: &[f64; VARS], p: &MaterialParams) -> Hessian {
    let mut h = [[0.0; VARS]; VARS];
    density_derivatives(u, p, Some(&mut h));
    h
}

/// `D = -eps0 eps_perp grad phi - eps0 eps_a (n . grad phi) n + e_s (div n) n + e_b n x curl n`.
pub fn electric_displacement(s: &FieldSample, p: &MaterialParams) -> [f64; 3] {
    let c = DirectorCalculus::new(s, p);
    let align = dot(c.n, c.grad_phi);
    let bend = cross(c.n, c.curl);
    let mut d = [0.0; 3];
    for i in 0..3 {
        d[i] = -p.eps0 * p.eps_perp * c.grad_phi[i] - p.eps0 * p.eps_a * align * c.n[i]
            + p.e_s * c.div * c.n[i]
            + p.e_b * bend[i];
    }
    d
}

/// Derivative of each local variable in direction `x_k`, from the sample's
/// second derivatives.
pub fn local_var_derivative(s: &FieldSample, k: usize) -> [f64; VARS] {
    let mut du = [0.0; VARS];
    for i in 0..3 {
        du[i] = s.grad[i][k];
        for l in 0..2 {
            du[grad_var(i, l)] = s.hess[i][l][k];
        }
    }
    du[field_var(0)] = s.hess[3][0][k];
    du[field_var(1)] = s.hess[3][1][k];
    du
}

/// `div D` by the chain rule through the density Hessian: the in-plane
/// components of `D` are `dW/d(grad phi)`.
pub fn div_displacement(s: &FieldSample, p: &MaterialParams) -> f64 {
    let u = local_vars(s);
    let h = density_hessian(&u, p);
    (0..2)
        .map(|k| {
            let du = local_var_derivative(s, k);
            form(&h[field_var(k)], &du)
        })
        .sum()
}

/// Coupled energy `G` and the penalty part, integrated over the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energy {
    pub free: f64,
    pub penalty: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.free + self.penalty
    }
}

/// Shape data at the points of a rule, shared by every cell.
pub(crate) fn tabulate(rule: &QuadratureRule) -> Vec<ShapeValues> {
    rule.points.iter().map(|p| shape(p[0], p[1])).collect()
}

pub fn free_energy(state: &State, p: &MaterialParams, rule: &QuadratureRule) -> Energy {
    let shapes = tabulate(rule);
    let mesh = state.mesh();
    let mut e = Energy::default();
    for (c, cell) in mesh.cells().iter().enumerate() {
        let h = mesh.side_length(cell);
        let coeffs = state.cell_coefficients(c);
        for (s, w) in shapes.iter().zip(&rule.weights) {
            let (g, pen) = density(&local_vars(&sample(&coeffs, s, h)), p);
            e.free += w * h * h * g;
            e.penalty += w * h * h * pen;
        }
    }
    e
}

// Local variables touched by local DOF `4 a + f`, with their coefficients.
fn dof_footprint(s: &ShapeValues, h: f64, a: usize, f: usize) -> [(usize, f64); 3] {
    let inv = 1.0 / h;
    if f < 3 {
        [
            (f, s.value[a]),
            (grad_var(f, 0), s.grad[a][0] * inv),
            (grad_var(f, 1), s.grad[a][1] * inv),
        ]
    } else {
        [
            (field_var(0), s.grad[a][0] * inv),
            (field_var(1), s.grad[a][1] * inv),
            (field_var(0), 0.0),
        ]
    }
}

/// Element residual (`LOCAL`) and, optionally, the row-major element Hessian.
pub fn element_system(
    state: &State,
    cell_index: usize,
    p: &MaterialParams,
    rule: &QuadratureRule,
    shapes: &[ShapeValues],
    mut matrix: Option<&mut [f64]>,
) -> [f64; LOCAL] {
    let cell = state.mesh().cells()[cell_index];
    let h = state.mesh().side_length(&cell);
    let coeffs = state.cell_coefficients(cell_index);
    let mut res = [0.0; LOCAL];
    if let Some(m) = matrix.as_deref_mut() {
        m.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut hess = [[0.0; VARS]; VARS];
    let mut foot = [[(0usize, 0.0f64); 3]; LOCAL];
    for (s, w) in shapes.iter().zip(&rule.weights) {
        let wt = w * h * h;
        let u = local_vars(&sample(&coeffs, s, h));
        let want_hessian = matrix.is_some();
        let g = density_derivatives(&u, p, want_hessian.then_some(&mut hess));
        for a in 0..NODES {
            for f in 0..FIELDS {
                foot[FIELDS * a + f] = dof_footprint(s, h, a, f);
            }
        }
        for (l, fp) in foot.iter().enumerate() {
            res[l] += wt * fp.iter().map(|&(v, c)| g[v] * c).sum::<f64>();
        }
        if let Some(m) = matrix.as_deref_mut() {
            for (col, fc) in foot.iter().enumerate() {
                let mut hb = [0.0; VARS];
                for &(v, c) in fc {
                    if c != 0.0 {
                        axpy(&mut hb, c, &hess[v]);
                    }
                }
                for (row, fr) in foot.iter().enumerate() {
                    let v: f64 = fr.iter().map(|&(var, c)| c * hb[var]).sum();
                    m[row * LOCAL + col] += wt * v;
                }
            }
        }
    }
    res
}

/// Free-DOF residual of the first-order optimality system.
pub fn assemble_residual(state: &State, p: &MaterialParams, rule: &QuadratureRule) -> Vec<f64> {
    let shapes = tabulate(rule);
    let dofs = state.dofs();
    let mut r = alloc::vec![0.0; dofs.num_free()];
    for c in 0..dofs.num_cells() {
        let local = element_system(state, c, p, rule, &shapes, None);
        distribute_vector(dofs, c, &local, &mut r);
    }
    r
}

/// Free-DOF residual and Hessian. A matrix from an earlier call on the same
/// space may be passed in to reuse its pattern.
pub fn assemble_system(
    state: &State,
    p: &MaterialParams,
    rule: &QuadratureRule,
    reuse: Option<SparseMatrix>,
) -> (Vec<f64>, SparseMatrix) {
    let shapes = tabulate(rule);
    let dofs = state.dofs();
    let mut mat = match reuse {
        Some(mut m) if m.dim() == dofs.num_free() => {
            m.clear();
            m
        }
        _ => SparseMatrix::pattern_for(dofs),
    };
    let mut r = alloc::vec![0.0; dofs.num_free()];
    let mut local_mat = alloc::vec![0.0; LOCAL * LOCAL];
    for c in 0..dofs.num_cells() {
        let local = element_system(state, c, p, rule, &shapes, Some(&mut local_mat));
        distribute_vector(dofs, c, &local, &mut r);
        mat.distribute(dofs, c, &local_mat);
    }
    (r, mat)
}

pub fn assemble_hessian(state: &State, p: &MaterialParams, rule: &QuadratureRule) -> SparseMatrix {
    assemble_system(state, p, rule, None).1
}
