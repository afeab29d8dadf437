//! Residual-based a posteriori error estimator for the coupled system.
//!
//! Per cell `T` the estimator combines `h_T^2 (|p|^2 + |q|^2)` over the cell,
//! where `p` and `q` are the strong-form residuals of the director and
//! potential equations, with `h_E (|[p]|^2 + |[q]|^2)` over its interior edges,
//! where the brackets are jumps of the natural fluxes.

use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::fem::quadrature::{EdgeRule, QuadratureRule};
use crate::fem::state::{sample, FieldSample, State};
use crate::mesh::{CellId, InteriorEdge};
use crate::physics::{cross, dot, mat_vec, tabulate, DirectorCalculus, MaterialParams};
#[allow(unused_imports)] // float methods come from std whenever it is linked
use num_traits::Float;

// First derivatives of the curl and of n . curl, in direction k.
fn curl_derivative(s: &FieldSample, k: usize) -> [f64; 3] {
    let h = &s.hess;
    [h[2][1][k], -h[2][0][k], h[1][0][k] - h[0][1][k]]
}

fn director_derivative(s: &FieldSample, k: usize) -> [f64; 3] {
    [s.grad[0][k], s.grad[1][k], s.grad[2][k]]
}

fn field_derivative(s: &FieldSample, k: usize) -> [f64; 3] {
    [s.hess[3][0][k], s.hess[3][1][k], 0.0]
}

// Curl of a vector field from its in-plane partial derivatives.
fn curl_of(dx: [f64; 3], dy: [f64; 3]) -> [f64; 3] {
    [dy[2], -dx[2], dx[1] - dy[0]]
}

/// Strong-form residual of the director equation.
pub fn volume_residual_p(s: &FieldSample, p: &MaterialParams) -> [f64; 3] {
    let c = DirectorCalculus::new(s, p);
    let (n, e, curl) = (c.n, c.grad_phi, c.curl);
    let twist = dot(n, curl);
    let align = dot(n, e);
    let stretch = dot(n, n) - 1.0;
    let beta = 1.0 - p.kappa();

    let dn = [director_derivative(s, 0), director_derivative(s, 1)];
    let dcurl = [curl_derivative(s, 0), curl_derivative(s, 1)];
    let de = [field_derivative(s, 0), field_derivative(s, 1)];

    let grad_div = [
        s.hess[0][0][0] + s.hess[1][1][0],
        s.hess[0][0][1] + s.hess[1][1][1],
        0.0,
    ];
    // d/dx_k of Z curl = curl - beta (n . curl) n
    let dz = |k: usize| {
        let dtwist = dot(dn[k], curl) + dot(n, dcurl[k]);
        let mut v = [0.0; 3];
        for i in 0..3 {
            v[i] = dcurl[k][i] - beta * (dtwist * n[i] + twist * dn[k][i]);
        }
        v
    };
    let curl_zc = curl_of(dz(0), dz(1));
    let grad_align = [
        dot(dn[0], e) + dot(n, de[0]),
        dot(dn[1], e) + dot(n, de[1]),
        0.0,
    ];
    let curl_x_e = cross(curl, e);
    // d/dx_k of e x n
    let den = |k: usize| {
        let a = cross(de[k], n);
        let b = cross(e, dn[k]);
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    };
    let curl_en = curl_of(den(0), den(1));

    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = -p.k1 * grad_div[i] + p.k3 * curl_zc[i] + (p.k2 - p.k3) * twist * curl[i]
            + 2.0 * p.zeta * stretch * n[i]
            - p.eps0 * p.eps_a * align * e[i]
            + p.e_s * c.div * e[i]
            - p.e_s * grad_align[i]
            + p.e_b * curl_x_e[i]
            + p.e_b * curl_en[i];
    }
    out
}

/// Strong-form residual of the potential equation, `-div D`.
pub fn volume_residual_q(s: &FieldSample, p: &MaterialParams) -> f64 {
    let c = DirectorCalculus::new(s, p);
    let (n, e, curl) = (c.n, c.grad_phi, c.curl);
    let dn = [director_derivative(s, 0), director_derivative(s, 1)];
    let dcurl = [curl_derivative(s, 0), curl_derivative(s, 1)];
    let de = [field_derivative(s, 0), field_derivative(s, 1)];
    let laplace = s.hess[3][0][0] + s.hess[3][1][1];
    let align = dot(n, e);
    let d_align = [dot(dn[0], e) + dot(n, de[0]), dot(dn[1], e) + dot(n, de[1])];
    let d_div = [
        s.hess[0][0][0] + s.hess[1][1][0],
        s.hess[0][0][1] + s.hess[1][1][1],
    ];
    // div(f n) in the plane
    let div_scaled = |f: f64, df: [f64; 2]| df[0] * n[0] + df[1] * n[1] + f * c.div;
    let div_bend: f64 = (0..2)
        .map(|k| {
            let a = cross(dn[k], curl);
            let b = cross(n, dcurl[k]);
            a[k] + b[k]
        })
        .sum();
    p.eps0 * p.eps_perp * laplace + p.eps0 * p.eps_a * div_scaled(align, d_align)
        - p.e_s * div_scaled(c.div, d_div)
        - p.e_b * div_bend
}

/// Natural fluxes of the director and potential equations through a surface
/// with in-plane unit normal `normal`.
pub fn fluxes(s: &FieldSample, p: &MaterialParams, normal: [f64; 2]) -> ([f64; 3], f64) {
    let c = DirectorCalculus::new(s, p);
    let eta = [normal[0], normal[1], 0.0];
    let (n, e) = (c.n, c.grad_phi);
    let align = dot(n, e);
    let zc = mat_vec(&c.z, c.curl);
    let zc_eta = cross(zc, eta);
    let en_eta = cross(cross(e, n), eta);
    let mut pf = [0.0; 3];
    for i in 0..3 {
        pf[i] = p.k1 * c.div * eta[i] + p.k3 * zc_eta[i] + p.e_s * align * eta[i] + p.e_b * en_eta[i];
    }
    let n_eta = dot(n, eta);
    let qf = -p.eps0 * p.eps_perp * dot(e, eta) - p.eps0 * p.eps_a * align * n_eta + p.e_s * c.div * n_eta
        + p.e_b * dot(cross(n, c.curl), eta);
    (pf, qf)
}

/// Flux jumps (minus side minus plus side) at the points of an edge rule.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeJumps {
    pub p: Vec<[f64; 3]>,
    pub q: Vec<f64>,
}

fn sample_at(state: &State, cell: &CellId, x: [f64; 2]) -> Result<FieldSample> {
    let mesh = state.mesh();
    let h = mesh.side_length(cell);
    let o = mesh.origin(cell);
    Ok(state.evaluate(cell, &[[(x[0] - o[0]) / h, (x[1] - o[1]) / h]])?[0])
}

pub fn edge_jumps(edge: &InteriorEdge, state: &State, p: &MaterialParams, rule: &EdgeRule) -> Result<EdgeJumps> {
    let [x0, y0] = edge.start;
    let [x1, y1] = edge.end();
    let on_boundary = |a: f64, b: f64| (a == b) && (a == 0.0 || a == 1.0);
    if on_boundary(x0, x1) || on_boundary(y0, y1) || edge.minus == edge.plus {
        return Err(Error::BoundaryEdge);
    }
    let mut out = EdgeJumps {
        p: Vec::with_capacity(rule.points.len()),
        q: Vec::with_capacity(rule.points.len()),
    };
    for &t in &rule.points {
        let x = edge.point(t);
        let (pm, qm) = fluxes(&sample_at(state, &edge.minus, x)?, p, edge.normal);
        let (pp, qp) = fluxes(&sample_at(state, &edge.plus, x)?, p, edge.normal);
        out.p.push([pm[0] - pp[0], pm[1] - pp[1], pm[2] - pp[2]]);
        out.q.push(qm - qp);
    }
    Ok(out)
}

/// Squared estimator components of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEstimate {
    pub cell: CellId,
    /// `h_T^2 |p|^2_T`
    pub volume_p: f64,
    /// `h_T^2 |q|^2_T`
    pub volume_q: f64,
    /// Sum of `h_E |[p]|^2_E` over the cell's interior edges, each edge
    /// contributing half.
    pub edge_p: f64,
    /// Same for `[q]`.
    pub edge_q: f64,
}

impl CellEstimate {
    /// Indicator with shared edges split between their two cells; these sum to
    /// the global estimate.
    pub fn theta(&self) -> f64 {
        (self.volume_p + self.volume_q + self.edge_p + self.edge_q).sqrt()
    }

    /// Indicator with every adjacent edge counted in full; used for marking.
    pub fn theta_full(&self) -> f64 {
        (self.volume_p + self.volume_q + 2.0 * (self.edge_p + self.edge_q)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub cells: Vec<CellEstimate>,
    pub global: f64,
}

impl EstimatorResult {
    /// `(cell, full-attribution indicator)` pairs for marking.
    pub fn marking_indicators(&self) -> Vec<(CellId, f64)> {
        self.cells.iter().map(|c| (c.cell, c.theta_full())).collect()
    }

    pub fn volume_q_total(&self) -> f64 {
        self.cells.iter().map(|c| c.volume_q).sum()
    }
}

/// Evaluates the estimator on every active cell.
pub fn estimate(state: &State, p: &MaterialParams, volume: &QuadratureRule, edge: &EdgeRule) -> Result<EstimatorResult> {
    let mesh = state.mesh();
    let shapes = tabulate(volume);
    let mut cells: Vec<CellEstimate> = mesh
        .cells()
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let h = mesh.side_length(cell);
            let coeffs = state.cell_coefficients(i);
            let (mut vp, mut vq) = (0.0, 0.0);
            for (s, w) in shapes.iter().zip(&volume.weights) {
                let smp = sample(&coeffs, s, h);
                let pv = volume_residual_p(&smp, p);
                let qv = volume_residual_q(&smp, p);
                vp += w * dot(pv, pv);
                vq += w * qv * qv;
            }
            // h_T^2 times the integral over an area h_T^2
            let h4 = h * h * h * h;
            CellEstimate {
                cell: *cell,
                volume_p: h4 * vp,
                volume_q: h4 * vq,
                edge_p: 0.0,
                edge_q: 0.0,
            }
        })
        .collect();
    for e in mesh.interior_edges() {
        let jumps = edge_jumps(&e, state, p, edge)?;
        let (mut jp, mut jq) = (0.0, 0.0);
        for ((w, pj), qj) in edge.weights.iter().zip(&jumps.p).zip(&jumps.q) {
            jp += w * dot(*pj, *pj);
            jq += w * qj * qj;
        }
        // h_E times the integral over a length h_E, split between two cells
        let scale = 0.5 * e.length * e.length;
        for side in [e.minus, e.plus] {
            let i = mesh.index_of(&side).ok_or(Error::CellNotActive(side))?;
            cells[i].edge_p += scale * jp;
            cells[i].edge_q += scale * jq;
        }
    }
    let global = cells.iter().map(|c| c.theta() * c.theta()).sum::<f64>().sqrt();
    Ok(EstimatorResult { cells, global })
}
