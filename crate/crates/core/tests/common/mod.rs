#![allow(dead_code)]

use std::sync::Arc;

use nematic_core::estimator::volume_residual_q;
use nematic_core::fem::reference::shape;
use nematic_core::fem::state::sample;
use nematic_core::fem::{QuadratureRule, Space, State};
use nematic_core::physics::{assemble_residual, free_energy, MaterialParams};
use nematic_core::problem::ManufacturedPotential;
use rand::Rng;

/// `sum_T int_T q^2` through the estimator's explicit q kernel.
pub fn q_integral(state: &State, params: &MaterialParams, rule: &QuadratureRule) -> f64 {
    let mesh = state.mesh();
    let mut total = 0.0;
    for (c, cell) in mesh.cells().iter().enumerate() {
        let h = mesh.side_length(cell);
        let coeffs = state.cell_coefficients(c);
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let q = volume_residual_q(&sample(&coeffs, &shape(pt[0], pt[1]), h), params);
            total += w * h * h * q * q;
        }
    }
    total
}

/// Full H1 norm of `phi_h - phi*` for the manufactured potential.
pub fn potential_h1_error(state: &State, exact: &ManufacturedPotential, rule: &QuadratureRule) -> f64 {
    let mesh = state.mesh();
    let mut total = 0.0;
    for (c, cell) in mesh.cells().iter().enumerate() {
        let h = mesh.side_length(cell);
        let o = mesh.origin(cell);
        let coeffs = state.cell_coefficients(c);
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let s = sample(&coeffs, &shape(pt[0], pt[1]), h);
            let (x, y) = (o[0] + h * pt[0], o[1] + h * pt[1]);
            let g = exact.grad_phi(x, y);
            let e = s.potential() - exact.phi(x, y);
            let gx = s.grad[3][0] - g[0];
            let gy = s.grad[3][1] - g[1];
            total += w * h * h * (e * e + gx * gx + gy * gy);
        }
    }
    total.sqrt()
}

/// Near-unit director with random potential at the free nodes.
pub fn random_state(space: Arc<Space>, rng: &mut impl Rng) -> State {
    let mut state = State::lifted(space, |_, _| [0.0, 0.0, 1.0, 0.0]);
    let free: Vec<f64> = (0..state.dofs().num_free_nodes())
        .flat_map(|_| {
            let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.2..1.0)];
            let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let wobble: f64 = rng.gen_range(0.98..1.02);
            [wobble * v[0] / len, wobble * v[1] / len, wobble * v[2] / len, rng.gen_range(-1.0..1.0)]
        })
        .collect();
    state.set_free_values(&free).unwrap();
    state
}

pub fn random_direction(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let d: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    d.into_iter().map(|v| v / norm).collect()
}

fn shifted(state: &State, t: f64, dir: &[f64]) -> State {
    let mut s = state.clone();
    s.add_free(t, dir).unwrap();
    s
}

/// Richardson-extrapolated central difference; exact up to rounding for
/// polynomials of degree four.
pub fn directional_fd<T>(f: impl Fn(f64) -> T, h: f64, combine: impl Fn(&T, &T, &T, &T) -> Vec<f64>) -> Vec<f64> {
    let (p1, m1, p2, m2) = (f(h), f(-h), f(2.0 * h), f(-2.0 * h));
    combine(&p1, &m1, &p2, &m2)
}

fn richardson(p1: f64, m1: f64, p2: f64, m2: f64, h: f64) -> f64 {
    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
}

/// Directional derivative of the total energy by finite differences.
pub fn energy_fd(state: &State, params: &MaterialParams, rule: &QuadratureRule, dir: &[f64], h: f64) -> f64 {
    let e = |t: f64| free_energy(&shifted(state, t, dir), params, rule).total();
    directional_fd(e, h, |a, b, c, d| vec![richardson(*a, *b, *c, *d, h)])[0]
}

/// Directional derivative of the residual by finite differences.
pub fn residual_fd(state: &State, params: &MaterialParams, rule: &QuadratureRule, dir: &[f64], h: f64) -> Vec<f64> {
    let r = |t: f64| assemble_residual(&shifted(state, t, dir), params, rule);
    directional_fd(r, h, |a, b, c, d| {
        (0..a.len()).map(|i| richardson(a[i], b[i], c[i], d[i], h)).collect()
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn relative_gap(value: f64, reference: f64) -> f64 {
    if value == reference {
        0.0
    } else {
        (value - reference).abs() / reference.abs().max(value.abs())
    }
}

/// Adaptive refinement of a `root x root` grid, marking a few random cells
/// per step so closure cascades get exercised.
pub fn random_mesh(root: u32, steps: usize, rng: &mut impl Rng) -> nematic_core::mesh::QuadMesh {
    use nematic_core::mesh::{MarkSet, QuadMesh};
    let mut mesh = QuadMesh::uniform(root);
    for _ in 0..steps {
        let mut marks = MarkSet::new();
        let count = rng.gen_range(1..=3);
        for _ in 0..count {
            // Bias toward the finest cells to force level jumps.
            let cells = mesh.cells();
            let pick = if rng.gen_bool(0.6) {
                let top = mesh.max_level();
                let fine: Vec<_> = cells.iter().filter(|c| c.level == top).collect();
                *fine[rng.gen_range(0..fine.len())]
            } else {
                cells[rng.gen_range(0..cells.len())]
            };
            marks.insert(pick);
        }
        mesh = mesh.adaptive_refine(&marks).unwrap();
    }
    mesh
}

pub fn proptest_config(cases: u32) -> proptest::prelude::ProptestConfig {
    proptest::prelude::ProptestConfig {
        cases,
        failure_persistence: None,
        ..Default::default()
    }
}
