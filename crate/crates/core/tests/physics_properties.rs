mod common;

use std::collections::HashMap;

use nematic_core::fem::{QuadratureRule, Space, State};
use nematic_core::mesh::QuadMesh;
use nematic_core::physics::{assemble_hessian, assemble_residual, free_energy, MaterialParams};
use nematic_core::problem::{paper_problem, BoundaryData};
use nematic_core::solver::LinearSolver;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const EPS: f64 = 1e-5;

/// Central difference at `EPS` and `EPS / 2`, combined by Richardson.
fn richardson(f: impl Fn(f64) -> f64) -> f64 {
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * d(EPS / 2.0) - d(EPS)) / 3.0
}

fn shifted(state: &State, t: f64, dir: &[f64]) -> State {
    let mut s = state.clone();
    s.add_free(t, dir).unwrap();
    s
}

fn symmetric_data() -> BoundaryData {
    BoundaryData::new("symmetric", |_, _| [0.0, 0.0, 1.0], |x, y| x * y)
}

proptest! {
    #![proptest_config(common::proptest_config(12))]

    #[test]
    fn residual_is_the_energy_gradient(seed in any::<u64>(), steps in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = MaterialParams::default();
        let rule = QuadratureRule::square(4);
        let mesh = random_mesh(4, steps, &mut rng);
        let state = random_state(Space::new(mesh, paper_problem(50.0, 1.5)), &mut rng);
        let r = assemble_residual(&state, &params, &rule);
        for _ in 0..3 {
            let d = random_direction(r.len(), &mut rng);
            let fd = richardson(|t| free_energy(&shifted(&state, t, &d), &params, &rule).total());
            prop_assert!(relative_gap(fd, dot(&r, &d)) < 1e-6, "{} vs {}", fd, dot(&r, &d));
        }
    }

    #[test]
    fn hessian_is_the_residual_jacobian(seed in any::<u64>(), steps in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = MaterialParams::default();
        let rule = QuadratureRule::square(4);
        let mesh = random_mesh(4, steps, &mut rng);
        let state = random_state(Space::new(mesh, paper_problem(50.0, 1.5)), &mut rng);
        let a = assemble_hessian(&state, &params, &rule);
        let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(a.max_asymmetry() < 1e-12 * scale.max(1.0));
        let d = random_direction(a.dim(), &mut rng);
        let ad = a.mul_vec(&d);
        let plus = assemble_residual(&shifted(&state, EPS, &d), &params, &rule);
        let minus = assemble_residual(&shifted(&state, -EPS, &d), &params, &rule);
        let plus2 = assemble_residual(&shifted(&state, EPS / 2.0, &d), &params, &rule);
        let minus2 = assemble_residual(&shifted(&state, -EPS / 2.0, &d), &params, &rule);
        let fd: Vec<f64> = (0..ad.len())
            .map(|i| (4.0 * (plus2[i] - minus2[i]) / EPS - (plus[i] - minus[i]) / (2.0 * EPS)) / 3.0)
            .collect();
        let diff: Vec<f64> = fd.iter().zip(&ad).map(|(x, y)| x - y).collect();
        prop_assert!(norm(&diff) < 1e-5 * norm(&ad));
    }

    #[test]
    fn penalty_is_linear_in_zeta(seed in any::<u64>(), zeta in 1.0f64..1e6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = QuadratureRule::square(4);
        let state = random_state(Space::new(QuadMesh::uniform(3), paper_problem(50.0, 1.5)), &mut rng);
        let base = MaterialParams { zeta: 1.0, ..MaterialParams::default() };
        let e1 = free_energy(&state, &base, &rule);
        let e2 = free_energy(&state, &MaterialParams { zeta, ..base }, &rule);
        prop_assert_eq!(e1.free, e2.free);
        prop_assert!((e2.penalty - zeta * e1.penalty).abs() <= 1e-13 * e2.penalty.abs());
    }

    #[test]
    fn energy_is_invariant_under_diagonal_mirroring(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = MaterialParams::default();
        let rule = QuadratureRule::square(4);
        let space = Space::new(QuadMesh::uniform(4), symmetric_data());
        let state = random_state(space.clone(), &mut rng);
        let dofs = &space.dofs;
        let key = |p: [f64; 2]| ((p[0] * 64.0).round() as i64, (p[1] * 64.0).round() as i64);
        let index: HashMap<(i64, i64), usize> =
            (0..dofs.num_free_nodes()).map(|i| (key(dofs.node_position(dofs.free_node(i))), i)).collect();
        let free = state.free_values();
        let mut mirrored = vec![0.0; free.len()];
        for i in 0..dofs.num_free_nodes() {
            let p = dofs.node_position(dofs.free_node(i));
            let j = index[&key([p[1], p[0]])];
            mirrored[4 * j] = free[4 * i + 1];
            mirrored[4 * j + 1] = free[4 * i];
            mirrored[4 * j + 2] = free[4 * i + 2];
            mirrored[4 * j + 3] = free[4 * i + 3];
        }
        let mut other = state.clone();
        other.set_free_values(&mirrored).unwrap();
        let a = free_energy(&state, &params, &rule);
        let b = free_energy(&other, &params, &rule);
        prop_assert!(relative_gap(a.free, b.free) < 1e-12);
        prop_assert!(relative_gap(a.penalty, b.penalty) < 1e-12);
    }
}

/// The Newton direction decreases the penalized energy at a non-critical state.
#[test]
fn newton_direction_is_a_descent_direction() {
    let params = MaterialParams::default();
    let rule = QuadratureRule::square(4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut slopes = Vec::new();
    for _ in 0..5 {
        let space = Space::new(QuadMesh::uniform(4), paper_problem(50.0, 1.5));
        let mut state = State::lifted(space, |_, _| [0.0, 0.0, 1.0, 0.0]);
        let noise: Vec<f64> = (0..state.dofs().num_free()).map(|_| rng.gen_range(-0.05..0.05)).collect();
        state.add_free(1.0, &noise).unwrap();
        let r = assemble_residual(&state, &params, &rule);
        let a = assemble_hessian(&state, &params, &rule);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = LinearSolver::new().solve(&a, &rhs).unwrap();
        slopes.push(dot(&r, &step));
    }
    assert!(slopes.iter().all(|&s| s < 0.0), "directional derivatives {slopes:?}");
}
