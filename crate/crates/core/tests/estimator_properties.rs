mod common;

use nematic_core::estimator::{estimate, EstimatorResult};
use nematic_core::fem::{EdgeRule, QuadratureRule, Space, State};
use nematic_core::mesh::{Neighbor, QuadMesh, Side};
use nematic_core::physics::MaterialParams;
use nematic_core::problem::{paper_problem, trivial_problem, BoundaryData};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(state: &State, params: &MaterialParams) -> EstimatorResult {
    estimate(state, params, &QuadratureRule::square(4), &EdgeRule::gauss(4)).unwrap()
}

fn smooth_data() -> BoundaryData {
    BoundaryData::new("smooth", |x, y| smooth(x, y)[..3].try_into().unwrap(), |x, y| smooth(x, y)[3])
}

fn smooth(x: f64, y: f64) -> [f64; 4] {
    let t = 0.3 * (2.0 * x).sin() * (3.0 * y).cos();
    [t.sin(), 0.2 * x * y, t.cos(), (x + 2.0 * y).exp() * 0.1]
}

proptest! {
    #![proptest_config(common::proptest_config(24))]

    #[test]
    fn component_identities(seed in any::<u64>(), steps in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = common::random_mesh(3, steps, &mut rng);
        let state = common::random_state(Space::new(mesh, paper_problem(50.0, 1.5)), &mut rng);
        let r = run(&state, &MaterialParams::default());
        let mut sum = 0.0;
        let mut full = 0.0;
        let (mut volume, mut edge) = (0.0, 0.0);
        for c in &r.cells {
            for v in [c.volume_p, c.volume_q, c.edge_p, c.edge_q] {
                prop_assert!(v >= 0.0);
            }
            let parts = c.volume_p + c.volume_q + c.edge_p + c.edge_q;
            prop_assert!((c.theta() * c.theta() - parts).abs() <= 1e-12 * parts);
            sum += c.theta() * c.theta();
            full += c.theta_full() * c.theta_full();
            volume += c.volume_p + c.volume_q;
            edge += c.edge_p + c.edge_q;
        }
        prop_assert!((sum.sqrt() - r.global).abs() <= 1e-13 * r.global);
        prop_assert!((full - (volume + 2.0 * edge)).abs() <= 1e-12 * full);
    }

    #[test]
    fn editing_one_cell_is_local(seed in any::<u64>(), steps in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = common::random_mesh(3, steps, &mut rng);
        let params = MaterialParams::default();
        let state = common::random_state(Space::new(mesh.clone(), paper_problem(50.0, 1.5)), &mut rng);
        let before = run(&state, &params);

        // The centre node of a cell is supported on that cell alone.
        let target = rng.gen_range(0..mesh.len());
        let centre = state.dofs().cell_nodes(target)[4];
        let free = (0..state.dofs().num_free_nodes()).position(|i| state.dofs().free_node(i) == centre).unwrap();
        let mut bump = vec![0.0; state.dofs().num_free()];
        for f in 0..4 {
            bump[4 * free + f] = rng.gen_range(-0.1..0.1);
        }
        let mut edited = state.clone();
        edited.add_free(1.0, &bump).unwrap();
        let after = run(&edited, &params);

        let cell = mesh.cells()[target];
        let mut allowed = vec![cell];
        for side in Side::ALL {
            match mesh.neighbor(&cell, side) {
                Neighbor::Boundary => {}
                Neighbor::Same(c) | Neighbor::Coarser(c) => allowed.push(c),
                Neighbor::Finer(cs) => allowed.extend(cs),
            }
        }
        for (b, a) in before.cells.iter().zip(&after.cells) {
            if !allowed.contains(&b.cell) {
                prop_assert_eq!(b, a);
            }
        }
        let i = mesh.index_of(&cell).unwrap();
        prop_assert!(before.cells[i] != after.cells[i]);
    }
}

#[test]
fn zero_detection() {
    let params = MaterialParams::default();
    let trivial = State::lifted(Space::new(QuadMesh::uniform(4), trivial_problem()), |_, _| [0.0, 0.0, 1.0, 0.0]);
    assert!(run(&trivial, &params).global < 1e-10);

    // Anything else is seen.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noisy = common::random_state(Space::new(QuadMesh::uniform(4), trivial_problem()), &mut rng);
    assert!(run(&noisy, &params).global >= 1e-10);
    let driven = State::lifted(Space::new(QuadMesh::uniform(4), paper_problem(50.0, 1.5)), |_, _| [0.0, 0.0, 1.0, 0.0]);
    assert!(run(&driven, &params).global >= 1e-10);
    let mut nudged = trivial.clone();
    let mut bump = vec![0.0; trivial.dofs().num_free()];
    bump[7] = 1e-3;
    nudged.add_free(1.0, &bump).unwrap();
    assert!(run(&nudged, &params).global >= 1e-10);
}

#[test]
fn volume_terms_shrink_under_refinement() {
    let params = MaterialParams::default();
    let volume = |n: u32| {
        let s = State::lifted(Space::new(QuadMesh::uniform(n), smooth_data()), smooth);
        run(&s, &params).cells.iter().map(|c| c.volume_p + c.volume_q).sum::<f64>()
    };
    let (coarse, fine) = (volume(4), volume(8));
    assert!(fine < coarse, "{fine} vs {coarse}");
}
