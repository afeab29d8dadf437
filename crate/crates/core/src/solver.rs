//! Damped Newton iteration and the nested-iteration driver.

use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::linalg::solvers::Solve;
use faer::MatMut;

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorResult};
use crate::fem::quadrature::{EdgeRule, QuadratureRule};
use crate::fem::sparse::SparseMatrix;
use crate::fem::state::{Space, State};
use crate::mesh::{dorfler_mark, QuadMesh};
use crate::metrics::{LevelEstimate, RunReport};
use crate::physics::{assemble_residual, assemble_system, MaterialParams};
use crate::problem::BoundaryData;
#[allow(unused_imports)] // float methods come from std whenever it is linked
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    Uniform,
    Amr,
}

impl RefinementMode {
    pub fn name(&self) -> &'static str {
        match self {
            RefinementMode::Uniform => "uniform",
            RefinementMode::Amr => "amr",
        }
    }

    pub fn default_levels(&self) -> usize {
        match self {
            RefinementMode::Uniform => 5,
            RefinementMode::Amr => 6,
        }
    }
}

impl core::str::FromStr for RefinementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(RefinementMode::Uniform),
            "amr" => Ok(RefinementMode::Amr),
            other => Err(Error::InvalidConfig(format!("unknown refinement mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolverKind {
    /// Sparse LU with partial pivoting.
    SparseLu,
}

impl core::str::FromStr for LinearSolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lu" => Ok(LinearSolverKind::SparseLu),
            other => Err(Error::InvalidConfig(format!("unknown linear solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop when the l2 norm of the free-DOF residual drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping_start: f64,
    pub damping_increment: f64,
    pub damping_cap: f64,
    pub mode: RefinementMode,
    /// Meshes solved, the root mesh included.
    pub levels: usize,
    pub dorfler_fraction: f64,
    pub linear_solver: LinearSolverKind,
    pub root: u32,
    pub volume_points: usize,
    pub edge_points: usize,
    /// DOF count that one work unit refers to; see [`crate::metrics::reference_dofs`].
    pub reference_dofs: Option<usize>,
    /// Amplitude of a bubble-shaped `n1` perturbation added to the root-level
    /// initial guess. Zero keeps the director exactly `(0, 0, 1)`.
    pub initial_tilt: f64,
}

impl SolverConfig {
    pub fn new(mode: RefinementMode) -> Self {
        SolverConfig {
            tolerance: 1e-4,
            max_iterations: 200,
            damping_start: 0.2,
            damping_increment: 0.2,
            damping_cap: 1.0,
            mode,
            levels: mode.default_levels(),
            dorfler_fraction: 0.9,
            linear_solver: LinearSolverKind::SparseLu,
            root: 16,
            volume_points: 4,
            edge_points: 4,
            reference_dofs: None,
            initial_tilt: 0.0,
        }
    }

    /// Damping used on NI level `level` (0 for the root mesh).
    pub fn damping(&self, level: usize) -> f64 {
        (self.damping_start + self.damping_increment * level as f64).min(self.damping_cap)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.tolerance > 0.0) {
            return fail("tolerance must be positive");
        }
        if !(self.damping_start > 0.0 && self.damping_start <= self.damping_cap && self.damping_cap <= 1.0) {
            return fail("damping must satisfy 0 < start <= cap <= 1");
        }
        if !(self.damping_increment >= 0.0) {
            return fail("damping increment must be non-negative");
        }
        if self.levels < 1 {
            return fail("at least one level is required");
        }
        if self.max_iterations < 1 {
            return fail("max_iterations must be at least 1");
        }
        if !(self.dorfler_fraction > 0.0 && self.dorfler_fraction <= 1.0) {
            return fail("dorfler fraction must lie in (0, 1]");
        }
        if self.root < 1 || self.root > 255 {
            return fail("root grid size must lie in 1..=255");
        }
        if self.volume_points < 1 || self.edge_points < 1 {
            return fail("quadrature orders must be positive");
        }
        if !self.initial_tilt.is_finite() {
            return fail("initial tilt must be finite");
        }
        if self.reference_dofs == Some(0) {
            return fail("reference DOF count must be positive");
        }
        Ok(())
    }

    pub fn volume_rule(&self) -> QuadratureRule {
        QuadratureRule::square(self.volume_points)
    }

    pub fn edge_rule(&self) -> EdgeRule {
        EdgeRule::gauss(self.edge_points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub cells: usize,
    pub dofs: usize,
    pub free_dofs: usize,
    pub iterations: usize,
    pub initial_residual: f64,
    pub residual: f64,
    pub damping: f64,
    pub wall_time: f64,
    /// Assemble-and-solve steps, for work units.
    pub linearizations: usize,
    /// Residual norm before the first and after every Newton step.
    pub residual_history: Vec<f64>,
}

/// Monotone seconds, supplied by the caller.
pub trait Clock {
    fn seconds(&self) -> f64;
}

impl<F: Fn() -> f64> Clock for F {
    fn seconds(&self) -> f64 {
        self()
    }
}

/// A clock that always reads zero.
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sparse LU that keeps its symbolic factorization while the pattern is fixed.
#[derive(Default)]
pub struct LinearSolver {
    symbolic: Option<(usize, usize, SymbolicLu<usize>)>,
}

impl LinearSolver {
    pub fn new() -> Self {
        LinearSolver::default()
    }

    /// Solves `A x = b`, refining until the normwise backward error is below
    /// `1e-10`.
    pub fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, a.col_ptr(), None, a.row_idx());
        let key = (n, a.nnz());
        let symbolic = match &self.symbolic {
            Some((dim, nnz, s)) if (*dim, *nnz) == key => s.clone(),
            _ => {
                let s = SymbolicLu::try_new(sym).map_err(|e| Error::Factorization(format!("{e:?}")))?;
                self.symbolic = Some((key.0, key.1, s.clone()));
                s
            }
        };
        let mat = SparseColMatRef::new(sym, a.values());
        let lu = Lu::try_new_with_symbolic(symbolic, mat).map_err(|e| Error::Factorization(format!("{e:?}")))?;

        let solve = |rhs: &[f64]| {
            let mut x = rhs.to_vec();
            lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
            x
        };
        let mut x = solve(b);
        let a_norm = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let b_norm = inf(b);
        for _ in 0..3 {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let denom = a_norm * inf(&x) + b_norm;
            let backward = if denom > 0.0 { inf(&r) / denom } else { 0.0 };
            if !backward.is_finite() {
                return Err(Error::Factorization("singular or ill-conditioned system".into()));
            }
            if backward < 1e-10 {
                return Ok(x);
            }
            let dx = solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        Err(Error::Factorization("backward error above 1e-10 after refinement".into()))
    }
}

/// Damped Newton on one mesh with fixed damping `alpha`.
pub fn newton_solve(
    initial: State,
    params: &MaterialParams,
    config: &SolverConfig,
    alpha: f64,
) -> Result<(State, LevelStats)> {
    newton_at_level(initial, params, config, alpha, 0)
}

fn newton_at_level(
    initial: State,
    params: &MaterialParams,
    config: &SolverConfig,
    alpha: f64,
    level: usize,
) -> Result<(State, LevelStats)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!("damping {alpha} outside (0, 1]")));
    }
    let rule = config.volume_rule();
    let mut state = initial;
    let mut linear = LinearSolver::new();
    let mut residual = assemble_residual(&state, params, &rule);
    let mut norm = l2_norm(&residual);
    let initial_residual = norm;
    let mut history = alloc::vec![norm];
    let mut iterations = 0;
    let mut matrix: Option<SparseMatrix> = None;
    log::info!("level {level} iter 0 residual {norm:.6e} alpha {alpha}");
    while norm >= config.tolerance {
        if iterations == config.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        }
        let (r, m) = assemble_system(&state, params, &rule, matrix.take());
        residual = r;
        let rhs: Vec<f64> = residual.iter().map(|v| -v).collect();
        let delta = linear.solve(&m, &rhs)?;
        matrix = Some(m);
        state.add_free(alpha, &delta)?;
        iterations += 1;
        residual = assemble_residual(&state, params, &rule);
        let next = l2_norm(&residual);
        log::info!("level {level} iter {iterations} residual {next:.6e} alpha {alpha}");
        if !(next <= 10.0 * norm) {
            return Err(Error::ResidualGrowth {
                previous: norm,
                current: next,
            });
        }
        norm = next;
        history.push(norm);
    }
    let dofs = state.dofs();
    let stats = LevelStats {
        level,
        cells: state.mesh().len(),
        dofs: dofs.num_dofs(),
        free_dofs: dofs.num_free(),
        iterations,
        initial_residual,
        residual: norm,
        damping: alpha,
        wall_time: 0.0,
        linearizations: iterations,
        residual_history: history,
    };
    Ok((state, stats))
}

/// Director `(0, 0, 1)` in the interior; the potential from one linear solve
/// of the potential equation with anisotropy and flexoelectricity switched off.
pub fn initial_guess(space: Arc<Space>, params: &MaterialParams, config: &SolverConfig) -> Result<State> {
    let mut state = State::lifted(space, |_, _| [0.0, 0.0, 1.0, 0.0]);
    let decoupled = MaterialParams {
        eps_a: 0.0,
        e_s: 0.0,
        e_b: 0.0,
        ..*params
    };
    let (r, m) = assemble_system(&state, &decoupled, &config.volume_rule(), None);
    // Without coupling terms the potential block is independent of the
    // director, so keeping only the potential part of the step solves it.
    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    let mut delta = LinearSolver::new().solve(&m, &rhs)?;
    for (i, d) in delta.iter_mut().enumerate() {
        if i % 4 != 3 {
            *d = 0.0;
        }
    }
    state.add_free(1.0, &delta)?;
    Ok(state)
}

/// Adds `amplitude * 16 x (1 - x) y (1 - y)` to `n1` at the free nodes.
pub fn tilt_director(state: &mut State, amplitude: f64) -> Result<()> {
    let dofs = state.dofs();
    let mut delta = alloc::vec![0.0; dofs.num_free()];
    for i in 0..dofs.num_free_nodes() {
        let [x, y] = dofs.node_position(dofs.free_node(i));
        delta[4 * i] = 16.0 * x * (1.0 - x) * y * (1.0 - y);
    }
    state.add_free(amplitude, &delta)
}

/// Nested iteration from the root mesh: solve, then refine (all cells, or
/// the Dörfler-marked ones) and prolong, with damping growing per level.
///
/// An adaptive run stops early when the estimator vanishes identically.
pub fn nested_iteration(
    config: &SolverConfig,
    params: &MaterialParams,
    problem: &BoundaryData,
    clock: &dyn Clock,
) -> Result<(State, RunReport)> {
    nested_iteration_observed(config, params, problem, clock, &mut |_, _, _| Ok(()))
}

/// Called once per solved level with its statistics, state and estimate.
pub type LevelObserver<'a> = dyn FnMut(&LevelStats, &State, &EstimatorResult) -> Result<()> + 'a;

/// [`nested_iteration`] that hands every solved level to `observer`.
/// An observer error aborts the run.
pub fn nested_iteration_observed(
    config: &SolverConfig,
    params: &MaterialParams,
    problem: &BoundaryData,
    clock: &dyn Clock,
    observer: &mut LevelObserver<'_>,
) -> Result<(State, RunReport)> {
    config.validate()?;
    params.validate()?;
    let start = clock.seconds();
    let volume = config.volume_rule();
    let edge = config.edge_rule();

    let mut levels: Vec<LevelStats> = Vec::new();
    let mut estimates: Vec<LevelEstimate> = Vec::new();
    let mut state = initial_guess(Space::new(QuadMesh::uniform(config.root), problem.clone()), params, config)
        .map_err(|e| e.at_level(0))?;
    if config.initial_tilt != 0.0 {
        tilt_director(&mut state, config.initial_tilt).map_err(|e| e.at_level(0))?;
    }
    let mut last_estimate: Option<EstimatorResult> = None;

    for level in 0..config.levels {
        let t0 = clock.seconds();
        if level > 0 {
            let mesh = match config.mode {
                RefinementMode::Uniform => state.mesh().uniform_refine(),
                RefinementMode::Amr => {
                    let est = last_estimate.as_ref().expect("estimate of the previous level");
                    let marks = match dorfler_mark(&est.marking_indicators(), config.dorfler_fraction) {
                        Ok(m) => m,
                        Err(Error::NothingToMark) => {
                            log::info!("level {level}: estimator vanishes, stopping refinement");
                            break;
                        }
                        Err(e) => return Err(e.at_level(level)),
                    };
                    log::info!("level {level}: marked {} of {} cells", marks.len(), state.mesh().len());
                    state.mesh().adaptive_refine(&marks).map_err(|e| e.at_level(level))?
                }
            };
            let space = Space::new(mesh, problem.clone());
            state = state.prolong(space).map_err(|e| e.at_level(level))?;
        }
        let alpha = config.damping(level);
        let (solved, mut stats) =
            newton_at_level(state, params, config, alpha, level).map_err(|e| e.at_level(level))?;
        state = solved;
        if level == 0 {
            stats.linearizations += 1;
        }
        let est = estimate(&state, params, &volume, &edge).map_err(|e| e.at_level(level))?;
        log::info!(
            "level {level}: {} dofs, {} newton steps, estimate {:.6e}",
            stats.dofs,
            stats.iterations,
            est.global
        );
        stats.wall_time = clock.seconds() - t0;
        if level == 0 {
            stats.wall_time = clock.seconds() - start;
        }
        observer(&stats, &state, &est).map_err(|e| e.at_level(level))?;
        estimates.push(LevelEstimate::new(level, &est));
        last_estimate = Some(est);
        levels.push(stats);
    }
    let report = RunReport::new(config, params, &state, levels, estimates, clock.seconds() - start);
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{manufactured_potential_problem, trivial_problem};

    #[test]
    fn damping_schedule() {
        let c = SolverConfig::new(RefinementMode::Amr);
        let a: Vec<f64> = (0..6).map(|l| c.damping(l)).collect();
        let expected = [0.2, 0.4, 0.6, 0.8, 1.0, 1.0];
        for (x, y) in a.iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(c.levels, 6);
        assert_eq!(SolverConfig::new(RefinementMode::Uniform).levels, 5);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::new(RefinementMode::Uniform);
        assert!(c.validate().is_ok());
        c.levels = 0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(RefinementMode::Uniform);
        c.damping_start = 0.0;
        assert!(c.validate().is_err());
        assert_eq!("amr".parse::<RefinementMode>().unwrap(), RefinementMode::Amr);
        assert!("both".parse::<RefinementMode>().is_err());
    }

    #[test]
    fn linear_solver_backward_error() {
        let a = SparseMatrix::from_triplets(
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -3.0), (2, 2, 2.0), (1, 2, 0.5), (2, 1, 0.5)],
        );
        let x = LinearSolver::new().solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-13);
        }
        let singular = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(LinearSolver::new().solve(&singular, &[1.0, 0.0]).is_err());
    }

    fn decoupled() -> MaterialParams {
        MaterialParams {
            eps_a: 0.0,
            e_s: 0.0,
            e_b: 0.0,
            ..MaterialParams::default()
        }
    }

    #[test]
    fn trivial_start_needs_no_steps() {
        let config = SolverConfig::new(RefinementMode::Uniform);
        let s = State::lifted(Space::new(QuadMesh::uniform(4), trivial_problem()), |_, _| [0.0, 0.0, 1.0, 0.0]);
        let (_, stats) = newton_solve(s, &MaterialParams::default(), &config, 0.2).unwrap();
        assert!(stats.iterations <= 1);
        assert!(stats.residual < 1e-12);
    }

    #[test]
    fn linear_potential_problem_takes_one_full_step() {
        let config = SolverConfig::new(RefinementMode::Uniform);
        let (data, _) = manufactured_potential_problem();
        let s = State::lifted(Space::new(QuadMesh::uniform(4), data), |_, _| [0.0, 0.0, 1.0, 0.0]);
        let (_, stats) = newton_solve(s, &decoupled(), &config, 1.0).unwrap();
        assert_eq!(stats.iterations, 1);
        assert!(stats.residual < 1e-8);
    }

    #[test]
    fn half_steps_contract_geometrically() {
        let mut config = SolverConfig::new(RefinementMode::Uniform);
        let (data, _) = manufactured_potential_problem();
        let s = State::lifted(Space::new(QuadMesh::uniform(4), data), |_, _| [0.0, 0.0, 1.0, 0.0]);
        let r0 = l2_norm(&assemble_residual(&s, &decoupled(), &config.volume_rule()));
        config.tolerance = r0 * 0.5f64.powf(5.5);
        let (_, stats) = newton_solve(s, &decoupled(), &config, 0.5).unwrap();
        assert_eq!(stats.iterations, 6);
        for w in stats.residual_history.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-8, "{}", w[1] / w[0]);
        }
    }

    #[test]
    fn initial_guess_solves_the_potential_block() {
        let config = SolverConfig::new(RefinementMode::Uniform);
        let (data, _) = manufactured_potential_problem();
        let s = initial_guess(Space::new(QuadMesh::uniform(4), data), &MaterialParams::default(), &config).unwrap();
        let r = assemble_residual(&s, &decoupled(), &config.volume_rule());
        let phi: f64 = r.iter().skip(3).step_by(4).map(|v| v * v).sum::<f64>().sqrt();
        assert!(phi < 1e-10);
        for (i, v) in s.free_values().iter().enumerate() {
            if i % 4 < 3 {
                assert_eq!(*v, if i % 4 == 2 { 1.0 } else { 0.0 });
            }
        }
        let t = initial_guess(Space::new(QuadMesh::uniform(2), trivial_problem()), &MaterialParams::default(), &config).unwrap();
        assert!(t.free_values().chunks(4).all(|c| c == [0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn trivial_nested_iteration_single_level() {
        let mut config = SolverConfig::new(RefinementMode::Uniform);
        config.levels = 1;
        config.root = 4;
        let (state, report) = nested_iteration(&config, &MaterialParams::default(), &trivial_problem(), &NoClock).unwrap();
        assert_eq!(report.levels.len(), 1);
        assert!(state.free_values().chunks(4).all(|c| c == [0.0, 0.0, 1.0, 0.0]));
    }
}
