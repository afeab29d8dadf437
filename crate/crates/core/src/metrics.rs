//! Solution-quality metrics and the run report.

use alloc::vec::Vec;

use crate::estimator::EstimatorResult;
use crate::fem::quadrature::QuadratureRule;
use crate::fem::state::{sample, State};
use crate::mesh::CellId;
use crate::physics::{div_displacement, free_energy, tabulate, Energy, MaterialParams};
use crate::solver::{LevelStats, RefinementMode, SolverConfig};

/// `max |n . n - 1|` over the volume quadrature points.
pub fn max_unit_length_deviation(state: &State, rule: &QuadratureRule) -> f64 {
    let shapes = tabulate(rule);
    let mesh = state.mesh();
    let mut worst: f64 = 0.0;
    for (c, cell) in mesh.cells().iter().enumerate() {
        let h = mesh.side_length(cell);
        let coeffs = state.cell_coefficients(c);
        for s in &shapes {
            let n = sample(&coeffs, s, h).director();
            worst = worst.max((n[0] * n[0] + n[1] * n[1] + n[2] * n[2] - 1.0).abs());
        }
    }
    worst
}

/// `sum_T int_T (div D)^2`, with `div D` from the chain rule through the
/// density Hessian.
pub fn gauss_conformance(state: &State, params: &MaterialParams, rule: &QuadratureRule) -> f64 {
    let shapes = tabulate(rule);
    let mesh = state.mesh();
    let mut total = 0.0;
    for (c, cell) in mesh.cells().iter().enumerate() {
        let h = mesh.side_length(cell);
        let coeffs = state.cell_coefficients(c);
        for (s, w) in shapes.iter().zip(&rule.weights) {
            let d = div_displacement(&sample(&coeffs, s, h), params);
            total += w * h * h * d * d;
        }
    }
    total
}

/// Work units: `sum_l k_l N_l / N_ref` with `k_l` linearizations and `N_l` DOFs
/// on level `l`.
pub fn work_units(levels: &[LevelStats], reference_dofs: usize) -> f64 {
    assert!(reference_dofs > 0, "reference DOF count must be positive");
    levels
        .iter()
        .map(|l| l.linearizations as f64 * l.dofs as f64)
        .sum::<f64>()
        / reference_dofs as f64
}

/// DOFs (all four fields, constrained ones included) of the uniform mesh after
/// `refinements` uniform refinements of a `root x root` grid.
pub fn uniform_dofs(root: u32, refinements: usize) -> usize {
    let n = root as usize * (1usize << refinements);
    4 * (2 * n + 1) * (2 * n + 1)
}

/// Reference DOF count for work units: the finest uniform mesh of a uniform
/// hierarchy with the configured level count. An adaptive run is paired with
/// the uniform hierarchy one level shorter, so both modes share a denominator.
pub fn reference_dofs(config: &SolverConfig) -> usize {
    if let Some(n) = config.reference_dofs {
        return n;
    }
    let levels = match config.mode {
        RefinementMode::Uniform => config.levels,
        RefinementMode::Amr => config.levels.saturating_sub(1).max(1),
    };
    uniform_dofs(config.root, levels - 1)
}

/// Per-cell estimator values on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEstimate {
    pub level: usize,
    pub global: f64,
    pub cells: Vec<CellIndicator>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellIndicator {
    pub cell: CellId,
    pub theta: f64,
    pub theta_full: f64,
    pub volume_p: f64,
    pub volume_q: f64,
    pub edge_p: f64,
    pub edge_q: f64,
}

impl LevelEstimate {
    pub fn new(level: usize, est: &EstimatorResult) -> Self {
        LevelEstimate {
            level,
            global: est.global,
            cells: est
                .cells
                .iter()
                .map(|c| CellIndicator {
                    cell: c.cell,
                    theta: c.theta(),
                    theta_full: c.theta_full(),
                    volume_p: c.volume_p,
                    volume_q: c.volume_q,
                    edge_p: c.edge_p,
                    edge_q: c.edge_q,
                })
                .collect(),
        }
    }
}

/// The final-state metrics of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalMetrics {
    pub max_unit_length_deviation: f64,
    pub gauss_conformance: f64,
    pub energy: Energy,
}

impl FinalMetrics {
    pub fn compute(state: &State, params: &MaterialParams, rule: &QuadratureRule) -> Self {
        FinalMetrics {
            max_unit_length_deviation: max_unit_length_deviation(state, rule),
            gauss_conformance: gauss_conformance(state, params, rule),
            energy: free_energy(state, params, rule),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub mode: RefinementMode,
    pub levels: Vec<LevelStats>,
    pub metrics: FinalMetrics,
    pub final_dofs: usize,
    pub reference_dofs: usize,
    pub work_units: f64,
    pub wall_time: f64,
    pub estimates: Vec<LevelEstimate>,
}

impl RunReport {
    pub fn new(
        config: &SolverConfig,
        params: &MaterialParams,
        state: &State,
        levels: Vec<LevelStats>,
        estimates: Vec<LevelEstimate>,
        wall_time: f64,
    ) -> Self {
        let reference = reference_dofs(config);
        RunReport {
            mode: config.mode,
            metrics: FinalMetrics::compute(state, params, &config.volume_rule()),
            final_dofs: state.dofs().num_dofs(),
            reference_dofs: reference,
            work_units: work_units(&levels, reference),
            wall_time,
            levels,
            estimates,
        }
    }
}
