//! Built-in boundary-value problems.

use alloc::string::String;
use alloc::sync::Arc;
use core::f64::consts::PI;
use core::fmt;


use crate::physics::MaterialParams;
#[allow(unused_imports)] // float methods come from std whenever it is linked
use num_traits::Float;

pub type DirectorFn = dyn Fn(f64, f64) -> [f64; 3] + Send + Sync;
pub type PotentialFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Dirichlet data for the director and the electric potential.
#[derive(Clone)]
pub struct BoundaryData {
    pub name: String,
    director: Arc<DirectorFn>,
    potential: Arc<PotentialFn>,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData").field("name", &self.name).finish_non_exhaustive()
    }
}

impl BoundaryData {
    pub fn new(
        name: impl Into<String>,
        director: impl Fn(f64, f64) -> [f64; 3] + Send + Sync + 'static,
        potential: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        BoundaryData {
            name: name.into(),
            director: Arc::new(director),
            potential: Arc::new(potential),
        }
    }

    pub fn director(&self, x: f64, y: f64) -> [f64; 3] {
        (self.director)(x, y)
    }

    pub fn potential(&self, x: f64, y: f64) -> f64 {
        (self.potential)(x, y)
    }
}

/// Director `(0, 0, 1)` and zero potential everywhere: an exact critical point.
pub fn trivial_problem() -> BoundaryData {
    BoundaryData::new("trivial", |_, _| [0.0, 0.0, 1.0], |_, _| 0.0)
}

pub const DEFAULT_PULSE_STEEPNESS: f64 = 50.0;
pub const DEFAULT_PULSE_AMPLITUDE: f64 = 1.5;

/// Smoothed square pulse on the middle third of the top edge.
pub fn pulse(x: f64, steepness: f64, amplitude: f64) -> f64 {
    0.5 * amplitude * ((steepness * (x - 1.0 / 3.0)).tanh() - (steepness * (x - 2.0 / 3.0)).tanh())
}

/// Director fixed to `(0, 0, 1)` on the whole boundary; potential zero except a
/// smoothed square pulse along `y = 1`.
pub fn paper_problem(steepness: f64, amplitude: f64) -> BoundaryData {
    assert!(steepness > 0.0, "pulse steepness must be positive");
    BoundaryData::new(
        "paper",
        |_, _| [0.0, 0.0, 1.0],
        move |x, y| {
            if y >= 1.0 - 1e-12 {
                pulse(x, steepness, amplitude)
            } else {
                0.0
            }
        },
    )
}

/// Harmonic potential `sin(pi x) sinh(pi y) / sinh(pi)` with a constant director.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManufacturedPotential;

impl ManufacturedPotential {
    pub fn phi(&self, x: f64, y: f64) -> f64 {
        (PI * x).sin() * (PI * y).sinh() / PI.sinh()
    }

    pub fn grad_phi(&self, x: f64, y: f64) -> [f64; 2] {
        let s = PI / PI.sinh();
        [s * (PI * x).cos() * (PI * y).sinh(), s * (PI * x).sin() * (PI * y).cosh()]
    }

    /// Material parameters with dielectric anisotropy and flexoelectricity
    /// switched off, which decouples the potential from the constant director.
    pub fn params(&self, base: MaterialParams) -> MaterialParams {
        MaterialParams {
            eps_a: 0.0,
            e_s: 0.0,
            e_b: 0.0,
            ..base
        }
    }
}

pub fn manufactured_potential_problem() -> (BoundaryData, ManufacturedPotential) {
    let exact = ManufacturedPotential;
    let data = BoundaryData::new("manufactured", |_, _| [0.0, 0.0, 1.0], move |x, y| exact.phi(x, y));
    (data, exact)
}

/// Looks up a built-in problem by name.
pub fn by_name(name: &str, steepness: f64, amplitude: f64) -> Option<BoundaryData> {
    match name {
        "trivial" => Some(trivial_problem()),
        "paper" => Some(paper_problem(steepness, amplitude)),
        "manufactured" => Some(manufactured_potential_problem().0),
        _ => None,
    }
}
