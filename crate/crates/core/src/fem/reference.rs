//! Biquadratic Lagrange element on the reference square `[0, 1]^2`.
//!
//! Local node `a = 3 * j + i` sits at `(i / 2, j / 2)`, so corners are 0, 2, 6, 8,
//! edge midpoints 1, 3, 5, 7 and the center 4.

/// 1D quadratic Lagrange basis on `[0, 1]` with nodes 0, 1/2, 1.
pub fn lagrange(t: f64) -> [f64; 3] {
    [
        2.0 * (t - 0.5) * (t - 1.0),
        4.0 * t * (1.0 - t),
        2.0 * t * (t - 0.5),
    ]
}

pub fn lagrange_d1(t: f64) -> [f64; 3] {
    [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0]
}

pub const LAGRANGE_D2: [f64; 3] = [4.0, -8.0, 4.0];

pub const NODES: usize = 9;

/// Shape functions and their reference derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeValues {
    pub value: [f64; NODES],
    pub grad: [[f64; 2]; NODES],
    pub hess: [[[f64; 2]; 2]; NODES],
}

pub fn node_position(a: usize) -> [f64; 2] {
    [(a % 3) as f64 * 0.5, (a / 3) as f64 * 0.5]
}

pub fn shape(xi: f64, eta: f64) -> ShapeValues {
    let (lx, ly) = (lagrange(xi), lagrange(eta));
    let (dx, dy) = (lagrange_d1(xi), lagrange_d1(eta));
    let d2 = LAGRANGE_D2;
    let mut s = ShapeValues {
        value: [0.0; NODES],
        grad: [[0.0; 2]; NODES],
        hess: [[[0.0; 2]; 2]; NODES],
    };
    for j in 0..3 {
        for i in 0..3 {
            let a = 3 * j + i;
            s.value[a] = lx[i] * ly[j];
            s.grad[a] = [dx[i] * ly[j], lx[i] * dy[j]];
            let mixed = dx[i] * dy[j];
            s.hess[a] = [[d2[i] * ly[j], mixed], [mixed, lx[i] * d2[j]]];
        }
    }
    s
}
