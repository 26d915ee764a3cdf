//! Ready-made state spaces used across tests and the CLI.

use crate::lp::Tolerances;
use crate::space::{make_state_space, StateSpace};

/// Triangular prism: two equilateral-triangle layers at heights -1 and +1.
/// Vertices 0..2 are the bottom layer, 3..5 the matching top layer, so
/// `{0,1,2} | {3,4,5}` is the layer split and `{i, i+3}` are the vertical
/// edges.
pub fn triangular_prism() -> StateSpace {
    triangular_prism_with_tol(Tolerances::default())
}

pub fn triangular_prism_with_tol(tol: Tolerances) -> StateSpace {
    let mut points = Vec::new();
    for &z in &[-1.0, 1.0] {
        for i in 0..3 {
            let a = 2.0 * std::f64::consts::PI * i as f64 / 3.0;
            points.push(vec![a.cos(), a.sin(), z, 1.0]);
        }
    }
    make_state_space("prism", points, vec![0.0, 0.0, 0.0, 1.0], tol)
        .expect("prism coordinates are valid")
}
