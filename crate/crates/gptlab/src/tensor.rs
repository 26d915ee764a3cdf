//! Bipartite composites: the minimal tensor product with materialized product
//! extreme points, the maximal tensor product as a membership test, and
//! partial traces.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{dot, kron_vec, Matrix};
use crate::space::{make_state_space, SpaceError, State, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRule {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TensorError {
    #[error("vector has dimension {got}, carrier wants {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("state is not a member of the composite")]
    NotAMember,
    #[error("contraction is not a valid factor state; the input was not a composite state")]
    InvalidMarginal,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A bipartite state space with a composition rule.
///
/// Under the Min rule the product polytope is materialized as a full
/// `StateSpace` (its extreme points are exactly the pairwise products of the
/// factor extreme points). Under the Max rule membership is decided against
/// products of extreme factor effects.
#[derive(Debug, Clone)]
pub struct TensorSpace {
    left: Arc<StateSpace>,
    right: Arc<StateSpace>,
    rule: TensorRule,
    space: Option<Arc<StateSpace>>,
}

impl TensorSpace {
    pub fn left(&self) -> &Arc<StateSpace> {
        &self.left
    }

    pub fn right(&self) -> &Arc<StateSpace> {
        &self.right
    }

    pub fn rule(&self) -> TensorRule {
        self.rule
    }

    /// The materialized product polytope (Min rule only).
    pub fn space(&self) -> &Arc<StateSpace> {
        self.space
            .as_ref()
            .expect("only the Min rule materializes a state space")
    }

    pub fn carrier_dim(&self) -> usize {
        self.left.dim() * self.right.dim()
    }

    pub fn contains(&self, mu: &[f64]) -> Result<bool, TensorError> {
        if mu.len() != self.carrier_dim() {
            return Err(TensorError::Dimension {
                expected: self.carrier_dim(),
                got: mu.len(),
            });
        }
        match self.rule {
            TensorRule::Min => Ok(self.space().contains(mu)),
            TensorRule::Max => max_tensor_contains(&self.left, &self.right, mu),
        }
    }
}

/// The minimal tensor product: convex hull of the product extreme points.
pub fn min_tensor(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> Result<TensorSpace, SpaceError> {
    let mut points = Vec::with_capacity(a.num_extreme() * b.num_extreme());
    for p in a.extreme_points() {
        for q in b.extreme_points() {
            points.push(kron_vec(p, q));
        }
    }
    let unit = kron_vec(a.unit_effect(), b.unit_effect());
    let name = format!("{}(x){}", a.name(), b.name());
    let space = make_state_space(name, points, unit, *a.tolerances())?;
    Ok(TensorSpace {
        left: a.clone(),
        right: b.clone(),
        rule: TensorRule::Min,
        space: Some(Arc::new(space)),
    })
}

/// The maximal tensor product, carried as a membership test only.
pub fn max_tensor(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> TensorSpace {
    TensorSpace {
        left: a.clone(),
        right: b.clone(),
        rule: TensorRule::Max,
        space: None,
    }
}

/// Membership in the maximal tensor product: unit normalization plus
/// nonnegativity against every pair of extreme factor effects. The bilinear
/// form attains its minimum on vertex pairs of the factor effect polytopes,
/// so checking those suffices.
pub fn max_tensor_contains(
    a: &StateSpace,
    b: &StateSpace,
    mu: &[f64],
) -> Result<bool, TensorError> {
    let d = a.dim() * b.dim();
    if mu.len() != d {
        return Err(TensorError::Dimension {
            expected: d,
            got: mu.len(),
        });
    }
    let tol = a.tolerances();
    let unit = kron_vec(a.unit_effect(), b.unit_effect());
    if (dot(&unit, mu) - 1.0).abs() > tol.eps_eq() {
        return Ok(false);
    }
    let av = a.effect_polytope_vertices()?;
    let bv = b.effect_polytope_vertices()?;
    for e in av {
        for f in bv {
            if dot(&kron_vec(e, f), mu) < -tol.eps_feas() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The product state `w (x) xi`.
pub fn product_state(omega: &State, xi: &State) -> State {
    State::from_coords_unchecked(kron_vec(omega.coords(), xi.coords()))
}

/// Partial trace of a composite state onto one factor, computed by
/// contracting the other tensor slot with its unit effect.
pub fn marginal(ts: &TensorSpace, mu: &State, keep: Keep) -> Result<State, TensorError> {
    if !ts.contains(mu.coords())? {
        return Err(TensorError::NotAMember);
    }
    marginal_unchecked(ts.left(), ts.right(), mu.coords(), keep)
}

/// Contraction without the composite membership check; callers that already
/// know `mu` is a composite state use this directly.
pub fn marginal_unchecked(
    left: &StateSpace,
    right: &StateSpace,
    mu: &[f64],
    keep: Keep,
) -> Result<State, TensorError> {
    let (dl, dr) = (left.dim(), right.dim());
    if mu.len() != dl * dr {
        return Err(TensorError::Dimension {
            expected: dl * dr,
            got: mu.len(),
        });
    }
    let mat = Matrix::from_rows((0..dl).map(|i| mu[i * dr..(i + 1) * dr].to_vec()).collect());
    let (coords, factor) = match keep {
        Keep::First => (mat.mul_vec(right.unit_effect()), left),
        Keep::Second => (mat.transpose().mul_vec(left.unit_effect()), right),
    };
    if !factor.contains(&coords) {
        return Err(TensorError::InvalidMarginal);
    }
    Ok(State::from_coords_unchecked(coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::simplex;

    fn arc(s: crate::space::StateSpace) -> Arc<StateSpace> {
        Arc::new(s)
    }

    #[test]
    fn simplex_times_simplex_is_simplex() {
        let a = arc(simplex(2).unwrap());
        let b = arc(simplex(3).unwrap());
        let ts = min_tensor(&a, &b).unwrap();
        assert_eq!(ts.space().num_extreme(), 6);
        assert!(ts.space().is_simplex());
    }

    #[test]
    fn product_counts() {
        let a = arc(simplex(3).unwrap());
        let sq = crate::polygon::polygon_theory(4).unwrap().space().clone();
        let ts = min_tensor(&a, &sq).unwrap();
        assert_eq!(ts.space().num_extreme(), 12);
        assert_eq!(ts.space().dim(), 9);
    }

    #[test]
    fn min_members_pass_max_test() {
        let a = arc(simplex(2).unwrap());
        let b = arc(simplex(2).unwrap());
        let ts = min_tensor(&a, &b).unwrap();
        for p in ts.space().extreme_points() {
            assert!(max_tensor_contains(&a, &b, p).unwrap());
        }
        assert!(max_tensor_contains(&a, &b, ts.space().barycenter().coords()).unwrap());
    }

    #[test]
    fn normalization_gates_max_membership() {
        let a = arc(simplex(2).unwrap());
        let b = arc(simplex(2).unwrap());
        let ts = min_tensor(&a, &b).unwrap();
        let bad: Vec<f64> = ts
            .space()
            .barycenter()
            .coords()
            .iter()
            .map(|v| 0.9 * v)
            .collect();
        assert!(!max_tensor_contains(&a, &b, &bad).unwrap());
    }

    #[test]
    fn square_times_square_has_sixteen_extremes() {
        let sq = crate::polygon::polygon_theory(4).unwrap().space().clone();
        let ts = min_tensor(&sq, &sq).unwrap();
        assert_eq!(ts.space().num_extreme(), 16);
    }

    #[test]
    fn max_test_refuses_large_factors() {
        let a = arc(simplex(7).unwrap());
        let b = arc(simplex(2).unwrap());
        // A normalized candidate, so the check reaches vertex enumeration.
        let mu = kron_vec(a.barycenter().coords(), b.barycenter().coords());
        let err = max_tensor_contains(&a, &b, &mu).unwrap_err();
        assert!(matches!(
            err,
            TensorError::Space(SpaceError::EffectEnumerationUnsupported { .. })
        ));
    }

    #[test]
    fn marginals_of_products_and_mixtures() {
        let a = arc(simplex(2).unwrap());
        let b = arc(simplex(3).unwrap());
        let ts = min_tensor(&a, &b).unwrap();
        let w = a.mix(&[0.3, 0.7]).unwrap();
        let xi = b.mix(&[0.2, 0.5, 0.3]).unwrap();
        let mu = product_state(&w, &xi);
        let mw = marginal(&ts, &mu, Keep::First).unwrap();
        let mxi = marginal(&ts, &mu, Keep::Second).unwrap();
        assert!(crate::linalg::linf_distance(mw.coords(), w.coords()) < 1e-9);
        assert!(crate::linalg::linf_distance(mxi.coords(), xi.coords()) < 1e-9);

        // Linearity: marginal of an equal mixture is the mixture of marginals.
        let w2 = a.extreme_state(0);
        let xi2 = b.extreme_state(1);
        let mix: Vec<f64> = mu
            .coords()
            .iter()
            .zip(product_state(&w2, &xi2).coords())
            .map(|(x, y)| 0.5 * x + 0.5 * y)
            .collect();
        let mixed = State::new(ts.space(), mix).unwrap();
        let got = marginal(&ts, &mixed, Keep::First).unwrap();
        let want: Vec<f64> = w
            .coords()
            .iter()
            .zip(w2.coords())
            .map(|(x, y)| 0.5 * x + 0.5 * y)
            .collect();
        assert!(crate::linalg::linf_distance(got.coords(), &want) < 1e-9);
    }
}
