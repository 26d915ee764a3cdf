//! Fidelity between states of a polytopic theory.
//!
//! `F(w, s) = inf over observables of sum_x sqrt(<e_x, w> <e_x, s>)`.
//!
//! The map `e -> sqrt(<e,w><e,s>)` is concave and positively homogeneous, so
//! splitting any effect into a conic combination of extreme rays of the
//! effect cone never increases the sum. The infimum is therefore the value of
//! the linear program
//!
//! `min sum_r c_r sqrt(<f_r,w><f_r,s>)  s.t.  sum_r c_r f_r = u,  c >= 0`
//!
//! over the finitely many extreme rays `f_r`, and the witnessing basic
//! solution uses at most `dim` rays with linearly solved weights. Zero
//! detection is never left to the minimizer: it is decided exactly by the
//! perfect-distinguishability LP.

use thiserror::Error;

use crate::distinguish::{find_distinguishing_observable, DistinguishError, DistinguishOutcome};
use crate::linalg::linf_distance;
use crate::lp::{lp_solve, LpOutcome, LpProblem};
use crate::space::{validate_observable, Observable, SpaceError, State, StateSpace};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FidelityError {
    #[error("state is not a member of `{0}`")]
    InvalidState(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Fidelity value together with the minimizing observable found.
#[derive(Debug, Clone)]
pub struct FidelityResult {
    pub value: f64,
    pub witness_observable: Observable,
    /// Set when the perfect-distinguishability LP certifies `F = 0`.
    pub certified_zero: bool,
    /// Exact LP minimum over extreme-ray observables; when ray enumeration is
    /// out of budget the value is only an upper bound and this is false.
    pub exact: bool,
}

/// Exact zero test: `F(w,s) = 0` iff the pair is perfectly distinguishable.
pub fn fidelity_is_zero(space: &StateSpace, a: &State, b: &State) -> bool {
    if linf_distance(a.coords(), b.coords()) <= space.tolerances().eps_eq() {
        return false;
    }
    matches!(
        find_distinguishing_observable(space, &[a.clone(), b.clone()]),
        Ok(DistinguishOutcome::Observable(_))
    )
}

/// Fidelity between two states of the space.
pub fn fidelity(space: &StateSpace, a: &State, b: &State) -> Result<FidelityResult, FidelityError> {
    let tol = space.tolerances();
    if !space.contains(a.coords()) || !space.contains(b.coords()) {
        return Err(FidelityError::InvalidState(space.name().to_string()));
    }
    if linf_distance(a.coords(), b.coords()) <= tol.eps_feas() {
        return Ok(FidelityResult {
            value: 1.0,
            witness_observable: unit_observable(space)?,
            certified_zero: false,
            exact: true,
        });
    }
    // Exact zero certificate first.
    if let Ok(DistinguishOutcome::Observable(obs)) =
        find_distinguishing_observable(space, &[a.clone(), b.clone()])
    {
        return Ok(FidelityResult {
            value: 0.0,
            witness_observable: obs,
            certified_zero: true,
            exact: true,
        });
    }
    if space.is_simplex() {
        return simplex_fidelity(space, a, b);
    }
    match space.effect_cone_rays() {
        Ok(rays) => ray_lp_fidelity(space, a, b, rays),
        Err(SpaceError::RayEnumerationTooLarge { .. }) => upper_bound_fidelity(space, a, b),
        Err(e) => Err(e.into()),
    }
}

fn unit_observable(space: &StateSpace) -> Result<Observable, SpaceError> {
    validate_observable(space, vec![space.unit_effect().to_vec()])
}

/// On a simplex the barycentric coordinates are the unique classical
/// distribution and the fidelity is the Bhattacharyya coefficient; the
/// fine-grained dual-basis observable attains it.
fn simplex_fidelity(
    space: &StateSpace,
    a: &State,
    b: &State,
) -> Result<FidelityResult, FidelityError> {
    let p = space
        .barycentric(a.coords())
        .expect("simplex has barycentric coordinates");
    let q = space.barycentric(b.coords()).expect("simplex");
    let value: f64 = p
        .iter()
        .zip(&q)
        .map(|(x, y)| (x.max(0.0) * y.max(0.0)).sqrt())
        .sum();
    let dual = crate::linalg::Matrix::from_cols(space.extreme_points())
        .inverse()
        .expect("simplex extreme points form a basis")
        .to_rows();
    Ok(FidelityResult {
        value: value.clamp(0.0, 1.0),
        witness_observable: validate_observable(space, dual)?,
        certified_zero: false,
        exact: true,
    })
}

fn ray_lp_fidelity(
    space: &StateSpace,
    a: &State,
    b: &State,
    rays: &[Vec<f64>],
) -> Result<FidelityResult, FidelityError> {
    let tol = space.tolerances();
    let d = space.dim();
    let costs: Vec<f64> = rays
        .iter()
        .map(|f| {
            let pa = crate::linalg::dot(f, a.coords()).max(0.0);
            let pb = crate::linalg::dot(f, b.coords()).max(0.0);
            (pa * pb).sqrt()
        })
        .collect();
    let mut lp = LpProblem::minimize(costs).nonnegative();
    for c in 0..d {
        lp.push_eq(rays.iter().map(|f| f[c]).collect(), space.unit_effect()[c]);
    }
    match lp_solve(&lp, tol).map_err(SpaceError::from)? {
        LpOutcome::Optimal { value, point } => {
            let effects: Vec<Vec<f64>> = point
                .iter()
                .zip(rays)
                .filter(|(c, _)| **c > tol.eps_feas())
                .map(|(c, f)| f.iter().map(|v| c * v).collect())
                .collect();
            let witness_observable = validate_observable(space, effects)?;
            Ok(FidelityResult {
                value: value.clamp(0.0, 1.0),
                witness_observable,
                certified_zero: false,
                exact: true,
            })
        }
        other => unreachable!("the unit effect is in the cone of rays: {other:?}"),
    }
}

/// Out-of-budget fallback: any observable upper-bounds the infimum; the
/// two-target informationally complete observable is a cheap, honest choice.
fn upper_bound_fidelity(
    space: &StateSpace,
    a: &State,
    b: &State,
) -> Result<FidelityResult, FidelityError> {
    let obs =
        crate::distinguish::informationally_complete_observable(space, &[a.clone(), b.clone()])
            .map_err(|e| match e {
                DistinguishError::Space(s) => FidelityError::Space(s),
                _ => FidelityError::InvalidState(space.name().to_string()),
            })?;
    let pa = obs.distribution(a);
    let pb = obs.distribution(b);
    let value: f64 = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x.max(0.0) * y.max(0.0)).sqrt())
        .sum();
    Ok(FidelityResult {
        value: value.min(1.0),
        witness_observable: obs,
        certified_zero: false,
        exact: false,
    })
}
