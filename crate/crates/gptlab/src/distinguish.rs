//! Distinguishability primitives: the perfect-discrimination LP, exact
//! maximum pairwise-distinguishable families, and the construction of an
//! observable whose outcome statistics separate any finite set of states.

use thiserror::Error;

use crate::linalg::{dot, linf_distance, Matrix};
use crate::lp::{lp_solve, LpOutcome, LpProblem};
use crate::space::{validate_observable, Observable, SpaceError, State, StateSpace};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DistinguishError {
    #[error("need at least {needed} states, got {got}")]
    TooFewStates { needed: usize, got: usize },
    #[error("states {a} and {b} coincide")]
    DuplicateStates { a: usize, b: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Result of searching for a perfectly discriminating observable.
#[derive(Debug, Clone)]
pub enum DistinguishOutcome {
    /// An observable with `<e_x, w_y> = delta_xy` on the given states.
    Observable(Observable),
    /// The defining LP is infeasible: no such observable exists.
    NotDistinguishable,
}

impl DistinguishOutcome {
    pub fn observable(&self) -> Option<&Observable> {
        match self {
            DistinguishOutcome::Observable(o) => Some(o),
            DistinguishOutcome::NotDistinguishable => None,
        }
    }

    pub fn is_distinguishable(&self) -> bool {
        matches!(self, DistinguishOutcome::Observable(_))
    }
}

/// Searches for an observable `{e_x}` with `<e_x, w_y> = delta_xy` over the
/// given states, subject to every `e_x` being a valid effect. One LP.
pub fn find_distinguishing_observable(
    space: &StateSpace,
    states: &[State],
) -> Result<DistinguishOutcome, DistinguishError> {
    if states.len() < 2 {
        return Err(DistinguishError::TooFewStates {
            needed: 2,
            got: states.len(),
        });
    }
    let tol = space.tolerances();
    for a in 0..states.len() {
        for b in (a + 1)..states.len() {
            if linf_distance(states[a].coords(), states[b].coords()) <= tol.eps_eq() {
                return Err(DistinguishError::DuplicateStates { a, b });
            }
        }
    }
    let k = states.len();
    let d = space.dim();
    let verts = space.extreme_points();
    // Variables: effects e_0..e_{k-1}, flattened; all free.
    let mut p = LpProblem::feasibility(k * d);
    // <e_x, w_y> = delta_xy
    for x in 0..k {
        for y in 0..k {
            let mut row = vec![0.0; k * d];
            row[x * d..(x + 1) * d].copy_from_slice(states[y].coords());
            p.push_eq(row, if x == y { 1.0 } else { 0.0 });
        }
    }
    // sum_x e_x = u
    for c in 0..d {
        let mut row = vec![0.0; k * d];
        for x in 0..k {
            row[x * d + c] = 1.0;
        }
        p.push_eq(row, space.unit_effect()[c]);
    }
    // 0 <= <e_x, v_i> <= 1 on every extreme point
    for x in 0..k {
        for v in verts {
            let mut row = vec![0.0; k * d];
            row[x * d..(x + 1) * d].copy_from_slice(v);
            p.push_ge(row.clone(), 0.0);
            let mut row_hi = vec![0.0; k * d];
            row_hi[x * d..(x + 1) * d].copy_from_slice(v);
            p.push_le(row_hi, 1.0);
        }
    }
    match lp_solve(&p, tol).map_err(SpaceError::from)? {
        LpOutcome::Optimal { point, .. } => {
            let effects: Vec<Vec<f64>> =
                (0..k).map(|x| point[x * d..(x + 1) * d].to_vec()).collect();
            Ok(DistinguishOutcome::Observable(validate_observable(
                space, effects,
            )?))
        }
        LpOutcome::Infeasible => Ok(DistinguishOutcome::NotDistinguishable),
        LpOutcome::Unbounded => unreachable!("feasibility LP cannot be unbounded"),
    }
}

/// Two-state perfect distinguishability test.
pub fn pair_distinguishable(space: &StateSpace, a: &State, b: &State) -> bool {
    if linf_distance(a.coords(), b.coords()) <= space.tolerances().eps_eq() {
        return false;
    }
    matches!(
        find_distinguishing_observable(space, &[a.clone(), b.clone()]),
        Ok(DistinguishOutcome::Observable(_))
    )
}

/// Maximum-cardinality subset of `candidates` in which every pair is
/// perfectly distinguishable. Exact branch-and-bound clique search on the
/// pairwise-distinguishability graph; returns candidate indices.
pub fn max_pairwise_clique(space: &StateSpace, candidates: &[State]) -> Vec<usize> {
    let n = candidates.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = pair_distinguishable(space, &candidates[i], &candidates[j]);
            adj[i][j] = d;
            adj[j][i] = d;
        }
    }
    max_clique(&adj)
}

/// Exact maximum clique by branch and bound with a pivot, on a dense
/// adjacency matrix.
pub fn max_clique(adj: &[Vec<bool>]) -> Vec<usize> {
    let n = adj.len();
    let mut best: Vec<usize> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let all: Vec<usize> = (0..n).collect();
    expand(adj, &mut current, all, &mut best);
    best.sort_unstable();
    best
}

fn expand(
    adj: &[Vec<bool>],
    current: &mut Vec<usize>,
    mut candidates: Vec<usize>,
    best: &mut Vec<usize>,
) {
    while let Some(&v) = candidates.last() {
        if current.len() + candidates.len() <= best.len() {
            return;
        }
        candidates.pop();
        current.push(v);
        let next: Vec<usize> = candidates.iter().copied().filter(|&u| adj[v][u]).collect();
        if next.is_empty() {
            if current.len() > best.len() {
                *best = current.clone();
            }
        } else {
            expand(adj, current, next, best);
        }
        current.pop();
    }
}

/// Builds an observable whose outcome statistics are pairwise distinct on
/// the given target states:
/// extend a linearly independent subset of the targets to a state basis,
/// take the dual basis, aggregate the tail coordinates into the last slot,
/// shift by the worst vertex value times the unit, renormalize, and pad with
/// zero effects until there is one outcome per target.
pub fn informationally_complete_observable(
    space: &StateSpace,
    targets: &[State],
) -> Result<Observable, DistinguishError> {
    if targets.len() < 2 {
        return Err(DistinguishError::TooFewStates {
            needed: 2,
            got: targets.len(),
        });
    }
    let tol = space.tolerances();
    for a in 0..targets.len() {
        for b in (a + 1)..targets.len() {
            if linf_distance(targets[a].coords(), targets[b].coords()) <= tol.eps_eq() {
                return Err(DistinguishError::DuplicateStates { a, b });
            }
        }
    }
    let d = space.dim();
    // Greedy linearly independent subset of the targets.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for t in targets {
        let mut cand = basis.clone();
        cand.push(t.coords().to_vec());
        if Matrix::from_rows(cand.clone()).rank() == cand.len() {
            basis = cand;
        }
    }
    let m = basis.len();
    // Complete to a basis of the carrier using extreme points; the extreme
    // points span, so this always succeeds.
    for v in space.extreme_points() {
        if basis.len() == d {
            break;
        }
        let mut cand = basis.clone();
        cand.push(v.clone());
        if Matrix::from_rows(cand.clone()).rank() == cand.len() {
            basis = cand;
        }
    }
    debug_assert_eq!(basis.len(), d, "extreme points span the carrier");
    // Dual basis: rows of the inverse of the matrix whose columns are the
    // basis states.
    let p = Matrix::from_cols(&basis);
    let w = p
        .inverse()
        .expect("completed basis is invertible")
        .to_rows();
    // b_m = w_m for m < M-1; the last aggregates w_{M-1}..w_{d-1}.
    let mut b: Vec<Vec<f64>> = w[..m.saturating_sub(1)].to_vec();
    let mut tail = vec![0.0; d];
    for row in &w[(m - 1)..] {
        for (t, v) in tail.iter_mut().zip(row) {
            *t += v;
        }
    }
    b.push(tail);
    // Worst value over extreme points and outcomes; linearity puts the
    // infimum over the whole polytope at a vertex.
    let c = b
        .iter()
        .flat_map(|bm| space.extreme_points().iter().map(move |v| dot(bm, v)))
        .fold(f64::INFINITY, f64::min);
    let denom = 1.0 - m as f64 * c;
    debug_assert!(
        denom > tol.eps_feas(),
        "targets are distinct, so b is non-constant"
    );
    let mut effects: Vec<Vec<f64>> = b
        .iter()
        .map(|bm| {
            bm.iter()
                .zip(space.unit_effect())
                .map(|(v, u)| (v - c * u) / denom)
                .collect()
        })
        .collect();
    while effects.len() < targets.len() {
        effects.push(vec![0.0; d]);
    }
    let obs = validate_observable(space, effects)?;
    // The statistics separate the targets by construction; re-verify.
    for a in 0..targets.len() {
        for bidx in (a + 1)..targets.len() {
            let pa = obs.distribution(&targets[a]);
            let pb = obs.distribution(&targets[bidx]);
            debug_assert!(
                linf_distance(&pa, &pb) > tol.eps_feas(),
                "distinct targets produced equal statistics"
            );
        }
    }
    Ok(obs)
}
