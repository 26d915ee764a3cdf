//! State spaces, states, effects and observables.
//!
//! A state space is a polytope given by its extreme points together with the
//! unit effect; effects live in the same carrier space and pair with states by
//! the Euclidean dot product. The no-restriction hypothesis is hard-wired: the
//! effect polytope is exactly `{e : 0 <= <e, w_i> <= 1 for every extreme w_i}`.

use std::ops::Range;
use std::sync::OnceLock;

use thiserror::Error;

use crate::linalg::{binomial, dot, for_each_combination, linf_distance, Matrix};
use crate::lp::{lp_solve, LpProblem, Tolerances};

/// Effect-polytope vertex enumeration is only offered up to this carrier
/// dimension; the subset count explodes beyond it.
pub const EFFECT_VERTEX_MAX_DIM: usize = 6;

/// Budget on the number of candidate subsets visited while enumerating
/// extreme rays of the effect cone.
pub const RAY_ENUMERATION_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpaceError {
    #[error("a state space needs at least one extreme point")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unit effect evaluates to {value} on point {index}, expected 1")]
    UnitNotNormalized { index: usize, value: f64 },
    #[error("extreme points span only {rank} of {dim} carrier dimensions")]
    RankDeficient { rank: usize, dim: usize },
    #[error("points {offenders:?} lie in the convex hull of the remaining points")]
    RedundantPoints { offenders: Vec<usize> },
    #[error("direct sum needs at least two summands")]
    TooFewSummands,
    #[error("simplex size must be at least 1")]
    EmptySimplex,
    #[error("vector is not a state of `{space}`: {reason}")]
    NotAState { space: String, reason: String },
    #[error("effect {index} takes value {value} outside [0,1] on extreme point {vertex}")]
    EffectOutOfRange {
        index: usize,
        vertex: usize,
        value: f64,
    },
    #[error("effects sum to distance {gap:e} from the unit effect (allowed {allowed:e})")]
    NotNormalizedObservable { gap: f64, allowed: f64 },
    #[error("observable needs at least one effect")]
    EmptyObservable,
    #[error(
        "effect polytope vertex enumeration is unsupported beyond dimension {max}: \
         `{space}` has dimension {dim}"
    )]
    EffectEnumerationUnsupported {
        space: String,
        dim: usize,
        max: usize,
    },
    #[error(
        "effect cone ray enumeration for `{space}` needs {needed} candidate subsets, \
         over the budget of {budget}"
    )]
    RayEnumerationTooLarge {
        space: String,
        needed: usize,
        budget: usize,
    },
    #[error("internal LP failure: {0}")]
    Lp(#[from] crate::lp::LpError),
}

/// A compact convex state polytope with its unit effect.
#[derive(Debug)]
pub struct StateSpace {
    name: String,
    dim: usize,
    extreme: Vec<Vec<f64>>,
    unit: Vec<f64>,
    tol: Tolerances,
    /// Recorded block structure when the space was built as a direct sum.
    sum_blocks: Option<Vec<SumBlock>>,
    effect_vertices: OnceLock<Result<Vec<Vec<f64>>, SpaceError>>,
    cone_rays: OnceLock<Result<Vec<Vec<f64>>, SpaceError>>,
}

/// One summand of a direct sum: which extreme points and carrier coordinates
/// belong to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumBlock {
    pub vertices: Range<usize>,
    pub coords: Range<usize>,
}

/// A point of the state polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    coords: Vec<f64>,
}

impl State {
    /// Validates membership before wrapping.
    pub fn new(space: &StateSpace, coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.len() != space.dim {
            return Err(SpaceError::Dimension {
                expected: space.dim,
                got: coords.len(),
            });
        }
        if !space.contains(&coords) {
            return Err(SpaceError::NotAState {
                space: space.name.clone(),
                reason: "not a convex combination of the extreme points".into(),
            });
        }
        Ok(State { coords })
    }

    pub(crate) fn from_coords_unchecked(coords: Vec<f64>) -> Self {
        State { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// A linear functional with values in [0,1] on the state polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    coords: Vec<f64>,
}

impl Effect {
    pub fn new(space: &StateSpace, coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.len() != space.dim {
            return Err(SpaceError::Dimension {
                expected: space.dim,
                got: coords.len(),
            });
        }
        for (vertex, w) in space.extreme.iter().enumerate() {
            let v = dot(&coords, w);
            if v < -space.tol.eps_eq() || v > 1.0 + space.tol.eps_eq() {
                return Err(SpaceError::EffectOutOfRange {
                    index: 0,
                    vertex,
                    value: v,
                });
            }
        }
        Ok(Effect { coords })
    }

    pub(crate) fn from_coords_unchecked(coords: Vec<f64>) -> Self {
        Effect { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Outcome probability on a state.
    pub fn apply(&self, state: &State) -> f64 {
        dot(&self.coords, state.coords())
    }

    pub fn apply_raw(&self, coords: &[f64]) -> f64 {
        dot(&self.coords, coords)
    }
}

/// A finite family of effects summing to the unit effect.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    effects: Vec<Effect>,
    labels: Vec<String>,
}

impl Observable {
    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// Outcome distribution on a state.
    pub fn distribution(&self, state: &State) -> Vec<f64> {
        self.effects.iter().map(|e| e.apply(state)).collect()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.effects.len());
        self.labels = labels;
        self
    }
}

impl StateSpace {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extreme_points(&self) -> &[Vec<f64>] {
        &self.extreme
    }

    pub fn num_extreme(&self) -> usize {
        self.extreme.len()
    }

    pub fn extreme_state(&self, i: usize) -> State {
        State::from_coords_unchecked(self.extreme[i].clone())
    }

    pub fn unit_effect(&self) -> &[f64] {
        &self.unit
    }

    pub fn unit(&self) -> Effect {
        Effect::from_coords_unchecked(self.unit.clone())
    }

    pub fn zero_effect(&self) -> Effect {
        Effect::from_coords_unchecked(vec![0.0; self.dim])
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// The extreme points are linearly independent exactly for simplices
    /// (they span by construction, so count == dimension decides).
    pub fn is_simplex(&self) -> bool {
        self.extreme.len() == self.dim
    }

    pub fn sum_blocks(&self) -> Option<&[SumBlock]> {
        self.sum_blocks.as_deref()
    }

    /// Uniform mixture of all extreme points.
    pub fn barycenter(&self) -> State {
        let n = self.extreme.len() as f64;
        let mut c = vec![0.0; self.dim];
        for p in &self.extreme {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi / n;
            }
        }
        State::from_coords_unchecked(c)
    }

    /// Convex mixture of extreme points with the given weights.
    pub fn mix(&self, weights: &[f64]) -> Result<State, SpaceError> {
        if weights.len() != self.extreme.len() {
            return Err(SpaceError::Dimension {
                expected: self.extreme.len(),
                got: weights.len(),
            });
        }
        let total: f64 = weights.iter().sum();
        let mut c = vec![0.0; self.dim];
        for (w, p) in weights.iter().zip(&self.extreme) {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += w / total * pi;
            }
        }
        Ok(State::from_coords_unchecked(c))
    }

    /// LP membership in the convex hull of the extreme points.
    pub fn contains(&self, v: &[f64]) -> bool {
        if v.len() != self.dim {
            return false;
        }
        if (dot(&self.unit, v) - 1.0).abs() > self.tol.eps_eq() {
            return false;
        }
        membership_lp(&self.extreme, v, &self.tol)
    }

    /// Barycentric coordinates on a simplex space.
    pub fn barycentric(&self, v: &[f64]) -> Option<Vec<f64>> {
        if !self.is_simplex() {
            return None;
        }
        Matrix::from_cols(&self.extreme).solve(v)
    }

    /// Vertices of the effect polytope `{e : 0 <= <e,w_i> <= 1}`, including
    /// the zero and unit effects. Cached.
    pub fn effect_polytope_vertices(&self) -> Result<&[Vec<f64>], SpaceError> {
        self.effect_vertices
            .get_or_init(|| enumerate_effect_vertices(self))
            .as_ref()
            .map(Vec::as_slice)
            .map_err(Clone::clone)
    }

    /// Generators of the extreme rays of the effect cone `{e : <e,w_i> >= 0}`,
    /// scaled so each attains maximum value 1 on the state polytope. Cached.
    pub fn effect_cone_rays(&self) -> Result<&[Vec<f64>], SpaceError> {
        self.cone_rays
            .get_or_init(|| enumerate_cone_rays(self))
            .as_ref()
            .map(Vec::as_slice)
            .map_err(Clone::clone)
    }

    /// Structural equality up to tolerance; used to match channel endpoints.
    pub fn same_structure(&self, other: &StateSpace) -> bool {
        self.dim == other.dim
            && self.extreme.len() == other.extreme.len()
            && linf_distance(&self.unit, &other.unit) <= self.tol.eps_eq()
            && self
                .extreme
                .iter()
                .zip(&other.extreme)
                .all(|(a, b)| linf_distance(a, b) <= self.tol.eps_eq())
    }
}

fn membership_lp(points: &[Vec<f64>], v: &[f64], tol: &Tolerances) -> bool {
    let n = points.len();
    let d = v.len();
    let mut p = LpProblem::feasibility(n).nonnegative();
    for row in 0..d {
        p.push_eq(points.iter().map(|pt| pt[row]).collect(), v[row]);
    }
    p.push_eq(vec![1.0; n], 1.0);
    matches!(lp_solve(&p, tol), Ok(out) if out.is_feasible())
}

/// Validated state-space constructor. Rejects redundant (non-extreme) points
/// with a diagnostic listing the offenders.
pub fn make_state_space(
    name: impl Into<String>,
    points: Vec<Vec<f64>>,
    unit: Vec<f64>,
    tol: Tolerances,
) -> Result<StateSpace, SpaceError> {
    let name = name.into();
    if points.is_empty() {
        return Err(SpaceError::Empty);
    }
    let dim = unit.len();
    for p in &points {
        if p.len() != dim {
            return Err(SpaceError::Dimension {
                expected: dim,
                got: p.len(),
            });
        }
    }
    for (index, p) in points.iter().enumerate() {
        let value = dot(&unit, p);
        if (value - 1.0).abs() > tol.eps_eq() {
            return Err(SpaceError::UnitNotNormalized { index, value });
        }
    }
    let rank = Matrix::from_rows(points.clone()).rank();
    if rank < dim {
        return Err(SpaceError::RankDeficient { rank, dim });
    }
    let mut offenders = Vec::new();
    for i in 0..points.len() {
        let others: Vec<Vec<f64>> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p.clone())
            .collect();
        if membership_lp(&others, &points[i], &tol) {
            offenders.push(i);
        }
    }
    if !offenders.is_empty() {
        return Err(SpaceError::RedundantPoints { offenders });
    }
    Ok(StateSpace {
        name,
        dim,
        extreme: points,
        unit,
        tol,
        sum_blocks: None,
        effect_vertices: OnceLock::new(),
        cone_rays: OnceLock::new(),
    })
}

/// The classical state space with `n` pure states: standard basis of R^n,
/// all-ones unit effect.
pub fn simplex(n: usize) -> Result<StateSpace, SpaceError> {
    simplex_with_tol(n, Tolerances::default())
}

pub fn simplex_with_tol(n: usize, tol: Tolerances) -> Result<StateSpace, SpaceError> {
    if n == 0 {
        return Err(SpaceError::EmptySimplex);
    }
    let points = (0..n)
        .map(|i| {
            let mut p = vec![0.0; n];
            p[i] = 1.0;
            p
        })
        .collect();
    make_state_space(format!("simplex-{n}"), points, vec![1.0; n], tol)
}

/// Direct sum of state spaces: block-diagonal carrier, embedded extreme
/// points, concatenated unit effects. The block partition is recorded.
pub fn direct_sum(spaces: &[&StateSpace]) -> Result<StateSpace, SpaceError> {
    if spaces.len() < 2 {
        return Err(SpaceError::TooFewSummands);
    }
    let tol = *spaces[0].tolerances();
    let dim: usize = spaces.iter().map(|s| s.dim()).sum();
    let mut points = Vec::new();
    let mut unit = Vec::new();
    let mut blocks = Vec::new();
    let mut coord_off = 0usize;
    let mut vert_off = 0usize;
    for s in spaces {
        for p in s.extreme_points() {
            let mut q = vec![0.0; dim];
            q[coord_off..coord_off + s.dim()].copy_from_slice(p);
            points.push(q);
        }
        unit.extend_from_slice(s.unit_effect());
        blocks.push(SumBlock {
            vertices: vert_off..vert_off + s.num_extreme(),
            coords: coord_off..coord_off + s.dim(),
        });
        coord_off += s.dim();
        vert_off += s.num_extreme();
    }
    let name = spaces
        .iter()
        .map(|s| s.name().to_string())
        .collect::<Vec<_>>()
        .join("(+)");
    let mut space = make_state_space(name, points, unit, tol)?;
    space.sum_blocks = Some(blocks);
    Ok(space)
}

/// LP membership in `conv(extreme points)` with unit normalization.
pub fn contains_state(space: &StateSpace, v: &[f64]) -> bool {
    space.contains(v)
}

/// Validates a family of effect vectors as an observable on the space.
pub fn validate_observable(
    space: &StateSpace,
    effects: Vec<Vec<f64>>,
) -> Result<Observable, SpaceError> {
    if effects.is_empty() {
        return Err(SpaceError::EmptyObservable);
    }
    let tol = space.tolerances();
    for e in &effects {
        if e.len() != space.dim() {
            return Err(SpaceError::Dimension {
                expected: space.dim(),
                got: e.len(),
            });
        }
    }
    for (index, e) in effects.iter().enumerate() {
        for (vertex, w) in space.extreme_points().iter().enumerate() {
            let value = dot(e, w);
            if value < -tol.eps_eq() || value > 1.0 + tol.eps_eq() {
                return Err(SpaceError::EffectOutOfRange {
                    index,
                    vertex,
                    value,
                });
            }
        }
    }
    let mut sum = vec![0.0; space.dim()];
    for e in &effects {
        for (si, ei) in sum.iter_mut().zip(e) {
            *si += ei;
        }
    }
    // The sum condition is checked on the extreme points: the vertices span
    // the carrier, so agreement there is agreement everywhere.
    let gap = space
        .extreme_points()
        .iter()
        .map(|w| (dot(&sum, w) - 1.0).abs())
        .fold(0.0, f64::max);
    // Allow modest accumulation over many outcomes.
    let allowed = tol.eps_feas() * (effects.len() as f64 + 4.0) * 25.0;
    if gap > allowed.max(tol.eps_eq()) {
        return Err(SpaceError::NotNormalizedObservable {
            gap,
            allowed: allowed.max(tol.eps_eq()),
        });
    }
    let labels = (0..effects.len()).map(|i| i.to_string()).collect();
    Ok(Observable {
        effects: effects
            .into_iter()
            .map(Effect::from_coords_unchecked)
            .collect(),
        labels,
    })
}

fn enumerate_effect_vertices(space: &StateSpace) -> Result<Vec<Vec<f64>>, SpaceError> {
    let d = space.dim();
    if d > EFFECT_VERTEX_MAX_DIM {
        return Err(SpaceError::EffectEnumerationUnsupported {
            space: space.name().to_string(),
            dim: d,
            max: EFFECT_VERTEX_MAX_DIM,
        });
    }
    let pts = space.extreme_points();
    let n = pts.len();
    // Constraint rows: <e, w_i> >= 0 and <e, w_i> <= 1; a vertex makes d of
    // them tight and independent.
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let tol = space.tolerances();
    for_each_combination(2 * n, d, |combo| {
        let rows: Vec<Vec<f64>> = combo.iter().map(|&c| pts[c % n].clone()).collect();
        let rhs: Vec<f64> = combo
            .iter()
            .map(|&c| if c < n { 0.0 } else { 1.0 })
            .collect();
        let m = Matrix::from_rows(rows);
        if let Some(e) = m.solve(&rhs) {
            let feasible = pts.iter().all(|w| {
                let v = dot(&e, w);
                (-tol.eps_feas()..=1.0 + tol.eps_feas()).contains(&v)
            });
            if feasible
                && !vertices
                    .iter()
                    .any(|u| linf_distance(u, &e) <= tol.eps_eq())
            {
                vertices.push(e);
            }
        }
    });
    Ok(vertices)
}

fn enumerate_cone_rays(space: &StateSpace) -> Result<Vec<Vec<f64>>, SpaceError> {
    let d = space.dim();
    let pts = space.extreme_points();
    let n = pts.len();
    if d == 1 {
        // Cone over a single normalized direction.
        return Ok(vec![space.unit_effect().to_vec()]);
    }
    let needed = binomial(n, d - 1);
    if needed > RAY_ENUMERATION_BUDGET {
        return Err(SpaceError::RayEnumerationTooLarge {
            space: space.name().to_string(),
            needed,
            budget: RAY_ENUMERATION_BUDGET,
        });
    }
    let tol = space.tolerances();
    let mut rays: Vec<Vec<f64>> = Vec::new();
    for_each_combination(n, d - 1, |combo| {
        let m = Matrix::from_rows(combo.iter().map(|&i| pts[i].clone()).collect());
        let ns = m.nullspace();
        if ns.len() != 1 {
            return;
        }
        let mut g = ns.into_iter().next().unwrap();
        let values: Vec<f64> = pts.iter().map(|w| dot(&g, w)).collect();
        let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        // Orient into the cone; skip directions that change sign.
        let flip = if min >= -tol.eps_feas() * (1.0 + max.abs()) {
            1.0
        } else if max <= tol.eps_feas() * (1.0 + min.abs()) {
            -1.0
        } else {
            return;
        };
        let peak = if flip > 0.0 { max } else { -min };
        if peak <= tol.eps_feas() {
            return;
        }
        for v in g.iter_mut() {
            *v *= flip / peak;
        }
        if !rays.iter().any(|u| linf_distance(u, &g) <= tol.eps_eq()) {
            rays.push(g);
        }
    });
    Ok(rays)
}
