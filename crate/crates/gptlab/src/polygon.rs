//! Regular polygon theories and the approximate-programming game on a
//! classical target system.
//!
//! The M-gon state space lives in R^3 with vertices
//! `w_i = (r^2 cos(2 pi i / M), r^2 sin(2 pi i / M), 1)`, `r^2 = 1/cos(pi/M)`,
//! unit effect `(0,0,1)`. The nontrivial extremal effects are the familiar
//! half-plane effects, with an even/odd case split.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::channel::{make_channel, Channel, ChannelError};
use crate::linalg::{dot, linf_distance, Matrix};
use crate::lp::{lp_solve, LpOutcome, LpProblem, Tolerances};
use crate::space::{
    make_state_space, validate_observable, Effect, Observable, SpaceError, State, StateSpace,
};
use crate::tensor::min_tensor;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PolygonError {
    #[error("a polygon theory needs at least 3 sides, got {0}")]
    TooFewSides(usize),
    #[error("the game needs system size >= sides (got N={system}, M={sides})")]
    SystemTooSmall { system: usize, sides: usize },
    #[error("state count {states} does not match outcome count {outcomes}")]
    CountMismatch { states: usize, outcomes: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// The regular polygon theory with M sides.
#[derive(Debug, Clone)]
pub struct PolygonTheory {
    sides: usize,
    space: Arc<StateSpace>,
    extreme_effects: Vec<Effect>,
    r_squared: f64,
}

impl PolygonTheory {
    pub fn sides(&self) -> usize {
        self.sides
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    /// The nontrivial extremal effects: for even M the list `e_0..e_{M-1}`
    /// (closed under complement), for odd M the `e_i` followed by the `u - e_i`.
    pub fn extreme_effects(&self) -> &[Effect] {
        &self.extreme_effects
    }

    pub fn r_squared(&self) -> f64 {
        self.r_squared
    }

    pub fn is_even(&self) -> bool {
        self.sides % 2 == 0
    }

    pub fn vertex(&self, i: usize) -> State {
        self.space.extreme_state(i % self.sides)
    }
}

pub fn polygon_theory(sides: usize) -> Result<PolygonTheory, PolygonError> {
    polygon_theory_with_tol(sides, Tolerances::default())
}

pub fn polygon_theory_with_tol(
    sides: usize,
    tol: Tolerances,
) -> Result<PolygonTheory, PolygonError> {
    if sides < 3 {
        return Err(PolygonError::TooFewSides(sides));
    }
    let m = sides;
    let r2 = 1.0 / (PI / m as f64).cos();
    let vertices: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / m as f64;
            vec![r2 * a.cos(), r2 * a.sin(), 1.0]
        })
        .collect();
    let space = Arc::new(make_state_space(
        format!("polygon-{m}"),
        vertices,
        vec![0.0, 0.0, 1.0],
        tol,
    )?);
    let mut effects = Vec::new();
    if m % 2 == 0 {
        for j in 0..m {
            let a = (2 * j + 1) as f64 * PI / m as f64;
            effects.push(vec![0.5 * a.cos(), 0.5 * a.sin(), 0.5]);
        }
    } else {
        let c = 1.0 / (1.0 + r2);
        for j in 0..m {
            let a = 2.0 * PI * j as f64 / m as f64;
            effects.push(vec![c * a.cos(), c * a.sin(), c]);
        }
        for j in 0..m {
            let a = 2.0 * PI * j as f64 / m as f64;
            effects.push(vec![-c * a.cos(), -c * a.sin(), 1.0 - c]);
        }
    }
    let extreme_effects = effects
        .into_iter()
        .map(|e| Effect::new(&space, e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolygonTheory {
        sides: m,
        space,
        extreme_effects,
        r_squared: r2,
    })
}

/// Conjugate states and the uniform weight making all mixtures
/// `p w_i + (1-p) t_i` coincide.
#[derive(Debug, Clone)]
pub struct HelstromFamily {
    pub conjugates: Vec<State>,
    pub weight: f64,
}

/// A weak Helstrom family for the polygon vertices: for even M the opposite
/// vertices with weight 1/2, for odd M the far-edge midpoints with the weight
/// pinned by the coincidence condition, `1/(1+r^2)`.
pub fn helstrom_family(pt: &PolygonTheory) -> HelstromFamily {
    let m = pt.sides();
    let sp = pt.space();
    let (conjugates, weight): (Vec<State>, f64) = if pt.is_even() {
        ((0..m).map(|j| pt.vertex(j + m / 2)).collect(), 0.5)
    } else {
        let w = 1.0 / (1.0 + pt.r_squared());
        let t = (0..m)
            .map(|j| {
                let a = sp.extreme_points()[(j + (m - 1) / 2) % m].clone();
                let b = &sp.extreme_points()[(j + (m + 1) / 2) % m];
                State::from_coords_unchecked(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
            })
            .collect();
        (t, w)
    };
    let eps = sp.tolerances().eps_eq();
    assert!(weight >= 1.0 / m as f64 - eps, "weight below 1/M");
    let mixture = |j: usize| -> Vec<f64> {
        sp.extreme_points()[j]
            .iter()
            .zip(conjugates[j].coords())
            .map(|(w_c, t_c)| weight * w_c + (1.0 - weight) * t_c)
            .collect()
    };
    let first = mixture(0);
    for j in 1..m {
        assert!(
            linf_distance(&mixture(j), &first) <= eps,
            "conjugate mixtures must coincide"
        );
    }
    HelstromFamily { conjugates, weight }
}

/// The discrimination bound certified by a weak Helstrom family.
pub fn helstrom_bound(pt: &PolygonTheory, family: &HelstromFamily) -> f64 {
    1.0 / (pt.sides() as f64 * family.weight)
}

/// The explicit optimal observable: `A_j = (2/M) e` (even) or
/// `A_j = ((1+r^2)/M) e` (odd), with the effect chosen so `<A_j, w_j> = 1`
/// scaled down, and `<A_j, t_j> = 0` on the Helstrom conjugates.
pub fn polygon_optimal_observable(pt: &PolygonTheory) -> Observable {
    let m = pt.sides();
    let effects: Vec<Vec<f64>> = if pt.is_even() {
        (0..m)
            .map(|j| {
                // e with value 1 on vertices j-1 and j.
                let e = pt.extreme_effects()[(j + m - 1) % m].coords();
                e.iter().map(|v| 2.0 / m as f64 * v).collect()
            })
            .collect()
    } else {
        let coeff = (1.0 + pt.r_squared()) / m as f64;
        (0..m)
            .map(|j| {
                pt.extreme_effects()[j]
                    .coords()
                    .iter()
                    .map(|v| coeff * v)
                    .collect()
            })
            .collect()
    };
    let obs = validate_observable(pt.space(), effects).expect("closed-form observable is valid");
    let family = helstrom_family(pt);
    let eps = pt.space().tolerances().eps_eq();
    for (j, t) in family.conjugates.iter().enumerate() {
        debug_assert!(
            obs.effects()[j].apply(t).abs() <= eps,
            "optimal effect must vanish on its conjugate"
        );
    }
    obs
}

/// Uniform-prior discrimination success probability of guessing state `i`
/// when outcome `i` fires.
pub fn success_probability(states: &[State], obs: &Observable) -> Result<f64, PolygonError> {
    if states.len() != obs.len() {
        return Err(PolygonError::CountMismatch {
            states: states.len(),
            outcomes: obs.len(),
        });
    }
    let k = states.len() as f64;
    Ok(states
        .iter()
        .zip(obs.effects())
        .map(|(w, e)| e.apply(w))
        .sum::<f64>()
        / k)
}

/// LP over M-outcome observables maximizing the discrimination success of the
/// polygon vertices under a uniform prior.
pub fn max_success_lp(pt: &PolygonTheory) -> Result<(f64, Observable), PolygonError> {
    let states: Vec<State> = (0..pt.sides()).map(|i| pt.vertex(i)).collect();
    max_discrimination_lp(pt.space(), &states)
}

/// LP optimum of uniform-prior minimum-error discrimination for an arbitrary
/// family of states: maximize `(1/k) sum_i <A_i, w_i>` over observables.
pub fn max_discrimination_lp(
    sp: &StateSpace,
    states: &[State],
) -> Result<(f64, Observable), PolygonError> {
    let m = states.len();
    let d = sp.dim();
    let verts = sp.extreme_points();
    let mut objective = vec![0.0; m * d];
    for (i, w) in states.iter().enumerate() {
        objective[i * d..(i + 1) * d]
            .iter_mut()
            .zip(w.coords())
            .for_each(|(o, wc)| *o = wc / m as f64);
    }
    let mut p = LpProblem::maximize(objective);
    for c in 0..d {
        let mut row = vec![0.0; m * d];
        for i in 0..m {
            row[i * d + c] = 1.0;
        }
        p.push_eq(row, sp.unit_effect()[c]);
    }
    for i in 0..m {
        for w in verts {
            let mut row = vec![0.0; m * d];
            row[i * d..(i + 1) * d].copy_from_slice(w);
            p.push_ge(row, 0.0);
        }
    }
    match lp_solve(&p, sp.tolerances()).map_err(SpaceError::from)? {
        LpOutcome::Optimal { value, point } => {
            let effects = (0..m).map(|i| point[i * d..(i + 1) * d].to_vec()).collect();
            Ok((value, validate_observable(sp, effects)?))
        }
        other => unreachable!("the optimum exists: feasible ({:?}) and value <= 1", other),
    }
}

/// Closed-form optimum: `2/M` for even M, `(1+r^2)/M` for odd M.
pub fn closed_form_optimum(pt: &PolygonTheory) -> f64 {
    if pt.is_even() {
        2.0 / pt.sides() as f64
    } else {
        (1.0 + pt.r_squared()) / pt.sides() as f64
    }
}

/// Success probability of programming M dynamics with a single classical bit.
pub fn classical_bit_baseline(sides: usize) -> f64 {
    2.0 / sides as f64
}

/// Rotation by `2 pi k / M` about the polygon axis; a reversible dynamics.
pub fn rotation_channel(pt: &PolygonTheory, k: usize) -> Channel {
    let a = 2.0 * PI * k as f64 / pt.sides() as f64;
    dihedral(pt, a.cos(), a.sin(), false)
}

/// Reflection across the line at angle `pi k / M`; a reversible dynamics.
pub fn reflection_channel(pt: &PolygonTheory, k: usize) -> Channel {
    let two_phi = 2.0 * PI * k as f64 / pt.sides() as f64;
    dihedral(pt, two_phi.cos(), two_phi.sin(), true)
}

fn dihedral(pt: &PolygonTheory, c: f64, s: f64, reflect: bool) -> Channel {
    let mut m = Matrix::identity(3);
    m.set(0, 0, c);
    m.set(0, 1, if reflect { s } else { -s });
    m.set(1, 0, s);
    m.set(1, 1, if reflect { -c } else { c });
    make_channel(m, pt.space(), pt.space()).expect("dihedral maps permute the vertices")
}

/// Outcome of the M-dynamics programming game on a classical N-level system
/// with the M-gon as apparatus.
#[derive(Debug, Clone)]
pub struct GameReport {
    pub sides: usize,
    pub system: usize,
    /// Cyclic shift permutations, one per dynamics; entry `[i][n]` is where
    /// level `n` goes under dynamics `i`.
    pub permutations: Vec<Vec<usize>>,
    /// Success probability read off the realized total channel.
    pub achieved: f64,
    pub lp_value: f64,
    pub closed_form: f64,
    pub baseline: f64,
    pub observable: Observable,
    pub lp_matches_closed: bool,
    pub channel_matches_lp: bool,
    pub beats_baseline: bool,
}

impl GameReport {
    pub fn passed(&self) -> bool {
        self.lp_matches_closed && self.channel_matches_lp && self.beats_baseline
    }
}

/// Plays the game: Alice draws one of M cyclic-shift dynamics on a classical
/// N-level system, Bob programs with polygon vertices through the channel
/// realizing the LP-optimal observable, and the realized success probability
/// is read back from the channel itself.
pub fn run_game(system: usize, sides: usize) -> Result<GameReport, PolygonError> {
    if system < sides {
        return Err(PolygonError::SystemTooSmall { system, sides });
    }
    let pt = polygon_theory(sides)?;
    let sys = Arc::new(crate::space::simplex(system)?);
    let (m, n) = (sides, system);
    let perms: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..n).map(|nn| (nn + i) % n).collect())
        .collect();
    let (lp_value, observable) = max_success_lp(&pt)?;
    let composite = min_tensor(&sys, pt.space())?;
    let d = pt.space().dim();

    // Per-level observables: dynamics i claims slot perms[i][nn]; unclaimed
    // slots keep the zero effect. Re-prepared states are w_{k mod M}.
    let mut theta = Matrix::zeros(n * d, n * d);
    for nn in 0..n {
        for (i, perm) in perms.iter().enumerate() {
            let k = perm[nn];
            let effect = observable.effects()[i].coords();
            let xi = pt.space().extreme_points()[k % m].clone();
            for r in 0..d {
                for c in 0..d {
                    let v = theta.get(k * d + r, nn * d + c) + xi[r] * effect[c];
                    theta.set(k * d + r, nn * d + c, v);
                }
            }
        }
    }
    let total = make_channel(theta, composite.space(), composite.space())?;

    // Evaluate the game functional directly on the realized channel blocks.
    let u_app = pt.space().unit_effect();
    let mut achieved = 0.0;
    for (i, perm) in perms.iter().enumerate() {
        for nn in 0..n {
            let k = perm[nn];
            // <u_app, Theta_k^nn (w_i)>
            let mut block = Matrix::zeros(d, d);
            for r in 0..d {
                for c in 0..d {
                    block.set(r, c, total.matrix().get(k * d + r, nn * d + c));
                }
            }
            achieved += dot(u_app, &block.mul_vec(&pt.space().extreme_points()[i % m]));
        }
    }
    achieved /= (m * n) as f64;

    let closed_form = closed_form_optimum(&pt);
    let baseline = classical_bit_baseline(m);
    let eps = pt.space().tolerances().eps_eq();
    Ok(GameReport {
        sides: m,
        system: n,
        permutations: perms,
        achieved,
        lp_value,
        closed_form,
        baseline,
        observable,
        lp_matches_closed: (lp_value - closed_form).abs() <= 1e-7,
        channel_matches_lp: (achieved - lp_value).abs() <= eps,
        beats_baseline: lp_value >= baseline - eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::is_reversible;

    #[test]
    fn triangle_coordinates() {
        let pt = polygon_theory(3).unwrap();
        assert!((pt.r_squared() - 2.0).abs() < 1e-12);
        assert!(linf_distance(&pt.space().extreme_points()[0], &[2.0, 0.0, 1.0]) < 1e-12);
    }

    #[test]
    fn square_coordinates() {
        let pt = polygon_theory(4).unwrap();
        assert!((pt.r_squared() - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(
            linf_distance(
                &pt.space().extreme_points()[0],
                &[std::f64::consts::SQRT_2, 0.0, 1.0]
            ) < 1e-12
        );
    }

    #[test]
    fn pentagon_radius() {
        let pt = polygon_theory(5).unwrap();
        assert!((pt.r_squared() - 1.2360680).abs() < 1e-6);
        assert!(polygon_theory(2).is_err());
    }

    #[test]
    fn even_effects_hit_one_on_two_adjacent_vertices() {
        let pt = polygon_theory(6).unwrap();
        for (j, e) in pt.extreme_effects().iter().enumerate() {
            let ones: Vec<usize> = (0..6)
                .filter(|&k| (e.apply(&pt.vertex(k)) - 1.0).abs() < 1e-9)
                .collect();
            let mut want = vec![j % 6, (j + 1) % 6];
            want.sort_unstable();
            assert_eq!(ones, want);
        }
    }

    #[test]
    fn odd_effects_peak_on_their_vertex() {
        let pt = polygon_theory(5).unwrap();
        for j in 0..5 {
            assert!((pt.extreme_effects()[j].apply(&pt.vertex(j)) - 1.0).abs() < 1e-9);
        }
        // complements live in the second half of the list
        for j in 0..5 {
            assert!(pt.extreme_effects()[5 + j].apply(&pt.vertex(j)).abs() < 1e-9);
        }
    }

    #[test]
    fn scaled_even_effects_form_an_observable() {
        let pt = polygon_theory(4).unwrap();
        let effects: Vec<Vec<f64>> = pt
            .extreme_effects()
            .iter()
            .map(|e| e.coords().iter().map(|v| 0.5 * v).collect())
            .collect();
        assert!(validate_observable(pt.space(), effects).is_ok());
    }

    #[test]
    fn helstrom_weights() {
        let sq = polygon_theory(4).unwrap();
        let f = helstrom_family(&sq);
        assert!((f.weight - 0.5).abs() < 1e-12);
        assert!(linf_distance(f.conjugates[0].coords(), &sq.space().extreme_points()[2]) < 1e-12);

        let tri = polygon_theory(3).unwrap();
        let f = helstrom_family(&tri);
        assert!((f.weight - 1.0 / 3.0).abs() < 1e-12);

        let pent = polygon_theory(5).unwrap();
        let f = helstrom_family(&pent);
        assert!((f.weight - 1.0 / (1.0 + pent.r_squared())).abs() < 1e-12);
        assert!((helstrom_bound(&pent, &f) - closed_form_optimum(&pent)).abs() < 1e-9);
    }

    #[test]
    fn optimal_observable_annihilates_conjugates() {
        for m in 3..=8 {
            let pt = polygon_theory(m).unwrap();
            let obs = polygon_optimal_observable(&pt);
            let fam = helstrom_family(&pt);
            for (j, t) in fam.conjugates.iter().enumerate() {
                assert!(obs.effects()[j].apply(t).abs() < 1e-9, "M={m}, j={j}");
            }
        }
    }

    #[test]
    fn success_probability_cases() {
        let s = crate::space::simplex(2).unwrap();
        let obs = validate_observable(&s, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let states = vec![s.extreme_state(0), s.extreme_state(1)];
        assert!((success_probability(&states, &obs).unwrap() - 1.0).abs() < 1e-12);

        let sq = polygon_theory(4).unwrap();
        let states: Vec<State> = (0..4).map(|i| sq.vertex(i)).collect();
        let opt = polygon_optimal_observable(&sq);
        assert!((success_probability(&states, &opt).unwrap() - 0.5).abs() < 1e-9);
        let trivial = validate_observable(
            sq.space(),
            vec![
                sq.space().unit_effect().to_vec(),
                vec![0.0; 3],
                vec![0.0; 3],
                vec![0.0; 3],
            ],
        )
        .unwrap();
        assert!((success_probability(&states, &trivial).unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn lp_reproduces_printed_values() {
        let (v3, _) = max_success_lp(&polygon_theory(3).unwrap()).unwrap();
        assert!((v3 - 1.0).abs() < 1e-9);
        let (v4, _) = max_success_lp(&polygon_theory(4).unwrap()).unwrap();
        assert!((v4 - 0.5).abs() < 1e-9);
        let (v5, _) = max_success_lp(&polygon_theory(5).unwrap()).unwrap();
        assert!((v5 - 0.4472136).abs() < 1e-7);
    }

    #[test]
    fn dihedral_maps_are_reversible() {
        let pt = polygon_theory(5).unwrap();
        for k in 0..5 {
            assert!(is_reversible(&rotation_channel(&pt, k)));
            assert!(is_reversible(&reflection_channel(&pt, k)));
        }
    }

    #[test]
    fn game_small_cases() {
        let g = run_game(6, 3).unwrap();
        assert!(g.passed(), "{g:?}");
        assert!((g.achieved - 1.0).abs() < 1e-7);
        assert!((g.baseline - 2.0 / 3.0).abs() < 1e-12);

        let g = run_game(8, 4).unwrap();
        assert!(g.passed());
        assert!((g.achieved - 0.5).abs() < 1e-7);

        let g = run_game(10, 5).unwrap();
        assert!(g.passed());
        assert!((g.achieved - 0.4472136).abs() < 1e-6);
        assert!(g.achieved > g.baseline);

        assert!(run_game(3, 4).is_err());
    }
}
