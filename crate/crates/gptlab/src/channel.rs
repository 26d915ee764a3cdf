//! Channels: linear maps between carrier spaces validated to send states to
//! states, reversibility tests, measure-and-prepare constructions, and
//! extension by an identity factor.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{linf_distance, Matrix};
use crate::space::{Observable, SpaceError, State, StateSpace};
use crate::tensor::{min_tensor, TensorSpace};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ChannelError {
    #[error("matrix is {rows}x{cols}, expected {want_rows}x{want_cols}")]
    Shape {
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("unit effect not preserved on extreme point {vertex}: <u, image> = {value}")]
    UnitNotPreserved { vertex: usize, value: f64 },
    #[error("extreme point {vertex} is mapped outside the target state space")]
    MapsOutside { vertex: usize, image: Vec<f64> },
    #[error("channels do not compose: first targets `{target}`, second expects `{expects}`")]
    SpaceMismatch { target: String, expects: String },
    #[error("outcome count {outcomes} does not match prepared-state count {prepared}")]
    CountMismatch { outcomes: usize, prepared: usize },
    #[error("source and target must coincide for a reversibility test")]
    NotEndomorphism,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A validated channel between two state spaces.
#[derive(Debug, Clone)]
pub struct Channel {
    matrix: Matrix,
    source: Arc<StateSpace>,
    target: Arc<StateSpace>,
}

impl Channel {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn source(&self) -> &Arc<StateSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<StateSpace> {
        &self.target
    }

    pub fn apply(&self, state: &State) -> State {
        State::from_coords_unchecked(self.matrix.mul_vec(state.coords()))
    }

    pub fn apply_raw(&self, coords: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(coords)
    }

    /// The Heisenberg-picture action on effect vectors.
    pub fn dual_apply(&self, effect: &[f64]) -> Vec<f64> {
        self.matrix.transpose().mul_vec(effect)
    }

    /// Matrix equality against another channel within the comparison slack.
    pub fn same_action(&self, other: &Channel) -> bool {
        let eps = self.source.tolerances().eps_eq();
        self.matrix.rows() == other.matrix.rows()
            && self.matrix.cols() == other.matrix.cols()
            && (0..self.matrix.rows())
                .all(|i| linf_distance(self.matrix.row(i), other.matrix.row(i)) <= eps)
    }
}

/// Validates a matrix as a channel: every source extreme point must land in
/// the target state space with unit pairing 1.
pub fn make_channel(
    matrix: Matrix,
    source: &Arc<StateSpace>,
    target: &Arc<StateSpace>,
) -> Result<Channel, ChannelError> {
    if matrix.rows() != target.dim() || matrix.cols() != source.dim() {
        return Err(ChannelError::Shape {
            rows: matrix.rows(),
            cols: matrix.cols(),
            want_rows: target.dim(),
            want_cols: source.dim(),
        });
    }
    let eps = source.tolerances().eps_eq();
    for (vertex, p) in source.extreme_points().iter().enumerate() {
        let image = matrix.mul_vec(p);
        let mass = crate::linalg::dot(target.unit_effect(), &image);
        if (mass - 1.0).abs() > eps {
            return Err(ChannelError::UnitNotPreserved {
                vertex,
                value: mass,
            });
        }
        if !target.contains(&image) {
            return Err(ChannelError::MapsOutside { vertex, image });
        }
    }
    Ok(Channel {
        matrix,
        source: source.clone(),
        target: target.clone(),
    })
}

pub fn identity_channel(space: &Arc<StateSpace>) -> Channel {
    Channel {
        matrix: Matrix::identity(space.dim()),
        source: space.clone(),
        target: space.clone(),
    }
}

/// On a simplex space, the reversible channel permuting the pure states:
/// vertex `i` goes to vertex `perm[i]`.
pub fn permutation_channel(
    space: &Arc<StateSpace>,
    perm: &[usize],
) -> Result<Channel, ChannelError> {
    let n = space.dim();
    assert!(space.is_simplex(), "permutation channels live on simplices");
    assert_eq!(perm.len(), n);
    let mut m = Matrix::zeros(n, n);
    for (i, &pi) in perm.iter().enumerate() {
        m.set(pi, i, 1.0);
    }
    make_channel(m, space, space)
}

/// Apply `a` first, then `b`.
pub fn compose_channels(a: &Channel, b: &Channel) -> Result<Channel, ChannelError> {
    if !a.target.same_structure(&b.source) {
        return Err(ChannelError::SpaceMismatch {
            target: a.target.name().to_string(),
            expects: b.source.name().to_string(),
        });
    }
    make_channel(b.matrix.matmul(&a.matrix), &a.source, &b.target)
}

/// A channel is reversible when its matrix is invertible and the inverse is
/// again a channel; it then maps the state space onto itself.
pub fn is_reversible(c: &Channel) -> bool {
    if !c.source.same_structure(&c.target) {
        return false;
    }
    match c.matrix.inverse() {
        None => false,
        Some(inv) => make_channel(inv, &c.target, &c.source).is_ok(),
    }
}

pub fn inverse_channel(c: &Channel) -> Option<Channel> {
    let inv = c.matrix.inverse()?;
    make_channel(inv, &c.target, &c.source).ok()
}

/// Measure `obs` on the source, prepare `prepared[n]` on outcome `n`:
/// `L(w) = sum_n <A_n, w> xi_n`.
pub fn measure_and_prepare(
    obs: &Observable,
    prepared: &[State],
    source: &Arc<StateSpace>,
    target: &Arc<StateSpace>,
) -> Result<Channel, ChannelError> {
    if obs.len() != prepared.len() {
        return Err(ChannelError::CountMismatch {
            outcomes: obs.len(),
            prepared: prepared.len(),
        });
    }
    let mut m = Matrix::zeros(target.dim(), source.dim());
    for (effect, xi) in obs.effects().iter().zip(prepared) {
        for i in 0..target.dim() {
            for j in 0..source.dim() {
                let v = m.get(i, j) + xi.coords()[i] * effect.coords()[j];
                m.set(i, j, v);
            }
        }
    }
    make_channel(m, source, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Extends a channel by an identity factor under the Min rule. Returns the
/// composite tensor space together with the extended channel on it.
pub fn extend_with_identity(
    c: &Channel,
    ancilla: &Arc<StateSpace>,
    side: Side,
) -> Result<(TensorSpace, TensorSpace, Channel), ChannelError> {
    let id = Matrix::identity(ancilla.dim());
    let (src, tgt, matrix) = match side {
        Side::Right => (
            min_tensor(&c.source, ancilla)?,
            min_tensor(&c.target, ancilla)?,
            c.matrix.kron(&id),
        ),
        Side::Left => (
            min_tensor(ancilla, &c.source)?,
            min_tensor(ancilla, &c.target)?,
            id.kron(&c.matrix),
        ),
    };
    let ext = make_channel(matrix, src.space(), tgt.space())?;
    Ok((src, tgt, ext))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::space::{simplex, validate_observable};
    use crate::tensor::{marginal, product_state, Keep};

    fn arc(s: StateSpace) -> Arc<StateSpace> {
        Arc::new(s)
    }

    #[test]
    fn identity_and_permutations_are_reversible() {
        let s = arc(simplex(3).unwrap());
        assert!(is_reversible(&identity_channel(&s)));
        let c = permutation_channel(&s, &[1, 2, 0]).unwrap();
        assert!(is_reversible(&c));
        assert_eq!(c.apply(&s.extreme_state(0)).coords(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn coordinate_negation_rejected() {
        let s = arc(simplex(2).unwrap());
        let m = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        let err = make_channel(m, &s, &s).unwrap_err();
        assert!(matches!(
            err,
            ChannelError::UnitNotPreserved { vertex: 1, .. }
        ));
    }

    #[test]
    fn composition_inverts() {
        let s = arc(simplex(4).unwrap());
        let c = permutation_channel(&s, &[1, 2, 3, 0]).unwrap();
        let inv = inverse_channel(&c).unwrap();
        let id = compose_channels(&c, &inv).unwrap();
        assert!(id.same_action(&identity_channel(&s)));
        let two = compose_channels(&c, &c).unwrap();
        assert_eq!(two.apply(&s.extreme_state(0)).coords()[2], 1.0);
    }

    #[test]
    fn measure_and_prepare_bit_flip() {
        let s = arc(simplex(2).unwrap());
        let obs = validate_observable(&s, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let prepared = vec![s.extreme_state(1), s.extreme_state(0)];
        let c = measure_and_prepare(&obs, &prepared, &s, &s).unwrap();
        assert_eq!(c.apply(&s.extreme_state(0)).coords(), &[0.0, 1.0]);
        assert!(is_reversible(&c)); // the bit flip happens to be reversible
    }

    #[test]
    fn constant_channel_not_reversible() {
        let s = arc(simplex(2).unwrap());
        let obs = validate_observable(&s, vec![s.unit_effect().to_vec()]).unwrap();
        let c = measure_and_prepare(&obs, &[s.extreme_state(0)], &s, &s).unwrap();
        assert!(!is_reversible(&c));
        assert_eq!(c.apply(&s.extreme_state(1)).coords(), &[1.0, 0.0]);
    }

    #[test]
    fn measure_and_prepare_composes_with_reversible() {
        let s = arc(simplex(3).unwrap());
        let obs = validate_observable(&s, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let mp =
            measure_and_prepare(&obs, &[s.extreme_state(2), s.extreme_state(0)], &s, &s).unwrap();
        let rot = permutation_channel(&s, &[1, 2, 0]).unwrap();
        let both = compose_channels(&rot, &mp).unwrap();
        assert!(!is_reversible(&both));
    }

    #[test]
    fn square_measurement_prepares_a_bit() {
        let sq = crate::polygon::polygon_theory(4).unwrap();
        let bit = arc(simplex(2).unwrap());
        let e = sq.extreme_effects()[0].coords().to_vec();
        let complement: Vec<f64> = sq
            .space()
            .unit_effect()
            .iter()
            .zip(&e)
            .map(|(u, v)| u - v)
            .collect();
        let obs = validate_observable(sq.space(), vec![e, complement]).unwrap();
        let c = measure_and_prepare(
            &obs,
            &[bit.extreme_state(0), bit.extreme_state(1)],
            sq.space(),
            &bit,
        )
        .unwrap();
        // The effect takes value 1 on vertex 0, so that vertex maps to the
        // first prepared state.
        assert!(linf_distance(c.apply(&sq.space().extreme_state(0)).coords(), &[1.0, 0.0]) < 1e-9);
    }

    #[test]
    fn count_mismatch_rejected() {
        let s = arc(simplex(2).unwrap());
        let obs = validate_observable(&s, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let err = measure_and_prepare(&obs, &[s.extreme_state(0)], &s, &s).unwrap_err();
        assert!(matches!(err, ChannelError::CountMismatch { .. }));
    }

    #[test]
    fn identity_extension_is_identity() {
        let s = arc(simplex(2).unwrap());
        let anc = arc(simplex(2).unwrap());
        let (_, _, ext) = extend_with_identity(&identity_channel(&s), &anc, Side::Right).unwrap();
        assert!(is_reversible(&ext));
        for i in 0..4 {
            assert_eq!(ext.matrix().get(i, i), 1.0);
        }
    }

    #[test]
    fn extended_channel_acts_on_first_factor() {
        let s = arc(simplex(2).unwrap());
        let anc = arc(simplex(3).unwrap());
        let flip = permutation_channel(&s, &[1, 0]).unwrap();
        let (src, _, ext) = extend_with_identity(&flip, &anc, Side::Right).unwrap();
        let w = s.extreme_state(0);
        let xi = anc.mix(&[0.5, 0.25, 0.25]).unwrap();
        let mu = product_state(&w, &xi);
        let out = ext.apply(&mu);
        let got = marginal(&src, &out, Keep::First);
        // src is the composite before the flip; membership still holds since
        // the spaces coincide structurally.
        let got = got.unwrap();
        assert!((dot(got.coords(), &[1.0, 0.0]) - 0.0).abs() < 1e-9);
        assert!((dot(got.coords(), &[0.0, 1.0]) - 1.0).abs() < 1e-9);
        let keep = marginal(&src, &out, Keep::Second).unwrap();
        assert!(crate::linalg::linf_distance(keep.coords(), xi.coords()) < 1e-9);
    }
}
