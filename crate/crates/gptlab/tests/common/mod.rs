//! Shared fixtures and randomized generators for the integration suites.

#![allow(dead_code)]

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::Rng;

use gptlab::channel::{measure_and_prepare, permutation_channel, Channel};
use gptlab::polygon::{polygon_theory, reflection_channel, rotation_channel, PolygonTheory};
use gptlab::space::{simplex, validate_observable, Observable, State, StateSpace};

/// A test space together with a way to draw reversible dynamics on it.
#[derive(Clone)]
pub enum Fixture {
    Simplex(usize),
    Polygon(usize),
}

impl Fixture {
    pub fn space(&self) -> Arc<StateSpace> {
        match self {
            Fixture::Simplex(n) => Arc::new(simplex(*n).unwrap()),
            Fixture::Polygon(m) => polygon_theory(*m).unwrap().space().clone(),
        }
    }

    pub fn polygon(&self) -> Option<PolygonTheory> {
        match self {
            Fixture::Polygon(m) => Some(polygon_theory(*m).unwrap()),
            Fixture::Simplex(_) => None,
        }
    }

    pub fn random_reversible(&self, rng: &mut StdRng) -> Channel {
        match self {
            Fixture::Simplex(n) => {
                let space = self.space();
                let mut perm: Vec<usize> = (0..*n).collect();
                for i in (1..*n).rev() {
                    perm.swap(i, rng.gen_range(0..=i));
                }
                permutation_channel(&space, &perm).unwrap()
            }
            Fixture::Polygon(m) => {
                let pt = polygon_theory(*m).unwrap();
                let k = rng.gen_range(0..*m);
                if rng.gen_bool(0.5) {
                    rotation_channel(&pt, k)
                } else {
                    reflection_channel(&pt, k)
                }
            }
        }
    }
}

/// Random mixed state: a positive mixture over all extreme points.
pub fn random_state(space: &StateSpace, rng: &mut StdRng) -> State {
    let weights: Vec<f64> = (0..space.num_extreme())
        .map(|_| -rng.gen_range(0.0f64..1.0).max(1e-12).ln())
        .collect();
    space.mix(&weights).unwrap()
}

/// Random two-outcome observable `{e, u - e}` with `e` a random mixture of
/// effect-polytope vertices.
pub fn random_two_outcome(space: &StateSpace, rng: &mut StdRng) -> Observable {
    let vertices = space.effect_polytope_vertices().unwrap();
    let weights: Vec<f64> = (0..vertices.len())
        .map(|_| -rng.gen_range(0.0f64..1.0).max(1e-12).ln())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut e = vec![0.0; space.dim()];
    for (w, v) in weights.iter().zip(vertices) {
        for (ei, vi) in e.iter_mut().zip(v) {
            *ei += w / total * vi;
        }
    }
    let complement: Vec<f64> = space
        .unit_effect()
        .iter()
        .zip(&e)
        .map(|(u, ei)| u - ei)
        .collect();
    validate_observable(space, vec![e, complement]).unwrap()
}

/// Random measure-and-prepare channel between two spaces.
pub fn random_mp_channel(
    source: &Arc<StateSpace>,
    target: &Arc<StateSpace>,
    rng: &mut StdRng,
) -> Channel {
    let obs = random_two_outcome(source, rng);
    let prepared = vec![random_state(target, rng), random_state(target, rng)];
    measure_and_prepare(&obs, &prepared, source, target).unwrap()
}

/// Random partition of `0..n` into between 2 and `max_blocks` nonempty blocks.
pub fn random_partition_blocks(n: usize, max_blocks: usize, rng: &mut StdRng) -> Vec<Vec<usize>> {
    assert!(n >= 2);
    loop {
        let k = rng.gen_range(2..=max_blocks.min(n));
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); k];
        for i in 0..n {
            blocks[rng.gen_range(0..k)].push(i);
        }
        if blocks.iter().all(|b| !b.is_empty()) {
            return blocks;
        }
    }
}
