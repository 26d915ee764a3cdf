//! Equivalence decomposition of pure states and quasi-classical structures.
//!
//! Two pure states are related when a chain of nonzero-fidelity pairs links
//! them; the equivalence classes are the connected components of the
//! indistinguishability graph. A partition of the pure states is
//! quasi-classical when some observable takes value exactly 1 on its own
//! block and 0 on the others; this is equivalent to
//! uniqueness of block weights in convex decompositions, and both sides are
//! decided here by independent LPs.

use std::sync::Arc;

use thiserror::Error;

use crate::distinguish::pair_distinguishable;
use crate::linalg::dot;
use crate::lp::{lp_solve, LpOutcome, LpProblem};
use crate::space::{validate_observable, Observable, SpaceError, StateSpace};

/// Hard cap on the number of equivalence classes fed to the partition
/// enumerator; the partition count grows like a Bell number.
pub const DEFAULT_CLASS_CAP: usize = 12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StructureError {
    #[error("blocks must disjointly cover the {expected} extreme points")]
    NotAPartition { expected: usize },
    #[error("a quasi-classical decomposition needs at least 2 blocks, got {0}")]
    TooFewBlocks(usize),
    #[error("{classes} equivalence classes exceed the enumeration cap {cap}")]
    ClassLimit { classes: usize, cap: usize },
    #[error("max_degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A disjoint covering family of extreme-point index blocks.
#[derive(Debug, Clone)]
pub struct Partition {
    space: Arc<StateSpace>,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(space: Arc<StateSpace>, blocks: Vec<Vec<usize>>) -> Result<Self, StructureError> {
        let n = space.num_extreme();
        let mut seen = vec![false; n];
        let mut covered = 0usize;
        for block in &blocks {
            if block.is_empty() {
                return Err(StructureError::NotAPartition { expected: n });
            }
            for &i in block {
                if i >= n || seen[i] {
                    return Err(StructureError::NotAPartition { expected: n });
                }
                seen[i] = true;
                covered += 1;
            }
        }
        if covered != n || blocks.is_empty() {
            return Err(StructureError::NotAPartition { expected: n });
        }
        let mut blocks = blocks;
        for b in &mut blocks {
            b.sort_unstable();
        }
        Ok(Partition { space, blocks })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn degree(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, vertex: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(&vertex))
            .expect("partition covers every vertex")
    }

    /// Same block family regardless of ordering.
    pub fn same_blocks(&self, other: &Partition) -> bool {
        if self.blocks.len() != other.blocks.len() {
            return false;
        }
        self.blocks.iter().all(|b| other.blocks.contains(b))
    }
}

/// A partition together with its quasi-classical witness observable.
#[derive(Debug, Clone)]
pub struct QuasiClassicalStructure {
    pub partition: Partition,
    pub witness: Observable,
}

impl QuasiClassicalStructure {
    pub fn degree(&self) -> usize {
        self.partition.degree()
    }
}

/// Connected components of the graph on extreme points whose edges join
/// pairs that are *not* perfectly distinguishable.
pub fn equivalence_decomposition(space: &Arc<StateSpace>) -> Partition {
    let n = space.num_extreme();
    let mut class = (0..n).collect::<Vec<usize>>();
    fn find(class: &mut Vec<usize>, i: usize) -> usize {
        if class[i] != i {
            let root = find(class, class[i]);
            class[i] = root;
        }
        class[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !pair_distinguishable(space, &space.extreme_state(i), &space.extreme_state(j)) {
                let (ri, rj) = (find(&mut class, i), find(&mut class, j));
                if ri != rj {
                    class[ri] = rj;
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_to_block: std::collections::HashMap<usize, usize> = Default::default();
    for i in 0..n {
        let r = find(&mut class, i);
        let b = *root_to_block.entry(r).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].push(i);
    }
    Partition::new(space.clone(), blocks).expect("components form a partition")
}

/// Searches for a quasi-classical observable witnessing the partition: per
/// block an LP for an effect with value 1 on the block and 0 elsewhere (the
/// values on extreme points pin effect-hood), last effect taken as the unit
/// complement and the whole family revalidated.
pub fn quasiclassical_witness(partition: &Partition) -> Result<Option<Observable>, StructureError> {
    let k = partition.degree();
    if k < 2 {
        return Err(StructureError::TooFewBlocks(k));
    }
    let space = partition.space();
    let d = space.dim();
    let tol = space.tolerances();
    let verts = space.extreme_points();
    let mut effects: Vec<Vec<f64>> = Vec::with_capacity(k);
    for block in &partition.blocks()[..k - 1] {
        let mut lp = LpProblem::feasibility(d);
        for (i, v) in verts.iter().enumerate() {
            let want = if block.contains(&i) { 1.0 } else { 0.0 };
            lp.push_eq(v.clone(), want);
        }
        match lp_solve(&lp, tol).map_err(SpaceError::from)? {
            LpOutcome::Optimal { point, .. } => effects.push(point),
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Unbounded => unreachable!("feasibility query"),
        }
    }
    let mut last = space.unit_effect().to_vec();
    for e in &effects {
        for (l, v) in last.iter_mut().zip(e) {
            *l -= v;
        }
    }
    effects.push(last);
    // Revalidate the full delta pattern; the complement construction makes
    // this succeed whenever the per-block LPs did.
    for (z, e) in effects.iter().enumerate() {
        for (i, v) in verts.iter().enumerate() {
            let want = if partition.blocks()[z].contains(&i) {
                1.0
            } else {
                0.0
            };
            if (dot(e, v) - want).abs() > tol.eps_eq() {
                return Ok(None);
            }
        }
    }
    Ok(Some(validate_observable(space, effects)?))
}

/// All quasi-classical decompositions whose degree is at most `max_degree`.
///
/// Blocks are unions of equivalence classes: states in different blocks of a
/// witnessed partition are perfectly distinguishable, so any finer cut of a
/// class is infeasible and the enumeration over class partitions is complete.
pub fn enumerate_quasiclassical_decompositions(
    space: &Arc<StateSpace>,
    max_degree: usize,
) -> Result<Vec<QuasiClassicalStructure>, StructureError> {
    enumerate_quasiclassical_capped(space, max_degree, DEFAULT_CLASS_CAP)
}

pub fn enumerate_quasiclassical_capped(
    space: &Arc<StateSpace>,
    max_degree: usize,
    class_cap: usize,
) -> Result<Vec<QuasiClassicalStructure>, StructureError> {
    if max_degree < 2 {
        return Err(StructureError::DegreeTooSmall(max_degree));
    }
    let atoms = equivalence_decomposition(space);
    let classes = atoms.degree();
    if classes > class_cap {
        return Err(StructureError::ClassLimit {
            classes,
            cap: class_cap,
        });
    }
    let mut found = Vec::new();
    if classes < 2 {
        return Ok(found);
    }
    let mut assignment = vec![0usize; classes];
    enumerate_set_partitions(&mut assignment, 1, 1, max_degree, &mut |assign, blocks| {
        if blocks < 2 {
            return Ok(());
        }
        let mut vertex_blocks: Vec<Vec<usize>> = vec![Vec::new(); blocks];
        for (class_idx, &b) in assign.iter().enumerate() {
            vertex_blocks[b].extend_from_slice(&atoms.blocks()[class_idx]);
        }
        let partition = Partition::new(space.clone(), vertex_blocks)?;
        if let Some(witness) = quasiclassical_witness(&partition)? {
            // Degree bound: a quasi-classical observable is linearly
            // independent on block representatives.
            debug_assert!(partition.degree() <= space.dim());
            found.push(QuasiClassicalStructure { partition, witness });
        }
        Ok(())
    })?;
    Ok(found)
}

/// Visit every set partition of `assignment.len()` items with at most
/// `max_blocks` blocks; item 0 is fixed in block 0.
fn enumerate_set_partitions<F>(
    assignment: &mut Vec<usize>,
    item: usize,
    used: usize,
    max_blocks: usize,
    visit: &mut F,
) -> Result<(), StructureError>
where
    F: FnMut(&[usize], usize) -> Result<(), StructureError>,
{
    if item == assignment.len() {
        return visit(assignment, used);
    }
    for b in 0..used.min(max_blocks) {
        assignment[item] = b;
        enumerate_set_partitions(assignment, item + 1, used, max_blocks, visit)?;
    }
    if used < max_blocks {
        assignment[item] = used;
        enumerate_set_partitions(assignment, item + 1, used + 1, max_blocks, visit)?;
        assignment[item] = 0;
    }
    Ok(())
}

/// Verdict of the block-weight-uniqueness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarReport {
    pub holds: bool,
    /// Largest block-weight discrepancy any pair of decompositions achieves.
    pub max_gap: f64,
    /// Gap fell between the feasibility and comparison slacks; the verdict is
    /// numerically thin.
    pub ambiguous: bool,
}

/// Decides condition-star: block weights in convex decompositions are unique.
///
/// For each block `z0`, an LP searches two conic decompositions
/// `sum_z v_z = sum_z w_z` of a common unit-mass state with `v_z, w_z` in the
/// cone of block `z`, maximizing the weight gap on `z0`. Star holds exactly
/// when every such gap stays below the comparison slack.
pub fn check_condition_star(partition: &Partition) -> Result<StarReport, StructureError> {
    let k = partition.degree();
    if k < 2 {
        return Err(StructureError::TooFewBlocks(k));
    }
    let space = partition.space();
    let tol = space.tolerances();
    let verts = space.extreme_points();
    let n = space.num_extreme();
    let d = space.dim();
    // Variable layout: lambda over all vertices (grouped by their block),
    // then mu over all vertices.
    let mut max_gap = 0.0f64;
    for z0 in 0..k {
        let mut objective = vec![0.0; 2 * n];
        for &i in &partition.blocks()[z0] {
            objective[i] = 1.0;
            objective[n + i] = -1.0;
        }
        let mut lp = LpProblem::maximize(objective).nonnegative();
        for c in 0..d {
            let mut row = vec![0.0; 2 * n];
            for i in 0..n {
                row[i] = verts[i][c];
                row[n + i] = -verts[i][c];
            }
            lp.push_eq(row, 0.0);
        }
        let mut mass = vec![0.0; 2 * n];
        for m in mass.iter_mut().take(n) {
            *m = 1.0;
        }
        lp.push_eq(mass, 1.0);
        match lp_solve(&lp, tol).map_err(SpaceError::from)? {
            LpOutcome::Optimal { value, .. } => max_gap = max_gap.max(value),
            LpOutcome::Infeasible => unreachable!("lambda = mu is always feasible"),
            LpOutcome::Unbounded => unreachable!("weights are bounded by the unit mass"),
        }
    }
    let holds = max_gap < tol.eps_eq();
    let ambiguous = holds && max_gap > tol.eps_eq() * 0.01;
    Ok(StarReport {
        holds,
        max_gap,
        ambiguous,
    })
}
