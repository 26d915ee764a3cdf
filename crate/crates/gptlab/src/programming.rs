//! The programming scheme: apparatus states steering a fixed total-system
//! channel into chosen dynamics on the system.
//!
//! A program is an apparatus state `xi` such that
//! `<e (x) u_app, L(w (x) xi)> = <e, a_xi w>` for every system state and
//! effect. Verification checks this on the extreme points and the extreme
//! effects; linearity carries it to everything else.

use std::sync::Arc;

use thiserror::Error;

use crate::channel::{is_reversible, make_channel, Channel, ChannelError};
use crate::fidelity::fidelity_is_zero;
use crate::linalg::{dot, kron_vec, linear_extension, linf_distance, Matrix};
use crate::space::{validate_observable, Observable, SpaceError, State, StateSpace};
use crate::structure::QuasiClassicalStructure;
use crate::tensor::{marginal_unchecked, min_tensor, Keep, TensorSpace};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProgrammingError {
    #[error("program state {0} is not a pure (extreme) apparatus state")]
    MixedProgram(usize),
    #[error("program index {index} out of range ({count} programs)")]
    NoSuchProgram { index: usize, count: usize },
    #[error("dynamics {0} does not act on the system space")]
    WrongDynamicsSpace(usize),
    #[error("dynamics {0} is not reversible")]
    NonReversibleDynamics(usize),
    #[error("assignment wants {got} entries, one per block ({want})")]
    AssignmentMismatch { want: usize, got: usize },
    #[error("quasi-classical witness violated at block {block}, vertex {vertex}")]
    WitnessBroken { block: usize, vertex: usize },
    #[error(
        "no linear map extends the blockwise action: residual {residual:e}; \
         the apparatus blocks carry affine relations across blocks"
    )]
    InconsistentBlockExtension { residual: f64 },
    #[error("constructed total channel is not reversible")]
    TotalChannelNotReversible,
    #[error("program {index} fails the programming equation")]
    VerificationFailed { index: usize },
    #[error("programs are not perfectly distinguishable: <A_{n}, xi_{m}> = {value}")]
    ProgramsNotDistinguishable { n: usize, m: usize, value: f64 },
    #[error("counts disagree: {what}")]
    CountMismatch { what: String },
    #[error("output on pure input is not a product state (gap {gap:e})")]
    NonProductOutput { gap: f64 },
    #[error("system must be a simplex for observable extraction")]
    SystemNotSimplex,
    #[error("permutation {index} must fix pi({index})(0) = {index}")]
    BadPermutation { index: usize },
    #[error("extracted effects break the delta pattern at (k={k}, n={n}): {value}")]
    ExtractionPatternBroken { k: usize, n: usize, value: f64 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Structure(#[from] crate::structure::StructureError),
}

/// One registered program: the apparatus state and the dynamics it should
/// implement.
#[derive(Debug, Clone)]
pub struct Program {
    pub state: State,
    pub dynamics: Channel,
}

/// A total channel on a Min-rule composite together with its program list.
#[derive(Debug, Clone)]
pub struct ProgrammingInstance {
    system: Arc<StateSpace>,
    apparatus: Arc<StateSpace>,
    composite: TensorSpace,
    total: Channel,
    programs: Vec<Program>,
}

impl ProgrammingInstance {
    /// Validates and bundles an instance; program states must be pure.
    pub fn new(
        system: Arc<StateSpace>,
        apparatus: Arc<StateSpace>,
        total: Channel,
        programs: Vec<Program>,
    ) -> Result<Self, ProgrammingError> {
        let composite = min_tensor(&system, &apparatus)?;
        Self::with_composite(system, apparatus, composite, total, programs, false)
    }

    /// Auditor entry point: mixed program states are tolerated.
    pub fn new_allow_mixed(
        system: Arc<StateSpace>,
        apparatus: Arc<StateSpace>,
        total: Channel,
        programs: Vec<Program>,
    ) -> Result<Self, ProgrammingError> {
        let composite = min_tensor(&system, &apparatus)?;
        Self::with_composite(system, apparatus, composite, total, programs, true)
    }

    fn with_composite(
        system: Arc<StateSpace>,
        apparatus: Arc<StateSpace>,
        composite: TensorSpace,
        total: Channel,
        programs: Vec<Program>,
        allow_mixed: bool,
    ) -> Result<Self, ProgrammingError> {
        if !total.source().same_structure(composite.space())
            || !total.target().same_structure(composite.space())
        {
            return Err(ChannelError::SpaceMismatch {
                target: total.source().name().to_string(),
                expects: composite.space().name().to_string(),
            }
            .into());
        }
        let eps = apparatus.tolerances().eps_eq();
        for (idx, p) in programs.iter().enumerate() {
            if !allow_mixed {
                let pure = apparatus
                    .extreme_points()
                    .iter()
                    .any(|v| linf_distance(v, p.state.coords()) <= eps);
                if !pure {
                    return Err(ProgrammingError::MixedProgram(idx));
                }
            }
            if !p.dynamics.source().same_structure(&system)
                || !p.dynamics.target().same_structure(&system)
            {
                return Err(ProgrammingError::WrongDynamicsSpace(idx));
            }
        }
        Ok(ProgrammingInstance {
            system,
            apparatus,
            composite,
            total,
            programs,
        })
    }

    pub fn system(&self) -> &Arc<StateSpace> {
        &self.system
    }

    pub fn apparatus(&self) -> &Arc<StateSpace> {
        &self.apparatus
    }

    pub fn composite(&self) -> &TensorSpace {
        &self.composite
    }

    pub fn total_channel(&self) -> &Channel {
        &self.total
    }

    pub fn programs(&self) -> &[Program] {
        &self.programs
    }
}

/// Decides whether program `index` really implements its dynamics through the
/// total channel, checking the programming equation on all system extreme
/// points against all extreme effects of the system effect polytope.
pub fn verify_program(inst: &ProgrammingInstance, index: usize) -> Result<bool, ProgrammingError> {
    let program = inst
        .programs
        .get(index)
        .ok_or(ProgrammingError::NoSuchProgram {
            index,
            count: inst.programs.len(),
        })?;
    let sys = inst.system();
    let eps = sys.tolerances().eps_eq();
    let effect_vertices = sys.effect_polytope_vertices()?;
    let u_app = inst.apparatus().unit_effect();
    for omega in sys.extreme_points() {
        let out = inst
            .total
            .apply_raw(&kron_vec(omega, program.state.coords()));
        let target = program.dynamics.apply_raw(omega);
        for e in effect_vertices {
            let lhs = dot(&kron_vec(e, u_app), &out);
            let rhs = dot(e, &target);
            if (lhs - rhs).abs() > eps {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The residues of one program: the apparatus state left behind per system
/// extreme point, the deduplicated residue set, and the induced partition of
/// the system extreme points.
#[derive(Debug, Clone)]
pub struct ProgramResidue {
    pub program_index: usize,
    /// Residue per system extreme point, in vertex order.
    pub residues: Vec<State>,
    /// Deduplicated residue list (the set `K`).
    pub distinct: Vec<State>,
    /// Vertex-index blocks grouped by residue, aligned with `distinct`.
    pub system_blocks: Vec<Vec<usize>>,
}

/// Extracts the apparatus residues of a verified program. On every pure
/// system input the output must be a product state; its apparatus marginal is
/// the residue.
pub fn compute_residues(
    inst: &ProgrammingInstance,
    index: usize,
) -> Result<ProgramResidue, ProgrammingError> {
    if !verify_program(inst, index)? {
        return Err(ProgrammingError::VerificationFailed { index });
    }
    let program = &inst.programs[index];
    let sys = inst.system();
    let app = inst.apparatus();
    let eps = sys.tolerances().eps_eq();
    let mut residues = Vec::new();
    for omega in sys.extreme_points() {
        let out = inst
            .total
            .apply_raw(&kron_vec(omega, program.state.coords()));
        let sys_marg = marginal_unchecked(sys, app, &out, Keep::First)?;
        let app_marg = marginal_unchecked(sys, app, &out, Keep::Second)?;
        let expected = program.dynamics.apply_raw(omega);
        if linf_distance(sys_marg.coords(), &expected) > eps {
            return Err(ProgrammingError::VerificationFailed { index });
        }
        let product = kron_vec(sys_marg.coords(), app_marg.coords());
        let gap = linf_distance(&product, &out);
        if gap > eps {
            return Err(ProgrammingError::NonProductOutput { gap });
        }
        residues.push(app_marg);
    }
    let mut distinct: Vec<State> = Vec::new();
    let mut system_blocks: Vec<Vec<usize>> = Vec::new();
    for (i, r) in residues.iter().enumerate() {
        match distinct
            .iter()
            .position(|d| linf_distance(d.coords(), r.coords()) <= eps)
        {
            Some(k) => system_blocks[k].push(i),
            None => {
                distinct.push(r.clone());
                system_blocks.push(vec![i]);
            }
        }
    }
    Ok(ProgramResidue {
        program_index: index,
        residues,
        distinct,
        system_blocks,
    })
}

/// One row of the no-programming audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditPair {
    pub a: usize,
    pub b: usize,
    pub dynamics_differ: bool,
    pub programs_distinguishable: bool,
}

impl AuditPair {
    /// Distinct dynamics force perfectly distinguishable programs.
    pub fn ok(&self) -> bool {
        !self.dynamics_differ || self.programs_distinguishable
    }
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub pairs: Vec<AuditPair>,
    pub passed: bool,
}

/// Audits the no-programming theorem on an instance: every pair of verified
/// programs implementing distinct dynamics must be perfectly distinguishable.
pub fn no_programming_audit(inst: &ProgrammingInstance) -> Result<AuditReport, ProgrammingError> {
    if inst.programs.len() < 2 {
        return Ok(AuditReport {
            pairs: Vec::new(),
            passed: true,
        });
    }
    for index in 0..inst.programs.len() {
        if !verify_program(inst, index)? {
            return Err(ProgrammingError::VerificationFailed { index });
        }
    }
    let app = inst.apparatus();
    let mut pairs = Vec::new();
    for a in 0..inst.programs.len() {
        for b in (a + 1)..inst.programs.len() {
            let pa = &inst.programs[a];
            let pb = &inst.programs[b];
            let dynamics_differ = !pa.dynamics.same_action(&pb.dynamics);
            let programs_distinguishable = fidelity_is_zero(app, &pa.state, &pb.state);
            pairs.push(AuditPair {
                a,
                b,
                dynamics_differ,
                programs_distinguishable,
            });
        }
    }
    let passed = pairs.iter().all(AuditPair::ok);
    Ok(AuditReport { pairs, passed })
}

/// Builds the reversible programmer from a quasi-classical apparatus: the
/// total channel acts as `w (x) s -> (a_n w) (x) s` for `s` in block `n`,
/// extended linearly to the composite carrier.
///
/// The extension exists exactly when the block spans are linearly
/// independent (direct-sum-structured apparatuses); otherwise the blockwise
/// images are inconsistent and a typed error reports the residual.
pub fn build_reversible_programmer(
    system: &Arc<StateSpace>,
    qc: &QuasiClassicalStructure,
    dynamics: &[Channel],
    assignment: &[usize],
) -> Result<ProgrammingInstance, ProgrammingError> {
    let apparatus = qc.partition.space().clone();
    let blocks = qc.partition.blocks();
    if assignment.len() != blocks.len() {
        return Err(ProgrammingError::AssignmentMismatch {
            want: blocks.len(),
            got: assignment.len(),
        });
    }
    for (idx, dyn_ch) in dynamics.iter().enumerate() {
        if !dyn_ch.source().same_structure(system) || !dyn_ch.target().same_structure(system) {
            return Err(ProgrammingError::WrongDynamicsSpace(idx));
        }
        if !is_reversible(dyn_ch) {
            return Err(ProgrammingError::NonReversibleDynamics(idx));
        }
    }
    // Re-verify the witness before trusting the block structure.
    let eps = apparatus.tolerances().eps_eq();
    for (block, effect) in qc.witness.effects().iter().enumerate() {
        for (vertex, v) in apparatus.extreme_points().iter().enumerate() {
            let want = if blocks[block].contains(&vertex) {
                1.0
            } else {
                0.0
            };
            if (effect.apply_raw(v) - want).abs() > eps {
                return Err(ProgrammingError::WitnessBroken { block, vertex });
            }
        }
    }
    let composite = min_tensor(system, &apparatus)?;
    let block_of = |j: usize| -> usize { qc.partition.block_of(j) };
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    for omega in system.extreme_points() {
        for (j, sigma) in apparatus.extreme_points().iter().enumerate() {
            let alpha = &dynamics[assignment[block_of(j)]];
            points.push(kron_vec(omega, sigma));
            images.push(kron_vec(&alpha.apply_raw(omega), sigma));
        }
    }
    let (matrix, residual) =
        linear_extension(&Matrix::from_cols(&points), &Matrix::from_cols(&images));
    if residual > eps {
        return Err(ProgrammingError::InconsistentBlockExtension { residual });
    }
    let total = make_channel(matrix, composite.space(), composite.space())?;
    if !is_reversible(&total) {
        return Err(ProgrammingError::TotalChannelNotReversible);
    }
    let programs: Vec<Program> = apparatus
        .extreme_points()
        .iter()
        .enumerate()
        .map(|(j, sigma)| Program {
            state: State::from_coords_unchecked(sigma.clone()),
            dynamics: dynamics[assignment[block_of(j)]].clone(),
        })
        .collect();
    let inst = ProgrammingInstance::with_composite(
        system.clone(),
        apparatus,
        composite,
        total,
        programs,
        false,
    )?;
    for index in 0..inst.programs.len() {
        if !verify_program(&inst, index)? {
            return Err(ProgrammingError::VerificationFailed { index });
        }
    }
    Ok(inst)
}

/// Builds the irreversible universal programmer for perfectly distinguishable
/// programs: append a classical register, measure the apparatus and record
/// the outcome, apply the recorded dynamics to the system, trace the register
/// out. The result is a single validated channel on `system (x)min apparatus`.
pub fn build_channel_programmer(
    system: &Arc<StateSpace>,
    apparatus: &Arc<StateSpace>,
    programs: &[State],
    obs: &Observable,
    dynamics: &[Channel],
    reprepared: &[State],
) -> Result<ProgrammingInstance, ProgrammingError> {
    let n = programs.len();
    if obs.len() != n || dynamics.len() != n || reprepared.len() != n {
        return Err(ProgrammingError::CountMismatch {
            what: format!(
                "programs {}, outcomes {}, dynamics {}, reprepared {}",
                n,
                obs.len(),
                dynamics.len(),
                reprepared.len()
            ),
        });
    }
    let eps = apparatus.tolerances().eps_eq();
    for (an, effect) in obs.effects().iter().enumerate() {
        for (m, xi) in programs.iter().enumerate() {
            let value = effect.apply(xi);
            let want = if an == m { 1.0 } else { 0.0 };
            if (value - want).abs() > eps {
                return Err(ProgrammingError::ProgramsNotDistinguishable { n: an, m, value });
            }
        }
    }
    for (idx, tau) in dynamics.iter().enumerate() {
        if !tau.source().same_structure(system) || !tau.target().same_structure(system) {
            return Err(ProgrammingError::WrongDynamicsSpace(idx));
        }
    }
    let (ds, da) = (system.dim(), apparatus.dim());
    let dd = ds * da;
    // Register append: x -> x (x) delta_0.
    let mut delta0 = Matrix::zeros(n, 1);
    delta0.set(0, 0, 1.0);
    let theta1 = Matrix::identity(dd).kron(&delta0);
    // Measure-and-prepare on apparatus (x) register.
    let mut mp = Matrix::zeros(da * n, da * n);
    for (k, (xi_prime, effect)) in reprepared.iter().zip(obs.effects()).enumerate() {
        let mut reg = vec![0.0; n];
        reg[k] = 1.0;
        let out_col = kron_vec(xi_prime.coords(), &reg);
        let in_row = kron_vec(effect.coords(), &vec![1.0; n]);
        for r in 0..da * n {
            for c in 0..da * n {
                let v = mp.get(r, c) + out_col[r] * in_row[c];
                mp.set(r, c, v);
            }
        }
    }
    let theta2 = Matrix::identity(ds).kron(&mp);
    // Register-controlled dynamics on the system.
    let mut theta3 = Matrix::zeros(dd * n, dd * n);
    for (k, tau) in dynamics.iter().enumerate() {
        let mut e_kk = Matrix::zeros(n, n);
        e_kk.set(k, k, 1.0);
        theta3 = theta3.add_matrix(&tau.matrix().kron(&Matrix::identity(da)).kron(&e_kk));
    }
    // Trace the register out.
    let mut u_row = Matrix::zeros(1, n);
    for k in 0..n {
        u_row.set(0, k, 1.0);
    }
    let trace = Matrix::identity(dd).kron(&u_row);
    let theta = trace.matmul(&theta3).matmul(&theta2).matmul(&theta1);
    let composite = min_tensor(system, apparatus)?;
    let total = make_channel(theta, composite.space(), composite.space())?;
    let program_list: Vec<Program> = programs
        .iter()
        .zip(dynamics)
        .map(|(state, tau)| Program {
            state: state.clone(),
            dynamics: tau.clone(),
        })
        .collect();
    let inst = ProgrammingInstance::with_composite(
        system.clone(),
        apparatus.clone(),
        composite,
        total,
        program_list,
        true,
    )?;
    for index in 0..inst.programs.len() {
        if !verify_program(&inst, index)? {
            return Err(ProgrammingError::VerificationFailed { index });
        }
    }
    Ok(inst)
}

/// Reads a program-distinguishing observable off a total channel on a
/// classical system: with permutation dynamics fixing `pi_n(0) = n`, the
/// block maps of the first system level define effects
/// `A_k = (Theta_k^0)^T u_app` forming an observable with
/// `<A_k, xi_n> = delta_kn` on the programs.
pub fn extract_program_observable(
    composite: &TensorSpace,
    total: &Channel,
    programs: &[State],
    permutations: &[Vec<usize>],
) -> Result<Observable, ProgrammingError> {
    let system = composite.left();
    let apparatus = composite.right();
    if !system.is_simplex() {
        return Err(ProgrammingError::SystemNotSimplex);
    }
    let n_sys = system.dim();
    if programs.len() != permutations.len() {
        return Err(ProgrammingError::CountMismatch {
            what: format!(
                "{} programs vs {} permutations",
                programs.len(),
                permutations.len()
            ),
        });
    }
    for (index, perm) in permutations.iter().enumerate() {
        if perm.len() != n_sys || perm[0] != index {
            return Err(ProgrammingError::BadPermutation { index });
        }
    }
    // Verify the programs implement their permutations first.
    let inst = ProgrammingInstance::with_composite(
        system.clone(),
        apparatus.clone(),
        composite.clone(),
        total.clone(),
        programs
            .iter()
            .zip(permutations)
            .map(|(state, perm)| {
                Ok(Program {
                    state: state.clone(),
                    dynamics: crate::channel::permutation_channel(system, perm)?,
                })
            })
            .collect::<Result<Vec<_>, ProgrammingError>>()?,
        true,
    )?;
    for index in 0..inst.programs.len() {
        if !verify_program(&inst, index)? {
            return Err(ProgrammingError::VerificationFailed { index });
        }
    }
    let da = apparatus.dim();
    let u_app = apparatus.unit_effect();
    let mut effects = Vec::with_capacity(n_sys);
    for k in 0..n_sys {
        // Theta_k^0 is the (k, 0) block of the channel matrix.
        let mut a_k = vec![0.0; da];
        for (c, a) in a_k.iter_mut().enumerate() {
            for r in 0..da {
                *a += total.matrix().get(k * da + r, c) * u_app[r];
            }
        }
        effects.push(a_k);
    }
    let obs = validate_observable(apparatus, effects)?;
    let eps = apparatus.tolerances().eps_eq();
    for (n, xi) in programs.iter().enumerate() {
        for (k, effect) in obs.effects().iter().enumerate() {
            let value = effect.apply(xi);
            let want = if k == n { 1.0 } else { 0.0 };
            if (value - want).abs() > eps {
                return Err(ProgrammingError::ExtractionPatternBroken { k, n, value });
            }
        }
    }
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{identity_channel, permutation_channel};
    use crate::polygon::{polygon_theory, rotation_channel};
    use crate::space::{direct_sum, simplex};
    use crate::structure::{
        enumerate_quasiclassical_decompositions, quasiclassical_witness, Partition,
    };

    fn arc(s: StateSpace) -> Arc<StateSpace> {
        Arc::new(s)
    }

    /// Classic controlled construction: simplex apparatus, one dynamics per
    /// basis vector.
    fn controlled_instance() -> ProgrammingInstance {
        let system = arc(simplex(3).unwrap());
        let apparatus = arc(simplex(2).unwrap());
        let atoms = Partition::new(apparatus.clone(), vec![vec![0], vec![1]]).unwrap();
        let witness = quasiclassical_witness(&atoms).unwrap().unwrap();
        let qc = QuasiClassicalStructure {
            partition: atoms,
            witness,
        };
        let dynamics = vec![
            identity_channel(&system),
            permutation_channel(&system, &[1, 2, 0]).unwrap(),
        ];
        build_reversible_programmer(&system, &qc, &dynamics, &[0, 1]).unwrap()
    }

    #[test]
    fn controlled_programmer_verifies_and_is_reversible() {
        let inst = controlled_instance();
        assert!(is_reversible(inst.total_channel()));
        for i in 0..inst.programs().len() {
            assert!(verify_program(&inst, i).unwrap());
        }
    }

    #[test]
    fn wrong_dynamics_fails_verification() {
        let inst = controlled_instance();
        // Cross the registered dynamics: program 0 now claims the cycle.
        let mut programs = inst.programs().to_vec();
        let d0 = programs[0].dynamics.clone();
        programs[0].dynamics = programs[1].dynamics.clone();
        programs[1].dynamics = d0;
        let bad = ProgrammingInstance::new(
            inst.system().clone(),
            inst.apparatus().clone(),
            inst.total_channel().clone(),
            programs,
        )
        .unwrap();
        assert!(!verify_program(&bad, 0).unwrap());
    }

    #[test]
    fn identity_total_with_nontrivial_claim_fails() {
        let system = arc(simplex(2).unwrap());
        let apparatus = arc(simplex(2).unwrap());
        let composite = min_tensor(&system, &apparatus).unwrap();
        let total = identity_channel(composite.space());
        let inst = ProgrammingInstance::new(
            system.clone(),
            apparatus.clone(),
            total,
            vec![Program {
                state: apparatus.extreme_state(0),
                dynamics: permutation_channel(&system, &[1, 0]).unwrap(),
            }],
        )
        .unwrap();
        assert!(!verify_program(&inst, 0).unwrap());
    }

    #[test]
    fn residues_of_controlled_instance_are_the_program() {
        let inst = controlled_instance();
        let res = compute_residues(&inst, 0).unwrap();
        assert_eq!(res.distinct.len(), 1);
        assert_eq!(res.system_blocks, vec![vec![0, 1, 2]]);
        assert!(linf_distance(res.distinct[0].coords(), inst.programs()[0].state.coords()) < 1e-9);
    }

    #[test]
    fn cnot_residues_split_by_system_class() {
        // Both register states program the identity, but the residue depends
        // on the control level, so the residue set has two elements.
        let system = arc(simplex(2).unwrap());
        let apparatus = arc(simplex(2).unwrap());
        let composite = min_tensor(&system, &apparatus).unwrap();
        // CNOT with the system as control: (m, k) -> (m, m xor k).
        let mut m = Matrix::zeros(4, 4);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        m.set(3, 2, 1.0);
        m.set(2, 3, 1.0);
        let total = make_channel(m, composite.space(), composite.space()).unwrap();
        let inst = ProgrammingInstance::new(
            system.clone(),
            apparatus.clone(),
            total,
            vec![Program {
                state: apparatus.extreme_state(0),
                dynamics: identity_channel(&system),
            }],
        )
        .unwrap();
        assert!(verify_program(&inst, 0).unwrap());
        let res = compute_residues(&inst, 0).unwrap();
        assert_eq!(res.distinct.len(), 2);
        assert_eq!(res.system_blocks, vec![vec![0], vec![1]]);
    }

    #[test]
    fn square_apparatus_blockwise_extension_is_inconsistent() {
        // The square's cross-block affine relation defeats the construction
        // whenever the two dynamics differ.
        let system = arc(simplex(3).unwrap());
        let square = polygon_theory(4).unwrap().space().clone();
        let qcs = enumerate_quasiclassical_decompositions(&square, 2).unwrap();
        let qc = qcs
            .iter()
            .find(|s| s.partition.blocks().contains(&vec![0, 1]))
            .unwrap();
        let dynamics = vec![
            identity_channel(&system),
            permutation_channel(&system, &[1, 2, 0]).unwrap(),
        ];
        let err = build_reversible_programmer(&system, qc, &dynamics, &[0, 1]).unwrap_err();
        assert!(matches!(
            err,
            ProgrammingError::InconsistentBlockExtension { .. }
        ));
        // Equal dynamics on both blocks stay consistent.
        let same = vec![identity_channel(&system), identity_channel(&system)];
        assert!(build_reversible_programmer(&system, qc, &same, &[0, 1]).is_ok());
    }

    #[test]
    fn prism_apparatus_blockwise_extension_is_inconsistent() {
        // Same obstruction as the square: the prism's vertical translation
        // relation crosses the column blocks.
        let system = arc(simplex(4).unwrap());
        let prism = arc(crate::fixtures::triangular_prism());
        let columns =
            Partition::new(prism.clone(), vec![vec![0, 3], vec![1, 4], vec![2, 5]]).unwrap();
        let witness = quasiclassical_witness(&columns).unwrap().unwrap();
        let qc = QuasiClassicalStructure {
            partition: columns,
            witness,
        };
        let dynamics = vec![
            identity_channel(&system),
            permutation_channel(&system, &[1, 2, 3, 0]).unwrap(),
            permutation_channel(&system, &[2, 3, 0, 1]).unwrap(),
        ];
        let err = build_reversible_programmer(&system, &qc, &dynamics, &[0, 1, 2]).unwrap_err();
        assert!(matches!(
            err,
            ProgrammingError::InconsistentBlockExtension { .. }
        ));
    }

    #[test]
    fn extraction_on_square_apparatus_two_programs() {
        // Opposite square vertices programming two permutations of a bit via
        // the channel construction; extraction returns a two-outcome
        // delta-patterned observable.
        let system = arc(simplex(2).unwrap());
        let apparatus = polygon_theory(4).unwrap().space().clone();
        let programs = vec![apparatus.extreme_state(0), apparatus.extreme_state(2)];
        let obs = crate::distinguish::find_distinguishing_observable(&apparatus, &programs)
            .unwrap()
            .observable()
            .unwrap()
            .clone();
        let perms = vec![vec![0, 1], vec![1, 0]];
        let dynamics: Vec<Channel> = perms
            .iter()
            .map(|p| permutation_channel(&system, p).unwrap())
            .collect();
        let inst = build_channel_programmer(
            &system,
            &apparatus,
            &programs,
            &obs,
            &dynamics,
            &programs.clone(),
        )
        .unwrap();
        let extracted =
            extract_program_observable(inst.composite(), inst.total_channel(), &programs, &perms)
                .unwrap();
        assert_eq!(extracted.len(), 2);
        for (n, xi) in programs.iter().enumerate() {
            for (k, e) in extracted.effects().iter().enumerate() {
                let want = if k == n { 1.0 } else { 0.0 };
                assert!((e.apply(xi) - want).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn single_program_audit_is_vacuous() {
        let inst = controlled_instance();
        let solo = ProgrammingInstance::new(
            inst.system().clone(),
            inst.apparatus().clone(),
            inst.total_channel().clone(),
            vec![inst.programs()[0].clone()],
        )
        .unwrap();
        let report = no_programming_audit(&solo).unwrap();
        assert!(report.passed);
        assert!(report.pairs.is_empty());
    }

    #[test]
    fn verify_refuses_large_system_effect_enumeration() {
        let system = arc(simplex(7).unwrap());
        let apparatus = arc(simplex(2).unwrap());
        let composite = min_tensor(&system, &apparatus).unwrap();
        let inst = ProgrammingInstance::new(
            system.clone(),
            apparatus.clone(),
            identity_channel(composite.space()),
            vec![Program {
                state: apparatus.extreme_state(0),
                dynamics: identity_channel(&system),
            }],
        )
        .unwrap();
        let err = verify_program(&inst, 0).unwrap_err();
        assert!(matches!(
            err,
            ProgrammingError::Space(SpaceError::EffectEnumerationUnsupported { .. })
        ));
    }

    #[test]
    fn direct_sum_of_polygons_programs_reversibly() {
        let system = arc(simplex(2).unwrap());
        let pent = polygon_theory(5).unwrap();
        let apparatus = arc(direct_sum(&[pent.space(), pent.space()]).unwrap());
        let blocks =
            Partition::new(apparatus.clone(), vec![(0..5).collect(), (5..10).collect()]).unwrap();
        let witness = quasiclassical_witness(&blocks)
            .unwrap()
            .expect("sum blocks");
        let qc = QuasiClassicalStructure {
            partition: blocks,
            witness,
        };
        let dynamics = vec![
            identity_channel(&system),
            permutation_channel(&system, &[1, 0]).unwrap(),
        ];
        let inst = build_reversible_programmer(&system, &qc, &dynamics, &[0, 1]).unwrap();
        assert!(is_reversible(inst.total_channel()));
        let report = no_programming_audit(&inst).unwrap();
        assert!(report.passed);
        // Round trip: residues reproduce the defining blocks.
        for idx in 0..inst.programs().len() {
            let res = compute_residues(&inst, idx).unwrap();
            assert_eq!(res.distinct.len(), 1);
        }
    }

    #[test]
    fn channel_programmer_on_classical_apparatus() {
        let system = arc(simplex(2).unwrap());
        let apparatus = arc(simplex(3).unwrap());
        let programs: Vec<State> = (0..3).map(|i| apparatus.extreme_state(i)).collect();
        let obs = validate_observable(
            &apparatus,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let constant = crate::channel::measure_and_prepare(
            &validate_observable(&system, vec![system.unit_effect().to_vec()]).unwrap(),
            &[system.extreme_state(0)],
            &system,
            &system,
        )
        .unwrap();
        let dynamics = vec![
            identity_channel(&system),
            permutation_channel(&system, &[1, 0]).unwrap(),
            constant,
        ];
        let reprepared: Vec<State> = (0..3).map(|i| apparatus.extreme_state(i)).collect();
        let inst =
            build_channel_programmer(&system, &apparatus, &programs, &obs, &dynamics, &reprepared)
                .unwrap();
        for i in 0..3 {
            assert!(verify_program(&inst, i).unwrap());
        }
        assert!(no_programming_audit(&inst).unwrap().passed);
    }

    #[test]
    fn channel_programmer_square_apparatus_reversible_targets() {
        // Two polygon rotations programmed through an irreversible total
        // channel with opposite square vertices as programs.
        let sq_theory = polygon_theory(4).unwrap();
        let system = sq_theory.space().clone();
        let apparatus = polygon_theory(4).unwrap().space().clone();
        let programs = vec![apparatus.extreme_state(0), apparatus.extreme_state(2)];
        let out =
            crate::distinguish::find_distinguishing_observable(&apparatus, &programs).unwrap();
        let obs = out.observable().expect("opposite vertices").clone();
        let dynamics = vec![
            rotation_channel(&sq_theory, 1),
            rotation_channel(&sq_theory, 2),
        ];
        let reprepared = vec![apparatus.extreme_state(0), apparatus.extreme_state(2)];
        let inst =
            build_channel_programmer(&system, &apparatus, &programs, &obs, &dynamics, &reprepared)
                .unwrap();
        assert!(verify_program(&inst, 0).unwrap());
        assert!(verify_program(&inst, 1).unwrap());
        assert!(!is_reversible(inst.total_channel()));
    }

    #[test]
    fn channel_programmer_refuses_indistinct_programs() {
        let system = arc(simplex(2).unwrap());
        let pent = polygon_theory(5).unwrap();
        let apparatus = pent.space().clone();
        let programs = vec![apparatus.extreme_state(0), apparatus.extreme_state(1)];
        // Hand the constructor an observable that cannot separate adjacent
        // pentagon vertices; the delta-pattern precondition must fire.
        let obs = validate_observable(
            &apparatus,
            vec![apparatus.unit_effect().to_vec(), vec![0.0; 3]],
        )
        .unwrap();
        let dynamics = vec![identity_channel(&system), identity_channel(&system)];
        let reprepared = programs.clone();
        let err =
            build_channel_programmer(&system, &apparatus, &programs, &obs, &dynamics, &reprepared)
                .unwrap_err();
        assert!(matches!(
            err,
            ProgrammingError::ProgramsNotDistinguishable { .. }
        ));
    }

    #[test]
    fn extraction_recovers_distinguishing_observable() {
        let system = arc(simplex(3).unwrap());
        let apparatus = arc(simplex(3).unwrap());
        let programs: Vec<State> = (0..3).map(|i| apparatus.extreme_state(i)).collect();
        let obs = validate_observable(
            &apparatus,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        // Cyclic shifts fix pi_n(0) = n.
        let perms: Vec<Vec<usize>> = (0..3)
            .map(|i| (0..3).map(|m| (m + i) % 3).collect())
            .collect();
        let dynamics: Vec<Channel> = perms
            .iter()
            .map(|p| permutation_channel(&system, p).unwrap())
            .collect();
        let inst = build_channel_programmer(
            &system,
            &apparatus,
            &programs,
            &obs,
            &dynamics,
            &programs.clone(),
        )
        .unwrap();
        let extracted =
            extract_program_observable(inst.composite(), inst.total_channel(), &programs, &perms)
                .unwrap();
        for (n, xi) in programs.iter().enumerate() {
            for (k, e) in extracted.effects().iter().enumerate() {
                let want = if k == n { 1.0 } else { 0.0 };
                assert!((e.apply(xi) - want).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn extraction_from_reversible_sum_instance_matches_witness() {
        // System bit, apparatus = pentagon (+) pentagon; the extracted
        // observable is the blockwise witness.
        let system = arc(simplex(2).unwrap());
        let pent = polygon_theory(5).unwrap();
        let apparatus = arc(direct_sum(&[pent.space(), pent.space()]).unwrap());
        let blocks =
            Partition::new(apparatus.clone(), vec![(0..5).collect(), (5..10).collect()]).unwrap();
        let witness = quasiclassical_witness(&blocks).unwrap().unwrap();
        let qc = QuasiClassicalStructure {
            partition: blocks,
            witness: witness.clone(),
        };
        let dynamics = vec![
            identity_channel(&system),
            permutation_channel(&system, &[1, 0]).unwrap(),
        ];
        let inst = build_reversible_programmer(&system, &qc, &dynamics, &[0, 1]).unwrap();
        let programs = vec![apparatus.extreme_state(0), apparatus.extreme_state(5)];
        let perms = vec![vec![0, 1], vec![1, 0]];
        let extracted =
            extract_program_observable(inst.composite(), inst.total_channel(), &programs, &perms)
                .unwrap();
        for (k, e) in extracted.effects().iter().enumerate() {
            for (vertex, v) in apparatus.extreme_points().iter().enumerate() {
                let want = witness.effects()[k].apply_raw(v);
                assert!(
                    (e.apply_raw(v) - want).abs() < 1e-7,
                    "k={k} vertex={vertex}"
                );
            }
        }
    }
}
