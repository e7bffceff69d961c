//! State preparation: premeasurement, branching states with tunable record
//! quality, Haar-random states, environment scrambling, hazy environments
//! and the collision model.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

use crate::hilbert::linalg::{self, CMatrix, ONE, ZERO};
use crate::hilbert::{
    DensityOperator, HilbertError, Role, StateVector, SubsystemLayout, MAX_QUBIT_EQUIVALENTS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("branch amplitudes have squared norm {0}, expected 1")]
    InvalidAmplitudes(f64),
    #[error("no family of {branches} records with overlap {overlap} fits in dimension {dim}")]
    InfeasibleOverlap {
        branches: usize,
        overlap: f64,
        dim: usize,
    },
    #[error("invalid record vectors: {0}")]
    InvalidRecords(String),
    #[error("scrambling needs at least two environment subsystems, found {0}")]
    TooFewSubsystems(usize),
    #[error("parameter out of range: {0}")]
    InvalidParameter(String),
}

/// How the environment records of each branch are specified.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordFamily {
    /// Every subsystem holds records with pairwise overlap `c` between branches.
    Overlap(f64),
    /// `records[j][k]` is the record of branch `k` on environment subsystem `j`.
    Explicit(Vec<Vec<Vec<Complex64>>>),
}

/// Parameters of `Σ_k α_k |k⟩ ⊗_j |ε_k^(j)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub branch_amplitudes: Vec<Complex64>,
    pub n_env: usize,
    pub env_dim: usize,
    pub records: RecordFamily,
}

impl BranchSpec {
    /// Two branches `α|0⟩ + β|1⟩` with real `α`, `β = sqrt(1 - α²)`, qubit records.
    pub fn qubit(alpha: f64, n_env: usize, overlap: f64) -> Self {
        let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
        Self {
            branch_amplitudes: vec![Complex64::new(alpha, 0.0), Complex64::new(beta, 0.0)],
            n_env,
            env_dim: 2,
            records: RecordFamily::Overlap(overlap),
        }
    }

    /// Even two-branch state with perfect records: GHZ on `n_env + 1` qubits.
    pub fn ghz(n_env: usize) -> Self {
        Self::qubit(std::f64::consts::FRAC_1_SQRT_2, n_env, 0.0)
    }
}

/// Per-collision record rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionSchedule {
    pub n_steps: usize,
    /// Rotation angle θ in [0, π/2]; the per-collision record overlap is cos θ.
    pub record_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScrambleConfig {
    pub rounds: usize,
    pub seed: u64,
}

/// Unitary `|k⟩|j⟩ ↦ |k⟩|j + k mod d⟩` on a `sys_dim × rec_dim` pair.
pub fn controlled_shift(sys_dim: usize, rec_dim: usize) -> CMatrix {
    let n = sys_dim * rec_dim;
    let mut u = CMatrix::zeros(n, n);
    for k in 0..sys_dim {
        for j in 0..rec_dim {
            u[(k * rec_dim + (j + k) % rec_dim, k * rec_dim + j)] = ONE;
        }
    }
    u
}

/// Couples a single-subsystem `system_state` to a blank record `|0⟩` of
/// dimension `blank_record_dim` through a controlled shift, giving
/// `Σ_k ψ_k |k⟩|R_k⟩` with `|R_k⟩` the k-th record basis state.
///
/// The record subsystem is tagged as the apparatus.
pub fn premeasure(
    system_state: &StateVector,
    blank_record_dim: usize,
) -> Result<StateVector, DynamicsError> {
    let dims = system_state.layout().dims();
    if dims.len() != 1 {
        return Err(DynamicsError::DimensionMismatch(format!(
            "premeasure expects a single subsystem, got {}",
            dims.len()
        )));
    }
    let d = dims[0];
    if d > blank_record_dim {
        return Err(DynamicsError::DimensionMismatch(format!(
            "system dimension {d} exceeds record dimension {blank_record_dim}"
        )));
    }
    let layout = SubsystemLayout::new(
        vec![d, blank_record_dim],
        vec![Role::System, Role::Apparatus],
    )?;
    let mut amps = vec![ZERO; d * blank_record_dim];
    for (k, a) in system_state.amplitudes().iter().enumerate() {
        amps[k * blank_record_dim] = *a;
    }
    let joint = StateVector::new(layout, amps)?;
    Ok(joint.apply_unitary(&controlled_shift(d, blank_record_dim), &[0, 1])?)
}

/// Rows of the lower-triangular factor of the `D × D` Gram matrix with unit
/// diagonal and `c` elsewhere, zero-padded to `dim`. Pivots that vanish (c = 1)
/// leave their column empty, so every record collapses onto `|0⟩`.
pub fn equal_overlap_records(
    branches: usize,
    overlap: f64,
    dim: usize,
) -> Result<Vec<Vec<Complex64>>, DynamicsError> {
    let infeasible = || DynamicsError::InfeasibleOverlap {
        branches,
        overlap,
        dim,
    };
    if !(0.0..=1.0).contains(&overlap) || !overlap.is_finite() {
        return Err(infeasible());
    }
    let gram = |i: usize, j: usize| if i == j { 1.0 } else { overlap };
    let mut l = vec![vec![0.0f64; branches]; branches];
    for i in 0..branches {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let p = gram(i, i) - s;
                l[i][j] = if p > 1e-14 { p.sqrt() } else { 0.0 };
            } else if l[j][j] > 0.0 {
                l[i][j] = (gram(i, j) - s) / l[j][j];
            }
        }
    }
    let rank = (0..branches)
        .filter(|&j| l.iter().any(|row| row[j] != 0.0))
        .count();
    if rank > dim {
        return Err(infeasible());
    }
    // Compact the nonzero columns into the first `rank` record basis states.
    let cols: Vec<usize> = (0..branches)
        .filter(|&j| l.iter().any(|row| row[j] != 0.0))
        .collect();
    Ok(l.iter()
        .map(|row| {
            let mut v = vec![ZERO; dim];
            for (slot, &c) in cols.iter().enumerate() {
                v[slot] = Complex64::new(row[c], 0.0);
            }
            v
        })
        .collect())
}

/// Builds `Σ_k α_k |k⟩ ⊗_{j=1..N} |ε_k^(j)⟩`.
pub fn build_branching_state(spec: &BranchSpec) -> Result<StateVector, DynamicsError> {
    let d_sys = spec.branch_amplitudes.len();
    if d_sys < 2 {
        return Err(DynamicsError::DimensionMismatch(format!(
            "need at least two branches, got {d_sys}"
        )));
    }
    if spec.env_dim < 2 {
        return Err(DynamicsError::DimensionMismatch(format!(
            "environment dimension {} < 2",
            spec.env_dim
        )));
    }
    let norm: f64 = spec.branch_amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(DynamicsError::InvalidAmplitudes(norm));
    }
    let mut dims = vec![d_sys];
    dims.extend(std::iter::repeat_n(spec.env_dim, spec.n_env));
    let layout = SubsystemLayout::canonical(dims)?;

    let per_subsystem: Vec<Vec<Vec<Complex64>>> = match &spec.records {
        RecordFamily::Overlap(c) => {
            let family = equal_overlap_records(d_sys, *c, spec.env_dim)?;
            vec![family; spec.n_env]
        }
        RecordFamily::Explicit(records) => {
            if records.len() != spec.n_env {
                return Err(DynamicsError::InvalidRecords(format!(
                    "{} subsystems of records for {} environment subsystems",
                    records.len(),
                    spec.n_env
                )));
            }
            for (j, family) in records.iter().enumerate() {
                if family.len() != d_sys {
                    return Err(DynamicsError::InvalidRecords(format!(
                        "subsystem {}: {} records for {d_sys} branches",
                        j + 1,
                        family.len()
                    )));
                }
                for r in family {
                    let n: f64 = r.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                    if r.len() != spec.env_dim || (n - 1.0).abs() > 1e-10 {
                        return Err(DynamicsError::InvalidRecords(format!(
                            "subsystem {}: record of length {} and norm {n}",
                            j + 1,
                            r.len()
                        )));
                    }
                }
            }
            records.clone()
        }
    };

    let block = layout.total_dim() / d_sys;
    let mut amps = Vec::with_capacity(layout.total_dim());
    for (k, alpha) in spec.branch_amplitudes.iter().enumerate() {
        let mut branch = vec![*alpha];
        for family in &per_subsystem {
            let rec = &family[k];
            let mut next = Vec::with_capacity(branch.len() * rec.len());
            for a in &branch {
                next.extend(rec.iter().map(|r| a * r));
            }
            branch = next;
        }
        debug_assert_eq!(branch.len(), block);
        amps.extend(branch);
    }
    Ok(StateVector::normalized(layout, amps)?)
}

/// Haar-random pure state: independent standard complex Gaussian amplitudes,
/// normalized. Bit-for-bit reproducible for a given seed.
pub fn haar_random_state(
    layout: &SubsystemLayout,
    seed: u64,
) -> Result<StateVector, DynamicsError> {
    layout.check_capacity()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..layout.total_dim())
        .map(|_| linalg::complex_gaussian(&mut rng))
        .collect();
    Ok(StateVector::normalized(layout.clone(), amps)?)
}

/// Applies `rounds` Haar-random two-subsystem unitaries to uniformly chosen
/// pairs of environment subsystems. The system is never touched.
pub fn scramble_environment(
    state: &StateVector,
    config: ScrambleConfig,
) -> Result<StateVector, DynamicsError> {
    let env = state.layout().env_indices();
    if env.len() < 2 {
        return Err(DynamicsError::TooFewSubsystems(env.len()));
    }
    let dims = state.layout().dims().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = state.clone();
    for _ in 0..config.rounds {
        let a = rng.random_range(0..env.len());
        let mut b = rng.random_range(0..env.len() - 1);
        if b >= a {
            b += 1;
        }
        let (ia, ib) = (env[a], env[b]);
        let u = linalg::haar_unitary(dims[ia] * dims[ib], &mut rng);
        out = out.apply_unitary(&u, &[ia, ib])?;
    }
    Ok(out)
}

/// `|0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ R(θ)` with `R(θ)|0⟩ = cos θ|0⟩ + sin θ|1⟩`.
pub fn controlled_rotation(theta: f64) -> CMatrix {
    let (s, c) = theta.sin_cos();
    let mut u = linalg::identity(4);
    u[(2, 2)] = Complex64::new(c, 0.0);
    u[(2, 3)] = Complex64::new(-s, 0.0);
    u[(3, 2)] = Complex64::new(s, 0.0);
    u[(3, 3)] = Complex64::new(c, 0.0);
    u
}

/// Sequentially couples `n_steps` fresh environment qubits to a system qubit,
/// each through a controlled rotation by `record_angle`.
pub fn run_collision_model(
    system_state: &StateVector,
    schedule: CollisionSchedule,
) -> Result<StateVector, DynamicsError> {
    if system_state.layout().dims() != [2] {
        return Err(DynamicsError::DimensionMismatch(format!(
            "collision model needs a single system qubit, got dims {:?}",
            system_state.layout().dims()
        )));
    }
    if !(0.0..=FRAC_PI_2).contains(&schedule.record_angle) {
        return Err(DynamicsError::InvalidParameter(format!(
            "collision angle {} outside [0, π/2]",
            schedule.record_angle
        )));
    }
    if (schedule.n_steps + 1) as f64 > MAX_QUBIT_EQUIVALENTS {
        return Err(HilbertError::CapacityExceeded((schedule.n_steps + 1) as f64).into());
    }
    let fresh = StateVector::single(vec![ONE, ZERO])?;
    let gate = controlled_rotation(schedule.record_angle);
    let mut state = system_state.clone().relabel(SubsystemLayout::qubits(0)?)?;
    for t in 1..=schedule.n_steps {
        state = StateVector::tensor_compose(&[state, fresh.clone()])?;
        state = state.apply_unitary(&gate, &[0, t])?;
    }
    Ok(state)
}

/// `n_env` copies of `p|0⟩⟨0| + (1 - p) 1/2`.
pub fn init_hazy_environment(p: f64, n_env: usize) -> Result<Vec<DensityOperator>, DynamicsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(DynamicsError::InvalidParameter(format!(
            "haze purity p = {p}"
        )));
    }
    let layout = SubsystemLayout::canonical(vec![2])?;
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = Complex64::new((1.0 + p) / 2.0, 0.0);
    m[(1, 1)] = Complex64::new((1.0 - p) / 2.0, 0.0);
    let rho = DensityOperator::new(layout, m)?;
    Ok(vec![rho; n_env])
}

/// Branching state decohered by a hazy environment.
///
/// Each environment qubit starts in `p|0⟩⟨0| + (1 - p) 1/2`, purified by an
/// ancilla (`Ancilla(j)` pairs with `Env(j)`), then records the system through
/// a CNOT. Layout: system, `Env(1..=N)`, `Ancilla(1..=N)`.
pub fn hazy_branching_state(
    alpha: f64,
    n_env: usize,
    p: f64,
) -> Result<StateVector, DynamicsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DynamicsError::InvalidParameter(format!("alpha = {alpha}")));
    }
    let hazy = init_hazy_environment(p, n_env)?;
    let beta = (1.0 - alpha * alpha).sqrt();
    let dims = vec![2usize; 1 + 2 * n_env];
    let mut roles = vec![Role::System];
    roles.extend((1..=n_env).map(Role::Env));
    roles.extend((1..=n_env).map(Role::Ancilla));
    let layout = SubsystemLayout::new(dims, roles)?;

    // System, then (env_j, ancilla_j) purifications; permuted into layout order below.
    let mut amps = vec![ZERO; layout.total_dim()];
    let strides = layout.strides();
    let sys_amps = [Complex64::new(alpha, 0.0), Complex64::new(beta, 0.0)];
    let purif: Vec<[f64; 2]> = hazy
        .iter()
        .map(|rho| {
            let pops = rho.populations();
            [pops[0].sqrt(), pops[1].sqrt()]
        })
        .collect();
    for (s, amp) in sys_amps.iter().enumerate() {
        for bits in 0..(1usize << n_env) {
            let mut a = *amp;
            let mut index = s * strides[0];
            for (j, w) in purif.iter().enumerate() {
                let b = (bits >> (n_env - 1 - j)) & 1;
                a *= w[b];
                index += b * (strides[1 + j] + strides[1 + n_env + j]);
            }
            amps[index] = a;
        }
    }
    let mut state = StateVector::normalized(layout, amps)?;
    let cnot = controlled_shift(2, 2);
    for j in 1..=n_env {
        state = state.apply_unitary(&cnot, &[0, j])?;
    }
    Ok(state)
}
