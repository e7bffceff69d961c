//! Numerical checks of the structural results behind einselection and
//! Born's rule: the repeatability constraint, pointer-basis selection,
//! envariance under swaps and phase shifts, and branch counting after
//! fine-graining.

use nalgebra::DVector;
use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::controlled_shift;
use crate::hilbert::linalg::{self, CMatrix, ONE, ZERO};
use crate::hilbert::{DensityOperator, HilbertError, Role, StateVector, SubsystemLayout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoundationsError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("operator {0} is not Hermitian")]
    NotHermitian(usize),
    #[error("operators {0} and {1} do not commute (commutator norm {2:e})")]
    NoCommonEigenbasis(usize, usize, f64),
    #[error("invalid basis labels ({0}, {1})")]
    InvalidLabels(usize, usize),
    #[error("wrong support: {0}")]
    WrongSupport(String),
    #[error("envariance violated: restoration fidelity {0}")]
    EnvarianceViolated(f64),
    #[error("invalid fine-graining spec mu={0}, nu={1}")]
    InvalidSpec(u64, u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no fraction with denominator <= {max_denominator} within {tol:e} of {target}")]
    ToleranceUnreachable {
        target: f64,
        tol: f64,
        max_denominator: u64,
    },
}

// ---------------------------------------------------------------------------
// Repeatability
// ---------------------------------------------------------------------------

/// Scalar products entering `⟨u|v⟩⟨A_0|A_0⟩ = ⟨u|v⟩⟨A_u|A_v⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordPair {
    pub overlap_sys: Complex64,
    pub overlap_rec: Complex64,
}

impl RecordPair {
    /// `|⟨u|v⟩ (1 - ⟨A_u|A_v⟩)|`.
    pub fn identity_residual(&self) -> f64 {
        (self.overlap_sys * (ONE - self.overlap_rec)).norm()
    }
}

/// Whether a unitary could map `|u⟩|A_0⟩ ↦ |u⟩|A_u⟩` and `|v⟩|A_0⟩ ↦ |v⟩|A_v⟩`.
pub fn repeatability_consistent(pair: &RecordPair) -> bool {
    pair.identity_residual() <= 1e-10
}

/// How well a copier on `S ⊗ A` (blank record `|0⟩`) realizes repeatable
/// records of `u` and `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopierOutcome {
    /// `1 - ‖(⟨u| ⊗ 1) U |u,0⟩‖²`: weight of the output outside `|u⟩ ⊗ anything`.
    pub deviation_u: f64,
    pub deviation_v: f64,
    /// `⟨A_u|A_v⟩` of the normalized records.
    pub record_overlap: Complex64,
    pub system_overlap: Complex64,
}

impl CopierOutcome {
    /// Worst deviation from the copy map plus record indistinguishability.
    pub fn residual(&self) -> f64 {
        self.deviation_u.max(self.deviation_v) + self.record_overlap.norm()
    }

    pub fn record_pair(&self) -> RecordPair {
        RecordPair {
            overlap_sys: self.system_overlap,
            overlap_rec: self.record_overlap,
        }
    }
}

fn single_amps(s: &StateVector) -> Result<&[Complex64], FoundationsError> {
    if s.layout().len() != 1 {
        return Err(FoundationsError::InvalidParameter(
            "expected a single-subsystem state".into(),
        ));
    }
    Ok(s.amplitudes())
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Record left by `copier` (dimension `d² × d²`, record dimension `d`) on `s`,
/// and the weight that stayed on `|s⟩`.
fn record_of(copier: &CMatrix, s: &[Complex64]) -> (Vec<Complex64>, f64) {
    let d = s.len();
    let mut input = DVector::from_element(d * d, ZERO);
    for (i, a) in s.iter().enumerate() {
        input[i * d] = *a;
    }
    let out = copier * input;
    let rec: Vec<Complex64> = (0..d)
        .map(|j| (0..d).map(|i| s[i].conj() * out[i * d + j]).sum())
        .collect();
    let weight: f64 = rec.iter().map(|r| r.norm_sqr()).sum();
    (rec, weight)
}

pub fn evaluate_copier(
    u: &StateVector,
    v: &StateVector,
    copier: &CMatrix,
) -> Result<CopierOutcome, FoundationsError> {
    let (ua, va) = (single_amps(u)?, single_amps(v)?);
    let d = ua.len();
    if va.len() != d {
        return Err(HilbertError::LayoutMismatch.into());
    }
    if copier.nrows() != d * d || copier.ncols() != d * d {
        return Err(HilbertError::DimensionMismatch {
            expected: d * d,
            found: copier.nrows(),
        }
        .into());
    }
    let (ru, wu) = record_of(copier, ua);
    let (rv, wv) = record_of(copier, va);
    let record_overlap = if wu > 1e-300 && wv > 1e-300 {
        dot(&ru, &rv) / (wu.sqrt() * wv.sqrt())
    } else {
        ONE
    };
    Ok(CopierOutcome {
        deviation_u: (1.0 - wu).max(0.0),
        deviation_v: (1.0 - wv).max(0.0),
        record_overlap,
        system_overlap: dot(ua, va),
    })
}

/// Lower bound on [`CopierOutcome::residual`] for any unitary copier.
///
/// Unitarity gives `|⟨u|v⟩| ≤ |⟨u|v⟩| r + 2 sqrt(D)` with `D` the worst
/// deviation and `r = |⟨A_u|A_v⟩|`; minimizing `D + r` under that constraint
/// yields `|⟨u|v⟩|² / 4`.
pub fn copier_residual_floor(system_overlap: f64) -> f64 {
    system_overlap * system_overlap / 4.0
}

/// Orthonormal basis with `first` as its first column (Gram–Schmidt against
/// the computational basis).
fn completed_basis(first: &[Complex64]) -> CMatrix {
    let d = first.len();
    let mut cols: Vec<Vec<Complex64>> = vec![first.to_vec()];
    for k in 0..d {
        if cols.len() == d {
            break;
        }
        let mut e = vec![ZERO; d];
        e[k] = ONE;
        for c in &cols {
            let p = dot(c, &e);
            for (x, y) in e.iter_mut().zip(c) {
                *x -= p * y;
            }
        }
        let n = e.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            cols.push(e.into_iter().map(|x| x / n).collect());
        }
    }
    CMatrix::from_fn(d, d, |i, j| cols[j][i])
}

/// Controlled shift in the orthonormal basis whose first element is `first`.
pub fn controlled_copy_in_basis(first: &[Complex64]) -> CMatrix {
    let d = first.len();
    let w = completed_basis(first);
    let big = linalg::kron(&w, &linalg::identity(d));
    &big * controlled_shift(d, d) * big.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CopierSearch {
    pub best_residual: f64,
    pub floor: f64,
    pub trials: usize,
}

/// Randomized search for a unitary copier recording both `u` and `v`
/// distinguishably. Candidates: controlled copies in the bases of `u` and
/// `v`, Haar-random unitaries, then a local refinement of the best one.
pub fn copier_search(
    u: &StateVector,
    v: &StateVector,
    trials: usize,
    seed: u64,
) -> Result<CopierSearch, FoundationsError> {
    let d = single_amps(u)?.len();
    let floor = copier_residual_floor(u.inner(v)?.norm());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval = |c: &CMatrix| evaluate_copier(u, v, c).map(|o| o.residual());

    let mut best_u = controlled_copy_in_basis(u.amplitudes());
    let mut best = eval(&best_u)?;
    let alt = controlled_copy_in_basis(v.amplitudes());
    let r = eval(&alt)?;
    if r < best {
        best = r;
        best_u = alt;
    }
    let global = trials / 2;
    for _ in 0..global {
        let cand = linalg::haar_unitary(d * d, &mut rng);
        let r = eval(&cand)?;
        if r < best {
            best = r;
            best_u = cand;
        }
    }
    let mut step = 0.3;
    for i in global..trials {
        let noise = CMatrix::from_fn(d * d, d * d, |_, _| linalg::complex_gaussian(&mut rng));
        let cand = (&best_u + noise.scale(step)).qr().q();
        let r = eval(&cand)?;
        if r < best {
            best = r;
            best_u = cand;
        } else if (i - global) % 50 == 49 {
            step = (step * 0.7).max(1e-4);
        }
    }
    Ok(CopierSearch {
        best_residual: best,
        floor,
        trials,
    })
}

/// A copier that satisfies the repeatable-record map for `u` and `v` by
/// construction.
#[derive(Debug, Clone)]
pub struct RepeatableTriple {
    pub u: StateVector,
    pub v: StateVector,
    pub copier: CMatrix,
}

/// Random qutrit copier `Σ_k |b_k⟩⟨b_k| ⊗ V_k` over a Haar basis `b_k`.
/// Half the draws share a record between `b_0` and `b_1`, so `u` and `v` may
/// be nonorthogonal vectors of that record-blind subspace.
pub fn random_repeatable_triple<R: Rng + ?Sized>(rng: &mut R) -> RepeatableTriple {
    let d = 3;
    let w = linalg::haar_unitary(d, rng);
    let mut records: Vec<CMatrix> = (0..d).map(|_| linalg::haar_unitary(d, rng)).collect();
    let shared = rng.random_bool(0.5);
    if shared {
        records[1] = records[0].clone();
    }
    let mut copier = CMatrix::zeros(d * d, d * d);
    for (k, vk) in records.iter().enumerate() {
        let b = w.column(k);
        let proj = b * b.adjoint();
        copier += linalg::kron(&proj, vk);
    }
    let col = |k: usize| -> Vec<Complex64> { w.column(k).iter().copied().collect() };
    let mix = |rng: &mut R| -> Vec<Complex64> {
        let a = linalg::complex_gaussian(rng);
        let b = linalg::complex_gaussian(rng);
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        (0..d)
            .map(|i| (a * w[(i, 0)] + b * w[(i, 1)]) / n)
            .collect()
    };
    let (ua, va) = match (shared, rng.random_range(0..3)) {
        (true, 0) => (mix(rng), mix(rng)),
        (_, 1) => {
            let k = rng.random_range(0..d);
            (col(k), col(k))
        }
        _ => {
            let i = rng.random_range(0..d);
            let j = (i + rng.random_range(1..d)) % d;
            (col(i), col(j))
        }
    };
    RepeatableTriple {
        u: StateVector::normalized(SubsystemLayout::canonical(vec![d]).unwrap(), ua).unwrap(),
        v: StateVector::normalized(SubsystemLayout::canonical(vec![d]).unwrap(), va).unwrap(),
        copier,
    }
}

// ---------------------------------------------------------------------------
// Pointer observable
// ---------------------------------------------------------------------------

/// System parts `S_i` of an interaction `Σ_i S_i ⊗ A_i`.
#[derive(Debug, Clone)]
pub struct PointerProblem {
    pub terms: Vec<(CMatrix, String)>,
    pub system_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointerBasis {
    /// Orthonormal basis vectors.
    pub vectors: Vec<Vec<Complex64>>,
    /// `eigenvalues[k][i]`: eigenvalue of term `i` on vector `k`.
    pub eigenvalues: Vec<Vec<f64>>,
}

const COMMUTE_TOL: f64 = 1e-8;

fn restricted(op: &CMatrix, basis: &CMatrix) -> CMatrix {
    basis.adjoint() * op * basis
}

/// Splits the columns spanned by `basis` into eigenspaces of `op`.
fn split_block(op: &CMatrix, basis: &CMatrix, scale: f64) -> Vec<(f64, CMatrix)> {
    let r = restricted(op, basis);
    let r = (&r + r.adjoint()).scale(0.5);
    let eig = r.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let tol = COMMUTE_TOL * scale.max(1.0);
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for k in order {
        let lambda = eig.eigenvalues[k];
        match groups.last_mut() {
            Some((first, members)) if (*first - lambda).abs() <= tol => members.push(k),
            _ => groups.push((lambda, vec![k])),
        }
    }
    groups
        .into_iter()
        .map(|(lambda, members)| {
            let sub = CMatrix::from_fn(basis.ncols(), members.len(), |i, j| {
                eig.eigenvectors[(i, members[j])]
            });
            (lambda, basis * sub)
        })
        .collect()
}

/// Orthonormal basis of `span(block)` from projecting `e_0, e_1, ...` in
/// order; each vector's first significant component is real and positive.
fn canonical_block(block: &CMatrix) -> Vec<Vec<Complex64>> {
    let d = block.nrows();
    let proj = block * block.adjoint();
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for k in 0..d {
        if out.len() == block.ncols() {
            break;
        }
        let mut v: Vec<Complex64> = proj.column(k).iter().copied().collect();
        for c in &out {
            let p = dot(c, &v);
            for (x, y) in v.iter_mut().zip(c) {
                *x -= p * y;
            }
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-6 {
            let lead = v
                .iter()
                .find(|x| x.norm() > 1e-8 * n)
                .copied()
                .unwrap_or(ONE);
            let phase = lead.conj() / lead.norm();
            out.push(v.into_iter().map(|x| x * phase / n).collect());
        }
    }
    out
}

/// Common eigenbasis of the system operators of an interaction. Degenerate
/// joint eigenspaces are resolved by lowest-index canonicalization; vectors
/// are ordered by descending eigenvalue of the first term, then the next.
pub fn pointer_observable(problem: &PointerProblem) -> Result<PointerBasis, FoundationsError> {
    let d = problem.system_dim;
    for (i, (s, _)) in problem.terms.iter().enumerate() {
        if s.nrows() != d || s.ncols() != d {
            return Err(HilbertError::DimensionMismatch {
                expected: d,
                found: s.nrows(),
            }
            .into());
        }
        if linalg::hermiticity_deviation(s) > 1e-10 {
            return Err(FoundationsError::NotHermitian(i));
        }
    }
    for i in 0..problem.terms.len() {
        for j in i + 1..problem.terms.len() {
            let c = linalg::max_abs(&linalg::commutator(
                &problem.terms[i].0,
                &problem.terms[j].0,
            ));
            if c > COMMUTE_TOL {
                return Err(FoundationsError::NoCommonEigenbasis(i, j, c));
            }
        }
    }
    let mut blocks: Vec<(Vec<f64>, CMatrix)> = vec![(Vec::new(), linalg::identity(d))];
    for (s, _) in &problem.terms {
        let scale = linalg::max_abs(s);
        blocks = blocks
            .into_iter()
            .flat_map(|(vals, basis)| {
                split_block(s, &basis, scale)
                    .into_iter()
                    .map(move |(l, b)| {
                        let mut v = vals.clone();
                        v.push(l);
                        (v, b)
                    })
            })
            .collect();
    }
    let mut vectors = Vec::with_capacity(d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (vals, block) in blocks {
        for v in canonical_block(&block) {
            vectors.push(v);
            eigenvalues.push(vals.clone());
        }
    }
    Ok(PointerBasis {
        vectors,
        eigenvalues,
    })
}

// ---------------------------------------------------------------------------
// Envariance
// ---------------------------------------------------------------------------

/// A unitary acting on a subset of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUnitary {
    pub targets: Vec<usize>,
    pub matrix: CMatrix,
}

impl LocalUnitary {
    pub fn new(targets: Vec<usize>, matrix: CMatrix) -> Result<Self, FoundationsError> {
        let dev = linalg::unitarity_deviation(&matrix);
        if dev > crate::hilbert::UNITARY_TOL {
            return Err(HilbertError::NotUnitary(dev).into());
        }
        Ok(Self { targets, matrix })
    }

    /// Permutation of basis states: `|i⟩ ↦ |perm[i]⟩`.
    pub fn permutation(targets: Vec<usize>, perm: &[usize]) -> Self {
        let d = perm.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, &p) in perm.iter().enumerate() {
            m[(p, i)] = ONE;
        }
        Self { targets, matrix: m }
    }

    /// Exchanges basis states `a` and `b` of a `dim`-dimensional target.
    pub fn swap(targets: Vec<usize>, dim: usize, a: usize, b: usize) -> Self {
        let mut perm: Vec<usize> = (0..dim).collect();
        perm.swap(a, b);
        Self::permutation(targets, &perm)
    }

    fn apply(&self, state: &StateVector) -> Result<StateVector, HilbertError> {
        Ok(state.apply_unchecked(&self.matrix, &self.targets))
    }
}

/// `|a⟩⟨a| + e^{iφ}|b⟩⟨b|` on a `dim`-dimensional subsystem, identity elsewhere.
pub fn phase_operator(
    dim: usize,
    phi: f64,
    labels: (usize, usize),
) -> Result<CMatrix, FoundationsError> {
    let (a, b) = labels;
    if a == b || a >= dim || b >= dim {
        return Err(FoundationsError::InvalidLabels(a, b));
    }
    let mut m = linalg::identity(dim);
    m[(b, b)] = Complex64::from_polar(1.0, phi);
    Ok(m)
}

/// Applies [`phase_operator`] to subsystem `subsystem`.
pub fn phase_shift(
    state: &StateVector,
    phi: f64,
    subsystem: usize,
    labels: (usize, usize),
) -> Result<StateVector, FoundationsError> {
    let dim = *state
        .layout()
        .dims()
        .get(subsystem)
        .ok_or_else(|| HilbertError::InvalidIndices(format!("subsystem {subsystem}")))?;
    let m = phase_operator(dim, phi, labels)?;
    Ok(state.apply_unitary(&m, &[subsystem])?)
}

/// Unitary on a space of dimension `dim` that maps `|a⟩ ↦ e^{iχ}|b⟩`,
/// `|b⟩ ↦ e^{-iχ}|a⟩` and acts as identity on the complement of their span.
/// `a` and `b` must be orthonormal.
pub fn record_swap(
    a: &[Complex64],
    b: &[Complex64],
    chi: f64,
) -> Result<CMatrix, FoundationsError> {
    let va = DVector::from_column_slice(a);
    let vb = DVector::from_column_slice(b);
    let ph = Complex64::from_polar(1.0, chi);
    let m = linalg::identity(a.len()) - &va * va.adjoint() - &vb * vb.adjoint()
        + (&vb * va.adjoint()).scale(1.0) * ph
        + (&va * vb.adjoint()) * ph.conj();
    let dev = linalg::unitarity_deviation(&m);
    if dev > 1e-8 {
        return Err(HilbertError::NotUnitary(dev).into());
    }
    Ok(m)
}

/// Unitary multiplying `|b⟩` by `e^{iφ}`, identity on its orthogonal complement.
pub fn record_phase(b: &[Complex64], phi: f64) -> CMatrix {
    let vb = DVector::from_column_slice(b);
    let ph = Complex64::from_polar(1.0, phi);
    linalg::identity(b.len()) + (&vb * vb.adjoint()) * (ph - ONE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvarianceReport {
    /// `|⟨ψ| counter · op |ψ⟩|`.
    pub global_fidelity: f64,
    /// Trace distance of the reduced state on the op's support before and after op alone.
    pub rho_s_distance: f64,
}

impl EnvarianceReport {
    pub fn holds(&self) -> bool {
        (1.0 - self.global_fidelity).abs() <= 1e-10
    }
}

fn check_support(
    state: &StateVector,
    op: &LocalUnitary,
    counter: &LocalUnitary,
) -> Result<(), FoundationsError> {
    let sys = state
        .layout()
        .system_index()
        .ok_or_else(|| FoundationsError::WrongSupport("state has no system".into()))?;
    if !op.targets.contains(&sys) {
        return Err(FoundationsError::WrongSupport(
            "operation must act on the system".into(),
        ));
    }
    if counter.targets.contains(&sys) {
        return Err(FoundationsError::WrongSupport(
            "counter-operation touches the system".into(),
        ));
    }
    if op.targets.iter().any(|t| counter.targets.contains(t)) {
        return Err(FoundationsError::WrongSupport(
            "operation and counter-operation share subsystems".into(),
        ));
    }
    if op
        .targets
        .iter()
        .any(|&t| state.layout().roles()[t].is_env())
    {
        return Err(FoundationsError::WrongSupport(
            "operation touches the environment".into(),
        ));
    }
    Ok(())
}

/// `|⟨ψ| counter · op |ψ⟩|` only.
pub fn envariance_fidelity(
    state: &StateVector,
    op: &LocalUnitary,
    counter: &LocalUnitary,
) -> Result<f64, FoundationsError> {
    check_support(state, op, counter)?;
    let restored = counter.apply(&op.apply(state)?)?;
    Ok(state.fidelity(&restored)?)
}

pub fn envariance_check(
    state: &StateVector,
    op: &LocalUnitary,
    counter: &LocalUnitary,
) -> Result<EnvarianceReport, FoundationsError> {
    let global_fidelity = envariance_fidelity(state, op, counter)?;
    let mut support = op.targets.clone();
    support.sort_unstable();
    let before = state.partial_trace(&support)?;
    let after = op.apply(state)?.partial_trace(&support)?;
    Ok(EnvarianceReport {
        global_fidelity,
        rho_s_distance: before.trace_distance(&after)?,
    })
}

/// Even two-branch state `(|0⟩|a⟩ + e^{iχ}|1⟩|b⟩)/√2` with product records
/// `|a⟩ = ⊗_j V_j|0⟩`, `|b⟩ = ⊗_j V_j|1⟩` over Haar-random qubit unitaries `V_j`.
#[derive(Debug, Clone)]
pub struct EvenBranchState {
    pub state: StateVector,
    pub record_a: Vec<Complex64>,
    pub record_b: Vec<Complex64>,
    pub chi: f64,
}

impl EvenBranchState {
    pub fn random<R: Rng + ?Sized>(n_env: usize, rng: &mut R) -> Result<Self, FoundationsError> {
        if n_env == 0 {
            return Err(FoundationsError::InvalidParameter("n_env = 0".into()));
        }
        let mut a = vec![ONE];
        let mut b = vec![ONE];
        for _ in 0..n_env {
            let v = linalg::haar_unitary(2, rng);
            let grow = |rec: &[Complex64], col: usize| -> Vec<Complex64> {
                rec.iter()
                    .flat_map(|x| [x * v[(0, col)], x * v[(1, col)]])
                    .collect()
            };
            a = grow(&a, 0);
            b = grow(&b, 1);
        }
        let chi = rng.random_range(0.0..std::f64::consts::TAU);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ph = Complex64::from_polar(h, chi);
        let amps = a
            .iter()
            .map(|x| x * h)
            .chain(b.iter().map(|x| x * ph))
            .collect();
        let state = StateVector::new(SubsystemLayout::qubits(n_env)?, amps)?;
        Ok(Self {
            state,
            record_a: a,
            record_b: b,
            chi,
        })
    }

    pub fn env_targets(&self) -> Vec<usize> {
        (1..self.state.layout().len()).collect()
    }

    /// Counterswap of the two records carrying phase `chi`; restores the
    /// state after a system swap only when `chi` equals the branch phase.
    pub fn counterswap(&self, chi: f64) -> Result<LocalUnitary, FoundationsError> {
        let m = record_swap(&self.record_a, &self.record_b, chi)?;
        Ok(LocalUnitary {
            targets: self.env_targets(),
            matrix: m,
        })
    }

    /// Countershift `e^{-iφ}` on record `b`.
    pub fn countershift(&self, phi: f64) -> LocalUnitary {
        LocalUnitary {
            targets: self.env_targets(),
            matrix: record_phase(&self.record_b, -phi),
        }
    }
}

// ---------------------------------------------------------------------------
// Decohered reduced state, fine-graining and Born's rule
// ---------------------------------------------------------------------------

/// Reduced state of `S ⊗ A` after the apparatus pointer is recorded by an
/// environment qubit with `⟨ε_↑|ε_↓⟩ = c`.
pub fn decohered_rho_sa(
    alpha: Complex64,
    beta: Complex64,
    record_overlap: f64,
) -> Result<DensityOperator, FoundationsError> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(FoundationsError::InvalidParameter(format!(
            "|α|² + |β|² = {norm}"
        )));
    }
    if !(0.0..=1.0).contains(&record_overlap) {
        return Err(FoundationsError::InvalidParameter(format!(
            "record overlap {record_overlap}"
        )));
    }
    let layout = SubsystemLayout::new(
        vec![2, 2, 2],
        vec![Role::System, Role::Apparatus, Role::Env(1)],
    )?;
    let c = record_overlap;
    let s = (1.0 - c * c).max(0.0).sqrt();
    // α|↑A_↑ε_↑⟩ + β|↓A_↓ε_↓⟩ with ε_↑ = |0⟩, ε_↓ = c|0⟩ + s|1⟩
    let mut amps = vec![ZERO; 8];
    amps[0b000] = alpha;
    amps[0b110] = beta * c;
    amps[0b111] = beta * s;
    let psi = StateVector::new(layout, amps)?;
    let rho = psi.partial_trace(&[0, 1])?;
    rho.validate()?;
    Ok(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FinegrainSpec {
    pub mu: u64,
    pub nu: u64,
}

impl FinegrainSpec {
    pub fn new(mu: u64, nu: u64) -> Result<Self, FoundationsError> {
        if mu == 0 || nu == 0 {
            return Err(FoundationsError::InvalidSpec(mu, nu));
        }
        Ok(Self { mu, nu })
    }

    pub fn branches(&self) -> usize {
        (self.mu + self.nu) as usize
    }

    /// Pointer label of fine-grained branch `k`: 0 (↑) for `k < μ`, else 1 (↓).
    pub fn label(&self, k: usize) -> usize {
        usize::from(k as u64 >= self.mu)
    }
}

/// `Σ_k |l_k⟩|a_k⟩|e_k⟩ / sqrt(μ+ν)` with `l_k = ↑` for the first `μ`
/// branches. Every adjacent pair of branches is checked to be envariantly
/// swappable (a swap on `S ⊗ A` undone by a swap of `e_k` on `E`); adjacent
/// transpositions generate all permutations.
pub fn finegrain_state(spec: &FinegrainSpec) -> Result<StateVector, FoundationsError> {
    let spec = FinegrainSpec::new(spec.mu, spec.nu)?;
    let n = spec.branches();
    let layout = SubsystemLayout::new(
        vec![2, n, n],
        vec![Role::System, Role::Apparatus, Role::Env(1)],
    )?;
    let strides = layout.strides();
    let mut amps = vec![ZERO; layout.total_dim()];
    let a = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    for k in 0..n {
        amps[spec.label(k) * strides[0] + k * strides[1] + k] = a;
    }
    let state = StateVector::normalized(layout, amps)?;
    for j in 0..n.saturating_sub(1) {
        let (op, counter) = branch_swap(&spec, j, j + 1);
        let f = envariance_fidelity(&state, &op, &counter)?;
        if (1.0 - f).abs() > 1e-10 {
            return Err(FoundationsError::EnvarianceViolated(f));
        }
    }
    Ok(state)
}

/// Swap of fine-grained branches `j` and `k` on `S ⊗ A` and the matching
/// counterswap of `|e_j⟩, |e_k⟩`.
pub fn branch_swap(spec: &FinegrainSpec, j: usize, k: usize) -> (LocalUnitary, LocalUnitary) {
    let n = spec.branches();
    let sa = |k: usize| spec.label(k) * n + k;
    let op = LocalUnitary::swap(vec![0, 1], 2 * n, sa(j), sa(k));
    let counter = LocalUnitary::swap(vec![2], n, j, k);
    (op, counter)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornProbabilities {
    pub up: Ratio<u64>,
    pub down: Ratio<u64>,
    pub branches: usize,
    /// Diagonal of the reduced system state of the fine-grained state.
    pub reduced_up: f64,
    pub reduced_down: f64,
}

impl BornProbabilities {
    /// Largest gap between the counted rationals and the reduced populations.
    pub fn max_deviation(&self) -> f64 {
        let to_f = |r: &Ratio<u64>| *r.numer() as f64 / *r.denom() as f64;
        (to_f(&self.up) - self.reduced_up)
            .abs()
            .max((to_f(&self.down) - self.reduced_down).abs())
    }
}

/// Counts the equiprobable fine-grained branches carrying each pointer label.
pub fn born_probabilities(spec: &FinegrainSpec) -> Result<BornProbabilities, FoundationsError> {
    let state = finegrain_state(spec)?;
    let strides = state.layout().strides();
    let weights: Vec<(usize, f64)> = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 1e-24)
        .map(|(i, a)| (i / strides[0], a.norm_sqr()))
        .collect();
    let w0 = weights[0].1;
    if let Some((_, w)) = weights.iter().find(|(_, w)| (w - w0).abs() > 1e-12) {
        return Err(FoundationsError::EnvarianceViolated(w / w0));
    }
    let total = weights.len() as u64;
    let ups = weights.iter().filter(|(l, _)| *l == 0).count() as u64;
    let pops = state.partial_trace(&[0])?.populations();
    Ok(BornProbabilities {
        up: Ratio::new(ups, total),
        down: Ratio::new(total - ups, total),
        branches: weights.len(),
        reduced_up: pops[0],
        reduced_down: pops[1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RationalApprox {
    pub mu: u64,
    pub nu: u64,
    pub value: f64,
    pub error: f64,
}

/// Smallest-denominator `μ/(μ+ν)` within `tol` of `alpha_sq`, with `μ, ν ≥ 1`
/// and `μ + ν ≤ max_denominator`, searched over convergents and
/// semiconvergents of the continued fraction of `alpha_sq`.
pub fn born_incommensurate(
    alpha_sq: f64,
    tol: f64,
    max_denominator: u64,
) -> Result<RationalApprox, FoundationsError> {
    if !(alpha_sq > 0.0 && alpha_sq < 1.0) {
        return Err(FoundationsError::InvalidParameter(format!(
            "alpha_sq = {alpha_sq} outside (0, 1)"
        )));
    }
    let unreachable = FoundationsError::ToleranceUnreachable {
        target: alpha_sq,
        tol,
        max_denominator,
    };
    let accept = |p: u64, q: u64| -> Option<RationalApprox> {
        if p == 0 || p >= q {
            return None;
        }
        let value = p as f64 / q as f64;
        let error = (value - alpha_sq).abs();
        (error <= tol).then_some(RationalApprox {
            mu: p,
            nu: q - p,
            value,
            error,
        })
    };
    // convergents h/k with h_{-1}/k_{-1} = 1/0, h_{-2}/k_{-2} = 0/1
    let (mut h_prev2, mut k_prev2) = (0u64, 1u64);
    let (mut h_prev, mut k_prev) = (1u64, 0u64);
    let mut x = alpha_sq;
    for _ in 0..64 {
        let a = x.floor();
        if a > max_denominator as f64 {
            break;
        }
        let a = a as u64;
        // semiconvergents for t = 1..=a (t = 0 repeats the previous convergent)
        for t in 1..=a.max(1) {
            let h = t * h_prev + h_prev2;
            let k = t * k_prev + k_prev2;
            if k > max_denominator {
                return Err(unreachable);
            }
            if let Some(r) = accept(h, k) {
                return Ok(r);
            }
        }
        let h = a * h_prev + h_prev2;
        let k = a * k_prev + k_prev2;
        (h_prev2, k_prev2, h_prev, k_prev) = (h_prev, k_prev, h, k);
        let frac = x - a as f64;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    Err(unreachable)
}
