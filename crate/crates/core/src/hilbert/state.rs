use num_complex::Complex64;

use super::density::DensityOperator;
use super::linalg::{self, CMatrix, ZERO};
use super::{HilbertError, Role, SubsystemLayout};

/// Normalization tolerance of a state vector.
pub const NORM_TOL: f64 = 1e-10;
/// `apply_unitary` rejects matrices whose `u u†` deviates from identity by more.
pub const UNITARY_TOL: f64 = 1e-8;

/// Normalized pure state on the tensor product described by `layout`.
///
/// Amplitudes are stored row-major with subsystem 0 as the most significant
/// index digit, so for a system qubit and two environment qubits the basis
/// order is `|s e1 e2⟩ = |000⟩, |001⟩, |010⟩, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: SubsystemLayout,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(layout: SubsystemLayout, amps: Vec<Complex64>) -> Result<Self, HilbertError> {
        let state = Self::from_parts(layout, amps)?;
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(HilbertError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(layout: SubsystemLayout, amps: Vec<Complex64>) -> Result<Self, HilbertError> {
        let mut state = Self::from_parts(layout, amps)?;
        let norm = state.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(HilbertError::NotNormalized(norm));
        }
        state.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(state)
    }

    fn from_parts(layout: SubsystemLayout, amps: Vec<Complex64>) -> Result<Self, HilbertError> {
        layout.check_capacity()?;
        if amps.len() != layout.total_dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: layout.total_dim(),
                found: amps.len(),
            });
        }
        Ok(Self { layout, amps })
    }

    /// Computational basis state `|digits⟩`.
    pub fn basis(layout: SubsystemLayout, digits: &[usize]) -> Result<Self, HilbertError> {
        if digits.len() != layout.len() || digits.iter().zip(layout.dims()).any(|(&x, &d)| x >= d) {
            return Err(HilbertError::InvalidIndices(format!(
                "basis digits {digits:?}"
            )));
        }
        let index = digits
            .iter()
            .zip(layout.strides())
            .map(|(&x, s)| x * s)
            .sum::<usize>();
        let mut amps = vec![ZERO; layout.total_dim()];
        amps[index] = linalg::ONE;
        Self::new(layout, amps)
    }

    /// Single-subsystem state in the canonical layout.
    pub fn single(amps: Vec<Complex64>) -> Result<Self, HilbertError> {
        let layout = SubsystemLayout::canonical(vec![amps.len()])?;
        Self::new(layout, amps)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Same amplitudes under a different role assignment with equal dims.
    pub fn relabel(self, layout: SubsystemLayout) -> Result<Self, HilbertError> {
        if layout.dims() != self.layout.dims() {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(Self {
            layout,
            amps: self.amps,
        })
    }

    /// Tensor product of `parts`, in order.
    ///
    /// The concatenated roles are kept when they form a valid layout;
    /// otherwise the result gets canonical roles (subsystem 0 is the system,
    /// the rest are `Env(1..)`).
    pub fn tensor_compose(parts: &[StateVector]) -> Result<Self, HilbertError> {
        let (first, rest) = parts.split_first().ok_or(HilbertError::EmptyInput)?;
        let mut dims = first.layout.dims().to_vec();
        let mut roles = first.layout.roles().to_vec();
        let mut amps = first.amps.clone();
        for part in rest {
            dims.extend_from_slice(part.layout.dims());
            roles.extend_from_slice(part.layout.roles());
            let total: f64 = dims.iter().map(|&d| (d as f64).log2()).sum();
            if total > super::layout::MAX_QUBIT_EQUIVALENTS + 1e-9 {
                return Err(HilbertError::CapacityExceeded(total));
            }
            let mut next = Vec::with_capacity(amps.len() * part.amps.len());
            for a in &amps {
                next.extend(part.amps.iter().map(|b| a * b));
            }
            amps = next;
        }
        let layout = match SubsystemLayout::new(dims.clone(), roles) {
            Ok(l) => l,
            Err(HilbertError::InvalidLayout(_)) => SubsystemLayout::canonical(dims)?,
            Err(e) => return Err(e),
        };
        Self::new(layout, amps)
    }

    /// Applies `u` to the subsystems `targets` (listed order defines the
    /// digit order of `u`), identity elsewhere.
    pub fn apply_unitary(&self, u: &CMatrix, targets: &[usize]) -> Result<Self, HilbertError> {
        self.check_targets(targets)?;
        let dt: usize = targets.iter().map(|&t| self.layout.dims()[t]).product();
        if u.nrows() != dt || u.ncols() != dt {
            return Err(HilbertError::DimensionMismatch {
                expected: dt,
                found: u.nrows(),
            });
        }
        let dev = linalg::unitarity_deviation(u);
        if dev > UNITARY_TOL {
            return Err(HilbertError::NotUnitary(dev));
        }
        Ok(self.apply_unchecked(u, targets))
    }

    fn check_targets(&self, targets: &[usize]) -> Result<(), HilbertError> {
        if targets.is_empty() {
            return Err(HilbertError::InvalidIndices("no targets".into()));
        }
        let mut sorted = targets.to_vec();
        sorted.sort_unstable();
        self.layout.check_increasing(&sorted)
    }

    pub(crate) fn apply_unchecked(&self, u: &CMatrix, targets: &[usize]) -> Self {
        let dt = u.nrows();
        let t_off = self.layout.offsets(targets);
        let mut sorted = targets.to_vec();
        sorted.sort_unstable();
        let r_off = self.layout.offsets(&self.layout.complement(&sorted));
        let mut out = vec![ZERO; self.amps.len()];

        let nonzero: Vec<(usize, usize, Complex64)> = (0..dt)
            .flat_map(|i| (0..dt).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = u[(i, j)];
                (v != ZERO).then_some((i, j, v))
            })
            .collect();

        if 2 * nonzero.len() < dt * dt {
            for &base in &r_off {
                for &(i, j, v) in &nonzero {
                    out[base + t_off[i]] += v * self.amps[base + t_off[j]];
                }
            }
        } else {
            let mut buf = vec![ZERO; dt];
            for &base in &r_off {
                for (b, &o) in buf.iter_mut().zip(&t_off) {
                    *b = self.amps[base + o];
                }
                for (i, &oi) in t_off.iter().enumerate() {
                    let mut acc = ZERO;
                    for (j, b) in buf.iter().enumerate() {
                        acc += u[(i, j)] * b;
                    }
                    out[base + oi] = acc;
                }
            }
        }
        Self {
            layout: self.layout.clone(),
            amps: out,
        }
    }

    /// Amplitudes reshaped to a `dim(rows) × dim(cols)` matrix.
    fn bipartite_matrix(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        let r_off = self.layout.offsets(rows);
        let c_off = self.layout.offsets(cols);
        CMatrix::from_fn(r_off.len(), c_off.len(), |i, j| {
            self.amps[r_off[i] + c_off[j]]
        })
    }

    /// Reduced state of the subsystems `keep` (strictly increasing).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator, HilbertError> {
        let sub = self.layout.restrict(keep)?;
        let m = self.bipartite_matrix(keep, &self.layout.complement(keep));
        let rho = &m * m.adjoint();
        DensityOperator::from_parts(sub, rho)
    }

    /// Squared Schmidt coefficients across the cut `keep | rest`, computed on
    /// whichever side has the smaller dimension. Ascending.
    pub fn schmidt_spectrum(&self, keep: &[usize]) -> Result<Vec<f64>, HilbertError> {
        self.layout.check_increasing(keep)?;
        let rest = self.layout.complement(keep);
        let dk: usize = keep.iter().map(|&i| self.layout.dims()[i]).product();
        let dr = self.layout.total_dim() / dk;
        if dr == 1 {
            return Ok(vec![self.norm().powi(2)]);
        }
        let m = self.bipartite_matrix(keep, &rest);
        let gram = if dk <= dr {
            &m * m.adjoint()
        } else {
            m.adjoint() * &m
        };
        Ok(linalg::hermitian_eigenvalues(&gram))
    }

    /// Von Neumann entropy (bits) of the reduced state on `keep`.
    pub fn entropy_of_kept(&self, keep: &[usize]) -> Result<f64, HilbertError> {
        Ok(linalg::spectrum_entropy(&self.schmidt_spectrum(keep)?))
    }

    /// `|⟨self|other⟩|`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64, HilbertError> {
        Ok(self.inner(other)?.norm())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64, HilbertError> {
        if self.layout.dims() != other.layout.dims() {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn role_index(&self, role: Role) -> Option<usize> {
        self.layout.roles().iter().position(|r| *r == role)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::linalg::ONE;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell() -> StateVector {
        StateVector::new(
            SubsystemLayout::qubits(1).unwrap(),
            vec![c(FRAC_1_SQRT_2), ZERO, ZERO, c(FRAC_1_SQRT_2)],
        )
        .unwrap()
    }

    fn ghz(n: usize) -> StateVector {
        let layout = SubsystemLayout::qubits(n - 1).unwrap();
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = c(FRAC_1_SQRT_2);
        amps[(1 << n) - 1] = c(FRAC_1_SQRT_2);
        StateVector::new(layout, amps).unwrap()
    }

    #[test]
    fn tensor_compose_examples() {
        let zero = StateVector::single(vec![ONE, ZERO]).unwrap();
        let one = StateVector::single(vec![ZERO, ONE]).unwrap();
        let plus = StateVector::single(vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap();

        let zz = StateVector::tensor_compose(&[zero.clone(), zero.clone()]).unwrap();
        assert_eq!(zz.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);

        let p1 = StateVector::tensor_compose(&[plus.clone(), one.clone()]).unwrap();
        let expect = [ZERO, c(FRAC_1_SQRT_2), ZERO, c(FRAC_1_SQRT_2)];
        for (a, b) in p1.amplitudes().iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(p1.layout().roles(), &[Role::System, Role::Env(1)]);

        let three = StateVector::tensor_compose(&[plus, one, zero]).unwrap();
        assert!((three.norm() - 1.0).abs() < 1e-12);
        assert!(matches!(
            StateVector::tensor_compose(&[]),
            Err(HilbertError::EmptyInput)
        ));
    }

    #[test]
    fn apply_unitary_examples() {
        let x = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let zero = StateVector::single(vec![ONE, ZERO]).unwrap();
        let flipped = zero.apply_unitary(&x, &[0]).unwrap();
        assert_eq!(flipped.amplitudes(), &[ZERO, ONE]);

        let b = bell();
        let same = b.apply_unitary(&linalg::identity(2), &[1]).unwrap();
        assert!((same.fidelity(&b).unwrap() - 1.0).abs() < 1e-15);

        // CNOT on (0.6|0⟩ + 0.8|1⟩)|0⟩: 4×4 product by hand gives 0.6|00⟩ + 0.8|11⟩.
        let cnot = CMatrix::from_row_slice(
            4,
            4,
            &[
                ONE, ZERO, ZERO, ZERO, //
                ZERO, ONE, ZERO, ZERO, //
                ZERO, ZERO, ZERO, ONE, //
                ZERO, ZERO, ONE, ZERO,
            ],
        );
        let input = StateVector::new(
            SubsystemLayout::qubits(1).unwrap(),
            vec![c(0.6), ZERO, c(0.8), ZERO],
        )
        .unwrap();
        let out = input.apply_unitary(&cnot, &[0, 1]).unwrap();
        let expect = [c(0.6), ZERO, ZERO, c(0.8)];
        for (a, b) in out.amplitudes().iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
        // reversed target order makes qubit 1 the control
        let swapped = input.apply_unitary(&cnot, &[1, 0]).unwrap();
        assert!((swapped.fidelity(&input).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn apply_unitary_errors() {
        let b = bell();
        assert!(matches!(
            b.apply_unitary(&linalg::identity(4), &[0]),
            Err(HilbertError::DimensionMismatch { .. })
        ));
        let not_u = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(
            b.apply_unitary(&not_u, &[0]),
            Err(HilbertError::NotUnitary(_))
        ));
        assert!(b.apply_unitary(&linalg::identity(4), &[0, 0]).is_err());
        assert!(b.apply_unitary(&linalg::identity(2), &[2]).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let rho = bell().partial_trace(&[0]).unwrap();
        assert!(linalg::max_abs(&(rho.matrix() - linalg::identity(2).scale(0.5))) < 1e-15);

        let psi = StateVector::single(vec![c(0.6), Complex64::new(0.0, 0.8)]).unwrap();
        let zero = StateVector::single(vec![ONE, ZERO]).unwrap();
        let prod = StateVector::tensor_compose(&[zero, psi]).unwrap();
        let rho0 = prod.partial_trace(&[0]).unwrap();
        let proj = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        assert!(linalg::max_abs(&(rho0.matrix() - proj)) < 1e-15);

        // GHZ3 keeping {0,1}: summing |ψ⟩⟨ψ| over the third index by brute force.
        let g = ghz(3);
        let amps = g.amplitudes();
        let mut brute = CMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..2 {
                    brute[(i, j)] += amps[2 * i + k] * amps[2 * j + k].conj();
                }
            }
        }
        let rho01 = g.partial_trace(&[0, 1]).unwrap();
        assert!(linalg::max_abs(&(rho01.matrix() - &brute)) < 1e-15);
        assert!((rho01.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho01.matrix()[(3, 3)].re - 0.5).abs() < 1e-15);
        assert!(rho01.validate().is_ok());

        assert!(matches!(
            g.partial_trace(&[1, 0]),
            Err(HilbertError::InvalidIndices(_))
        ));
        assert!(g.partial_trace(&[]).is_err());
        assert!(g.partial_trace(&[3]).is_err());
    }

    #[test]
    fn entropy_of_kept_examples() {
        assert!((bell().entropy_of_kept(&[0]).unwrap() - 1.0).abs() < 1e-12);
        let zero = StateVector::single(vec![ONE, ZERO]).unwrap();
        let plus = StateVector::single(vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap();
        let prod = StateVector::tensor_compose(&[zero, plus.clone(), plus]).unwrap();
        for keep in [vec![0], vec![1], vec![0, 2], vec![0, 1, 2]] {
            assert!(prod.entropy_of_kept(&keep).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_examples() {
        let b = bell();
        assert!((b.fidelity(&b).unwrap() - 1.0).abs() < 1e-15);
        let l = SubsystemLayout::qubits(1).unwrap();
        let s00 = StateVector::basis(l.clone(), &[0, 0]).unwrap();
        let s01 = StateVector::basis(l, &[0, 1]).unwrap();
        assert_eq!(s00.fidelity(&s01).unwrap(), 0.0);
        let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_3);
        let rotated = StateVector::new(
            b.layout().clone(),
            b.amplitudes().iter().map(|a| a * phase).collect(),
        )
        .unwrap();
        assert!((b.fidelity(&rotated).unwrap() - 1.0).abs() < 1e-12);
        let single = StateVector::single(vec![ONE, ZERO]).unwrap();
        assert!(matches!(
            b.fidelity(&single),
            Err(HilbertError::LayoutMismatch)
        ));
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(matches!(
            StateVector::single(vec![ONE, ONE]),
            Err(HilbertError::NotNormalized(_))
        ));
        assert!(
            StateVector::normalized(SubsystemLayout::qubits(0).unwrap(), vec![ONE, ONE]).is_ok()
        );
    }
}
