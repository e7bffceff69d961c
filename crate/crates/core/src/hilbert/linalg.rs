//! Small dense helpers shared by the state engine and the analyses.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigenvalues at or below this contribute nothing to an entropy.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

/// Eigenvalues of `(m + m†)/2`, ascending. Values in `[-1e-10, 0)` are clamped to 0.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()).scale(0.5);
    let mut eig: Vec<f64> = sym
        .symmetric_eigenvalues()
        .iter()
        .map(|&l| if (-1e-10..0.0).contains(&l) { 0.0 } else { l })
        .collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Shannon entropy in bits of a spectrum; entries `<= 1e-12` are skipped.
pub fn spectrum_entropy(eigenvalues: &[f64]) -> f64 {
    let h: f64 = eigenvalues
        .iter()
        .filter(|&&l| l > ENTROPY_CUTOFF)
        .map(|&l| -l * l.log2())
        .sum();
    h.max(0.0)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest elementwise deviation of `u u†` from the identity.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let p = u * u.adjoint();
    let mut worst = 0.0f64;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest elementwise deviation of `m` from `m†`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        let phase = if n > 0.0 { d / n } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Trace norm of a Hermitian matrix divided by two.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a - b;
    let sym = (&diff + diff.adjoint()).scale(0.5);
    0.5 * sym
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [1, 2, 4, 9] {
            let u = haar_unitary(dim, &mut rng);
            assert!(unitarity_deviation(&u) < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn spectrum_entropy_values() {
        assert_eq!(spectrum_entropy(&[0.0, 1.0]), 0.0);
        assert!((spectrum_entropy(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
        // -(1/4 lg 1/4 + 3/4 lg 3/4) = 0.5 + 0.75*0.415037... = 0.811278...
        assert!((spectrum_entropy(&[0.25, 0.75]) - 0.811_278_124_459_132_8).abs() < 1e-12);
    }

    #[test]
    fn clamps_tiny_negative_eigenvalues() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(-5e-11, 0.0),
            ONE,
        ]));
        assert_eq!(hermitian_eigenvalues(&m), vec![0.0, 1.0]);
    }
}
