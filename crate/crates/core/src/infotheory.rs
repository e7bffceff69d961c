//! Entropies, mutual information and partial-information plots.
//!
//! All entropies are in bits. For pure global states every subsystem entropy
//! is computed from the Schmidt spectrum on the smaller side of the cut.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hilbert::{linalg, DensityOperator, HilbertError, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("invalid density operator: {0}")]
    InvalidDensity(String),
    #[error("subsystem sets overlap or are empty")]
    OverlappingParts,
    #[error("state has no system subsystem or no environment")]
    NoEnvironment,
    #[error("information deficit {0} outside (0, 1)")]
    InvalidDelta(f64),
    #[error("system entropy {0:e} bits too small for redundancy")]
    DegenerateSystem(f64),
    #[error("no fragment size reaches (1 - δ) H_S with δ = {0}")]
    NeverReached(f64),
    #[error("plateau metric needs at least 5 environment subsystems, found {0}")]
    TooFewSizes(usize),
}

/// Below this the system is treated as unentangled.
pub const DEGENERATE_ENTROPY: f64 = 1e-6;

/// `-Σ λ lg λ` over the spectrum of `rho`.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64, InfoError> {
    rho.validate().map_err(|e| match e {
        HilbertError::InvalidDensity(msg) => InfoError::InvalidDensity(msg),
        other => other.into(),
    })?;
    Ok(linalg::spectrum_entropy(&rho.eigenvalues()))
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u
}

/// `H_A + H_B - H_AB` for disjoint subsystem sets of a pure state.
pub fn mutual_information(
    state: &StateVector,
    part_a: &[usize],
    part_b: &[usize],
) -> Result<f64, InfoError> {
    if part_a.is_empty() || part_b.is_empty() || part_a.iter().any(|i| part_b.contains(i)) {
        return Err(InfoError::OverlappingParts);
    }
    let mut a = part_a.to_vec();
    let mut b = part_b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let h_a = state.entropy_of_kept(&a)?;
    let h_b = state.entropy_of_kept(&b)?;
    let h_ab = state.entropy_of_kept(&sorted_union(&a, &b))?;
    Ok(h_a + h_b - h_ab)
}

/// Fragment enumeration policy for [`partial_information_plot`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Sampling {
    /// Enumerate all `C(N, m)` fragments when there are at most this many.
    pub max_exhaustive: u64,
    /// Otherwise average over this many uniformly random fragments.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            max_exhaustive: 10_000,
            mc_samples: 200,
            seed: 0,
        }
    }
}

impl Sampling {
    pub fn exhaustive() -> Self {
        Self {
            max_exhaustive: u64::MAX,
            ..Self::default()
        }
    }
}

/// Statistics of `I(S:F)` over fragments of one size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: usize,
    pub f: f64,
    pub samples: usize,
    /// Whether all `C(N, m)` fragments were used.
    pub exhaustive: bool,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialInfoCurve {
    pub n_env: usize,
    pub system_entropy: f64,
    pub points: Vec<CurvePoint>,
}

impl PartialInfoCurve {
    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    pub fn mean_at(&self, m: usize) -> f64 {
        self.points[m].mean
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Seed of Monte-Carlo fragment `sample` at size `m`, independent of evaluation order.
fn fragment_seed(seed: u64, m: usize, sample: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = seed
        ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (sample as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `I(S:F)` for every fragment size `m = 0..=N`.
pub fn partial_information_plot(
    state: &StateVector,
    sampling: &Sampling,
) -> Result<PartialInfoCurve, InfoError> {
    let layout = state.layout();
    let sys = layout.system_index().ok_or(InfoError::NoEnvironment)?;
    let env = layout.env_indices();
    let n = env.len();
    if n == 0 {
        return Err(InfoError::NoEnvironment);
    }
    let h_s = state.entropy_of_kept(&[sys])?;

    let info = |fragment: &[usize]| -> Result<f64, HilbertError> {
        let mut f = fragment.to_vec();
        f.sort_unstable();
        let h_f = state.entropy_of_kept(&f)?;
        let h_sf = state.entropy_of_kept(&sorted_union(&f, &[sys]))?;
        Ok(h_s + h_f - h_sf)
    };

    let mut points = Vec::with_capacity(n + 1);
    points.push(CurvePoint {
        m: 0,
        f: 0.0,
        samples: 1,
        exhaustive: true,
        mean: 0.0,
        std: 0.0,
        min: 0.0,
        max: 0.0,
    });
    for m in 1..=n {
        let count = binomial(n, m);
        let exhaustive = count <= sampling.max_exhaustive;
        let fragments: Vec<Vec<usize>> = if exhaustive {
            env.iter().copied().combinations(m).collect()
        } else {
            (0..sampling.mc_samples)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(fragment_seed(sampling.seed, m, i));
                    let mut pick: Vec<usize> = rand::seq::index::sample(&mut rng, n, m)
                        .into_iter()
                        .map(|k| env[k])
                        .collect();
                    pick.sort_unstable();
                    pick
                })
                .collect()
        };
        let values = fragments
            .par_iter()
            .map(|f| info(f))
            .collect::<Result<Vec<f64>, _>>()?;
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
        points.push(CurvePoint {
            m,
            f: m as f64 / n as f64,
            samples: values.len(),
            exhaustive,
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok(PartialInfoCurve {
        n_env: n,
        system_entropy: h_s,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyResult {
    pub delta: f64,
    pub system_entropy: f64,
    pub m_delta: usize,
    pub f_delta: f64,
    pub redundancy: f64,
}

/// Smallest fragment size whose mean information reaches `(1 - δ) H_S`,
/// and the redundancy `N / m_δ`.
pub fn redundancy(curve: &PartialInfoCurve, delta: f64) -> Result<RedundancyResult, InfoError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(InfoError::InvalidDelta(delta));
    }
    let h_s = curve.system_entropy;
    if h_s <= DEGENERATE_ENTROPY {
        return Err(InfoError::DegenerateSystem(h_s));
    }
    let target = (1.0 - delta) * h_s;
    let m_delta = curve
        .points
        .iter()
        .find(|p| p.m > 0 && p.mean >= target)
        .map(|p| p.m)
        .ok_or(InfoError::NeverReached(delta))?;
    let n = curve.n_env as f64;
    Ok(RedundancyResult {
        delta,
        system_entropy: h_s,
        m_delta,
        f_delta: m_delta as f64 / n,
        redundancy: n / m_delta as f64,
    })
}

/// Mean `|I(m) - H_S|` over `ceil(0.2 N) <= m <= floor(0.8 N)`.
pub fn plateau_deviation(curve: &PartialInfoCurve) -> Result<f64, InfoError> {
    let n = curve.n_env;
    if n < 5 {
        return Err(InfoError::TooFewSizes(n));
    }
    let lo = n.div_ceil(5);
    let hi = 4 * n / 5;
    let dev: f64 = (lo..=hi)
        .map(|m| (curve.mean_at(m) - curve.system_entropy).abs())
        .sum();
    Ok(dev / (hi - lo + 1) as f64)
}

/// Least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_branching_state, haar_random_state, BranchSpec};
    use crate::hilbert::{linalg::CMatrix, SubsystemLayout};
    use num_complex::Complex64;

    fn diag(values: &[f64]) -> DensityOperator {
        let layout = SubsystemLayout::canonical(vec![values.len()]).unwrap();
        let m = CMatrix::from_fn(values.len(), values.len(), |i, j| {
            Complex64::new(if i == j { values[i] } else { 0.0 }, 0.0)
        });
        DensityOperator::new(layout, m).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(von_neumann_entropy(&diag(&[1.0, 0.0])).unwrap(), 0.0);
        assert!((von_neumann_entropy(&diag(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-12);
        // -(0.25 lg 0.25 + 0.75 lg 0.75) evaluated by hand: 0.5 + 0.311278
        assert!((von_neumann_entropy(&diag(&[0.25, 0.75])).unwrap() - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn entropy_rejects_invalid() {
        let layout = SubsystemLayout::canonical(vec![2]).unwrap();
        let twice = DensityOperator::from_parts(layout, CMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            von_neumann_entropy(&twice),
            Err(InfoError::InvalidDensity(_))
        ));
    }

    #[test]
    fn mutual_information_examples() {
        let product = build_branching_state(&BranchSpec::qubit(0.6, 2, 1.0)).unwrap();
        assert!(mutual_information(&product, &[0], &[1, 2]).unwrap().abs() < 1e-12);

        let bell = build_branching_state(&BranchSpec::ghz(1)).unwrap();
        assert!((mutual_information(&bell, &[0], &[1]).unwrap() - 2.0).abs() < 1e-12);

        let ghz3 = build_branching_state(&BranchSpec::ghz(2)).unwrap();
        let i = mutual_information(&ghz3, &[0], &[1]).unwrap();
        assert!((i - 1.0).abs() < 1e-12);

        assert!(matches!(
            mutual_information(&ghz3, &[0, 1], &[1]),
            Err(InfoError::OverlappingParts)
        ));
        assert!(matches!(
            mutual_information(&ghz3, &[], &[1]),
            Err(InfoError::OverlappingParts)
        ));
    }

    #[test]
    fn ghz_curve_and_redundancy() {
        let ghz = build_branching_state(&BranchSpec::ghz(10)).unwrap();
        let curve = partial_information_plot(&ghz, &Sampling::default()).unwrap();
        assert_eq!(curve.points.len(), 11);
        assert_eq!(curve.mean_at(0), 0.0);
        for m in 1..=9 {
            assert!((curve.mean_at(m) - 1.0).abs() < 1e-9, "m={m}");
        }
        assert!((curve.mean_at(10) - 2.0).abs() < 1e-9);
        assert_eq!(curve.points[5].samples, 252);

        let r = redundancy(&curve, 0.1).unwrap();
        assert_eq!(r.m_delta, 1);
        assert!((r.f_delta - 0.1).abs() < 1e-15);
        assert!((r.redundancy - 10.0).abs() < 1e-12);
        assert!(plateau_deviation(&curve).unwrap() < 1e-9);
    }

    #[test]
    fn product_curve_is_flat_and_degenerate() {
        let s = build_branching_state(&BranchSpec::qubit(0.6, 6, 1.0)).unwrap();
        let curve = partial_information_plot(&s, &Sampling::default()).unwrap();
        assert!(curve.means().iter().all(|i| i.abs() < 1e-9));
        assert!(matches!(
            redundancy(&curve, 0.1),
            Err(InfoError::DegenerateSystem(_))
        ));
    }

    #[test]
    fn redundancy_errors() {
        let ghz = build_branching_state(&BranchSpec::ghz(5)).unwrap();
        let curve = partial_information_plot(&ghz, &Sampling::default()).unwrap();
        assert!(matches!(
            redundancy(&curve, 0.0),
            Err(InfoError::InvalidDelta(_))
        ));
        assert!(matches!(
            redundancy(&curve, 1.0),
            Err(InfoError::InvalidDelta(_))
        ));
        let mut flat = curve.clone();
        for p in &mut flat.points {
            p.mean = 0.0;
        }
        assert!(matches!(
            redundancy(&flat, 0.1),
            Err(InfoError::NeverReached(_))
        ));
        let small = partial_information_plot(
            &build_branching_state(&BranchSpec::ghz(4)).unwrap(),
            &Sampling::default(),
        )
        .unwrap();
        assert!(matches!(
            plateau_deviation(&small),
            Err(InfoError::TooFewSizes(4))
        ));
    }

    #[test]
    fn monte_carlo_is_order_independent_and_seeded() {
        let s = haar_random_state(&SubsystemLayout::qubits(8).unwrap(), 5).unwrap();
        let sampling = Sampling {
            max_exhaustive: 10,
            mc_samples: 15,
            seed: 9,
        };
        let a = partial_information_plot(&s, &sampling).unwrap();
        let b = partial_information_plot(&s, &sampling).unwrap();
        assert_eq!(a, b);
        assert!(!a.points[4].exhaustive);
        assert_eq!(a.points[4].samples, 15);
        assert!(a.points[8].exhaustive);
        let c = partial_information_plot(
            &s,
            &Sampling {
                seed: 10,
                ..sampling
            },
        )
        .unwrap();
        assert_ne!(a.points[4].mean, c.points[4].mean);
    }

    #[test]
    fn fit_of_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let fit = linear_fit(&xs, &ys);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(200, 100), u64::MAX);
    }
}
