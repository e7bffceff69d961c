use serde::Serialize;
use std::fmt;

use super::HilbertError;

/// Largest supported total Hilbert dimension, in qubit equivalents.
pub const MAX_QUBIT_EQUIVALENTS: f64 = 24.0;

/// Role of one tensor factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Role {
    System,
    Apparatus,
    /// Environment subsystem, numbered from 1.
    Env(usize),
    /// Inaccessible purifying partner of a mixed environment subsystem, numbered from 1.
    Ancilla(usize),
}

impl Role {
    pub fn is_env(&self) -> bool {
        matches!(self, Role::Env(_))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::System => write!(f, "S"),
            Role::Apparatus => write!(f, "A"),
            Role::Env(j) => write!(f, "E{j}"),
            Role::Ancilla(j) => write!(f, "X{j}"),
        }
    }
}

/// Ordered tensor factors of a composite Hilbert space.
///
/// Subsystem 0 owns the most significant digit of a basis index. A layout
/// built with [`SubsystemLayout::new`] has exactly one system, at most one
/// apparatus and environment subsystems `Env(1..=N)` in order. Layouts of
/// reduced operators (see [`SubsystemLayout::restrict`]) keep the roles of the
/// retained factors and need not contain the system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
    roles: Vec<Role>,
}

impl SubsystemLayout {
    pub fn new(dims: Vec<usize>, roles: Vec<Role>) -> Result<Self, HilbertError> {
        if dims.is_empty() || dims.len() != roles.len() {
            return Err(HilbertError::InvalidLayout(format!(
                "{} dims for {} roles",
                dims.len(),
                roles.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(HilbertError::InvalidLayout(format!(
                "subsystem dimension {d} < 2"
            )));
        }
        let systems = roles.iter().filter(|r| **r == Role::System).count();
        if systems != 1 {
            return Err(HilbertError::InvalidLayout(format!(
                "{systems} system subsystems"
            )));
        }
        if roles.iter().filter(|r| **r == Role::Apparatus).count() > 1 {
            return Err(HilbertError::InvalidLayout(
                "more than one apparatus".into(),
            ));
        }
        let env: Vec<usize> = roles
            .iter()
            .filter_map(|r| match r {
                Role::Env(j) => Some(*j),
                _ => None,
            })
            .collect();
        if env.iter().enumerate().any(|(i, &j)| j != i + 1) {
            return Err(HilbertError::InvalidLayout(format!(
                "environment tags {env:?} are not 1..N in order"
            )));
        }
        let mut anc: Vec<usize> = roles
            .iter()
            .filter_map(|r| match r {
                Role::Ancilla(j) => Some(*j),
                _ => None,
            })
            .collect();
        let n_anc = anc.len();
        anc.sort_unstable();
        anc.dedup();
        if anc.len() != n_anc {
            return Err(HilbertError::InvalidLayout("duplicate ancilla tags".into()));
        }
        let layout = Self { dims, roles };
        layout.check_capacity()?;
        Ok(layout)
    }

    /// System first, then environment subsystems `Env(1..)`.
    pub fn canonical(dims: Vec<usize>) -> Result<Self, HilbertError> {
        let roles = (0..dims.len())
            .map(|i| if i == 0 { Role::System } else { Role::Env(i) })
            .collect();
        Self::new(dims, roles)
    }

    /// A system qubit followed by `n_env` environment qubits.
    pub fn qubits(n_env: usize) -> Result<Self, HilbertError> {
        Self::canonical(vec![2; n_env + 1])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn qubit_equivalents(&self) -> f64 {
        self.dims.iter().map(|&d| (d as f64).log2()).sum()
    }

    pub fn check_capacity(&self) -> Result<(), HilbertError> {
        let q = self.qubit_equivalents();
        if q > MAX_QUBIT_EQUIVALENTS + 1e-9 {
            return Err(HilbertError::CapacityExceeded(q));
        }
        Ok(())
    }

    pub fn system_index(&self) -> Option<usize> {
        self.roles.iter().position(|r| *r == Role::System)
    }

    pub fn apparatus_index(&self) -> Option<usize> {
        self.roles.iter().position(|r| *r == Role::Apparatus)
    }

    /// Subsystem indices of the environment, ordered by environment tag.
    pub fn env_indices(&self) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_env())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n_env(&self) -> usize {
        self.roles.iter().filter(|r| r.is_env()).count()
    }

    /// Row-major strides; subsystem 0 has the largest stride.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    /// Layout of the retained subsystems, roles preserved.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self, HilbertError> {
        self.check_increasing(keep)?;
        Ok(Self {
            dims: keep.iter().map(|&i| self.dims[i]).collect(),
            roles: keep.iter().map(|&i| self.roles[i]).collect(),
        })
    }

    pub(crate) fn check_increasing(&self, idx: &[usize]) -> Result<(), HilbertError> {
        if idx.is_empty() {
            return Err(HilbertError::InvalidIndices("empty index list".into()));
        }
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HilbertError::InvalidIndices(format!(
                "{idx:?} not strictly increasing"
            )));
        }
        if let Some(&last) = idx.last() {
            if last >= self.len() {
                return Err(HilbertError::InvalidIndices(format!(
                    "index {last} out of range for {} subsystems",
                    self.len()
                )));
            }
        }
        Ok(())
    }

    /// Indices not in `idx`, increasing.
    pub fn complement(&self, idx: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|i| !idx.contains(i)).collect()
    }

    /// Offsets into the full index space for every joint basis state of
    /// `subset`, enumerated with `subset[0]` as the most significant digit.
    pub(crate) fn offsets(&self, subset: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &s in subset {
            let d = self.dims[s];
            let mut next = Vec::with_capacity(offsets.len() * d);
            for &o in &offsets {
                for digit in 0..d {
                    next.push(o + digit * strides[s]);
                }
            }
            offsets = next;
        }
        offsets
    }
}

impl fmt::Display for SubsystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (d, r)) in self.dims.iter().zip(&self.roles).enumerate() {
            if i > 0 {
                write!(f, "⊗")?;
            }
            write!(f, "{r}[{d}]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_dims_and_missing_system() {
        assert!(SubsystemLayout::canonical(vec![2, 1]).is_err());
        assert!(SubsystemLayout::new(vec![2, 2], vec![Role::Env(1), Role::Env(2)]).is_err());
        assert!(SubsystemLayout::new(vec![2, 2], vec![Role::System, Role::Env(2)]).is_err());
        assert!(SubsystemLayout::new(
            vec![2, 2, 2],
            vec![Role::System, Role::Apparatus, Role::Apparatus]
        )
        .is_err());
    }

    #[test]
    fn capacity_ceiling() {
        assert!(SubsystemLayout::qubits(23).is_ok());
        assert!(matches!(
            SubsystemLayout::qubits(24),
            Err(HilbertError::CapacityExceeded(_))
        ));
    }

    #[test]
    fn strides_and_offsets() {
        let l = SubsystemLayout::canonical(vec![2, 3, 2]).unwrap();
        assert_eq!(l.total_dim(), 12);
        assert_eq!(l.strides(), vec![6, 2, 1]);
        assert_eq!(l.offsets(&[1]), vec![0, 2, 4]);
        assert_eq!(l.offsets(&[0, 2]), vec![0, 1, 6, 7]);
        assert_eq!(l.offsets(&[2, 0]), vec![0, 6, 1, 7]);
        assert_eq!(l.env_indices(), vec![1, 2]);
    }
}
