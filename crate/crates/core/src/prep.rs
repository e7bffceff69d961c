//! Named state preparations, selectable at runtime.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::sync::Arc;

use num_complex::Complex64;

use crate::dynamics::{
    build_branching_state, haar_random_state, hazy_branching_state, run_collision_model,
    scramble_environment, BranchSpec, CollisionSchedule, DynamicsError, ScrambleConfig,
};
use crate::hilbert::{StateVector, SubsystemLayout};

/// Knobs shared by all preparations; each one reads the fields it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepParams {
    pub n_env: usize,
    pub alpha: f64,
    pub overlap: f64,
    pub seed: u64,
    pub scramble_rounds: usize,
    pub collision_angle: f64,
    pub haze: f64,
}

impl Default for PrepParams {
    fn default() -> Self {
        Self {
            n_env: 10,
            alpha: FRAC_1_SQRT_2,
            overlap: 0.0,
            seed: 1,
            scramble_rounds: 200,
            collision_angle: FRAC_PI_4,
            haze: 1.0,
        }
    }
}

pub trait StatePreparation: Send + Sync {
    fn name(&self) -> &'static str;
    /// Short descriptor of the prepared state, embedded in output headers.
    fn describe(&self, p: &PrepParams) -> String;
    fn prepare(&self, p: &PrepParams) -> Result<StateVector, DynamicsError>;
}

fn check_alpha(alpha: f64) -> Result<(), DynamicsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DynamicsError::InvalidParameter(format!("alpha = {alpha}")));
    }
    Ok(())
}

struct Branching;

impl StatePreparation for Branching {
    fn name(&self) -> &'static str {
        "branching"
    }
    fn describe(&self, p: &PrepParams) -> String {
        format!("branching(alpha={},c={},N={})", p.alpha, p.overlap, p.n_env)
    }
    fn prepare(&self, p: &PrepParams) -> Result<StateVector, DynamicsError> {
        check_alpha(p.alpha)?;
        build_branching_state(&BranchSpec::qubit(p.alpha, p.n_env, p.overlap))
    }
}

struct Ghz;

impl StatePreparation for Ghz {
    fn name(&self) -> &'static str {
        "ghz"
    }
    fn describe(&self, p: &PrepParams) -> String {
        format!("ghz(N={})", p.n_env)
    }
    fn prepare(&self, p: &PrepParams) -> Result<StateVector, DynamicsError> {
        build_branching_state(&BranchSpec::ghz(p.n_env))
    }
}

struct Haar;

impl StatePreparation for Haar {
    fn name(&self) -> &'static str {
        "haar"
    }
    fn describe(&self, p: &PrepParams) -> String {
        format!("haar(qubits={},seed={})", p.n_env + 1, p.seed)
    }
    fn prepare(&self, p: &PrepParams) -> Result<StateVector, DynamicsError> {
        haar_random_state(&SubsystemLayout::qubits(p.n_env)?, p.seed)
    }
}

struct Scrambled;

impl StatePreparation for Scrambled {
    fn name(&self) -> &'static str {
        "scrambled"
    }
    fn describe(&self, p: &PrepParams) -> String {
        format!(
            "scrambled(alpha={},c={},N={},rounds={},seed={})",
            p.alpha, p.overlap, p.n_env, p.scramble_rounds, p.seed
        )
    }
    fn prepare(&self, p: &PrepParams) -> Result<StateVector, DynamicsError> {
        let base = Branching.prepare(p)?;
        scramble_environment(
            &base,
            ScrambleConfig {
                rounds: p.scramble_rounds,
                seed: p.seed,
            },
        )
    }
}

struct Collision;

impl StatePreparation for Collision {
    fn name(&self) -> &'static str {
        "collision"
    }
    fn describe(&self, p: &PrepParams) -> String {
        format!(
            "collision(alpha={},theta={},steps={})",
            p.alpha, p.collision_angle, p.n_env
        )
    }
    fn prepare(&self, p: &PrepParams) -> Result<StateVector, DynamicsError> {
        check_alpha(p.alpha)?;
        let beta = (1.0 - p.alpha * p.alpha).sqrt();
        let system = StateVector::single(vec![
            Complex64::new(p.alpha, 0.0),
            Complex64::new(beta, 0.0),
        ])?;
        run_collision_model(
            &system,
            CollisionSchedule {
                n_steps: p.n_env,
                record_angle: p.collision_angle,
            },
        )
    }
}

struct Hazy;

impl StatePreparation for Hazy {
    fn name(&self) -> &'static str {
        "hazy"
    }
    fn describe(&self, p: &PrepParams) -> String {
        format!("hazy(alpha={},p={},N={})", p.alpha, p.haze, p.n_env)
    }
    fn prepare(&self, p: &PrepParams) -> Result<StateVector, DynamicsError> {
        hazy_branching_state(p.alpha, p.n_env, p.haze)
    }
}

#[derive(Clone, Default)]
pub struct PreparationRegistry {
    entries: BTreeMap<&'static str, Arc<dyn StatePreparation>>,
}

impl PreparationRegistry {
    pub fn with_builtins() -> Self {
        let mut r = Self::default();
        r.register(Arc::new(Branching));
        r.register(Arc::new(Ghz));
        r.register(Arc::new(Haar));
        r.register(Arc::new(Scrambled));
        r.register(Arc::new(Collision));
        r.register(Arc::new(Hazy));
        r
    }

    /// Adds or replaces the preparation under its name.
    pub fn register(&mut self, prep: Arc<dyn StatePreparation>) {
        self.entries.insert(prep.name(), prep);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn StatePreparation>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_registered() {
        let r = PreparationRegistry::with_builtins();
        assert_eq!(
            r.names(),
            ["branching", "collision", "ghz", "haar", "hazy", "scrambled"]
        );
        assert!(r.get("nope").is_none());
    }

    #[test]
    fn every_builtin_prepares_a_small_state() {
        let r = PreparationRegistry::with_builtins();
        let p = PrepParams {
            n_env: 3,
            scramble_rounds: 5,
            haze: 0.5,
            ..PrepParams::default()
        };
        for name in r.names() {
            let s = r.get(name).unwrap().prepare(&p).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12, "{name}");
            assert_eq!(s.layout().n_env(), 3, "{name}");
        }
    }

    #[test]
    fn ghz_and_branching_agree_at_zero_overlap() {
        let r = PreparationRegistry::with_builtins();
        let p = PrepParams {
            n_env: 4,
            ..PrepParams::default()
        };
        let a = r.get("ghz").unwrap().prepare(&p).unwrap();
        let b = r.get("branching").unwrap().prepare(&p).unwrap();
        assert!((a.fidelity(&b).unwrap() - 1.0).abs() < 1e-12);
    }
}
