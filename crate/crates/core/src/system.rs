//! Multilevel emitter descriptions: level energies, dipole transitions with
//! coupling magnitude and phase, an optional extra Hamiltonian, and hooks
//! for slow parameter drift.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, CMat};

/// Coupling strength of one transition to the shared bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// |g| given directly.
    Amplitude(f64),
    /// γ given; |g| is recovered from the golden-rule rate at the
    /// transition frequency, so the realized γ tracks this target exactly
    /// at resolution time.
    TargetGamma(f64),
}

/// One dipole transition |upper⟩ → |lower⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    pub coupling: Coupling,
    pub phase: f64,
}

impl Transition {
    pub fn new(lower: usize, upper: usize, coupling: Coupling) -> Self {
        Transition {
            lower,
            upper,
            coupling,
            phase: 0.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }
}

/// Level energies as a function of time.
pub type EnergyHook = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
/// Extra Hamiltonian as a function of time.
pub type ExtraHook = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// A multilevel system coupled to one bath through its transitions.
#[derive(Clone)]
pub struct SystemSpec {
    pub dim: usize,
    pub energies: Vec<f64>,
    pub transitions: Vec<Transition>,
    pub h_extra: CMat,
    pub energy_hook: Option<EnergyHook>,
    pub h_extra_hook: Option<ExtraHook>,
}

impl std::fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemSpec")
            .field("dim", &self.dim)
            .field("energies", &self.energies)
            .field("transitions", &self.transitions)
            .field("time_dependent", &self.is_time_dependent())
            .finish()
    }
}

impl SystemSpec {
    pub fn new(energies: Vec<f64>, transitions: Vec<Transition>) -> Result<Self> {
        let dim = energies.len();
        let spec = SystemSpec {
            dim,
            energies,
            transitions,
            h_extra: CMat::zeros(dim, dim),
            energy_hook: None,
            h_extra_hook: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_h_extra(mut self, h_extra: CMat) -> Result<Self> {
        self.h_extra = h_extra;
        self.validate()?;
        Ok(self)
    }

    pub fn with_energy_hook(mut self, hook: EnergyHook) -> Self {
        self.energy_hook = Some(hook);
        self
    }

    pub fn with_h_extra_hook(mut self, hook: ExtraHook) -> Self {
        self.h_extra_hook = Some(hook);
        self
    }

    pub fn is_time_dependent(&self) -> bool {
        self.energy_hook.is_some() || self.h_extra_hook.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config("system needs at least two levels".into()));
        }
        if self.energies.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} energies for a {}-level system",
                self.energies.len(),
                self.dim
            )));
        }
        if self.energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Config("level energies must be finite".into()));
        }
        if self.transitions.is_empty() {
            return Err(Error::Config("system has no transitions".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (j, t) in self.transitions.iter().enumerate() {
            if t.lower >= self.dim || t.upper >= self.dim {
                return Err(Error::Config(format!(
                    "transition {j} references level out of range"
                )));
            }
            if t.lower == t.upper {
                return Err(Error::Config(format!(
                    "transition {j} connects level {} to itself",
                    t.lower
                )));
            }
            if self.energies[t.upper] <= self.energies[t.lower] {
                return Err(Error::Config(format!(
                    "transition {j}: upper level must lie above lower level"
                )));
            }
            if !seen.insert((t.lower, t.upper)) {
                return Err(Error::Config(format!(
                    "transition {j} duplicates level pair ({}, {})",
                    t.lower, t.upper
                )));
            }
            let magnitude = match t.coupling {
                Coupling::Amplitude(g) => g,
                Coupling::TargetGamma(gamma) => gamma,
            };
            if !(magnitude.is_finite() && magnitude >= 0.0) {
                return Err(Error::Config(format!(
                    "transition {j} has an invalid coupling"
                )));
            }
        }
        if self.h_extra.nrows() != self.dim || self.h_extra.ncols() != self.dim {
            return Err(Error::DimensionMismatch(
                "extra Hamiltonian dimension mismatch".into(),
            ));
        }
        let defect = hermiticity_defect(&self.h_extra);
        if defect > 1e-12 {
            return Err(Error::NotHermitian { defect });
        }
        Ok(())
    }

    pub fn energies_at(&self, t: f64) -> Vec<f64> {
        match &self.energy_hook {
            Some(hook) => hook(t),
            None => self.energies.clone(),
        }
    }

    pub fn h_extra_at(&self, t: f64) -> CMat {
        match &self.h_extra_hook {
            Some(hook) => hook(t),
            None => self.h_extra.clone(),
        }
    }

    /// Transition frequency ω_j = E_upper − E_lower from given energies.
    pub fn transition_frequency(&self, j: usize, energies: &[f64]) -> f64 {
        let t = &self.transitions[j];
        energies[t.upper] - energies[t.lower]
    }

    pub fn transition_frequencies(&self) -> Vec<f64> {
        (0..self.transitions.len())
            .map(|j| self.transition_frequency(j, &self.energies))
            .collect()
    }

    /// Lowering operator σ_j = |lower⟩⟨upper|.
    pub fn sigma(&self, j: usize) -> CMat {
        let t = &self.transitions[j];
        let mut m = CMat::zeros(self.dim, self.dim);
        m[(t.lower, t.upper)] = c(1.0);
        m
    }

    /// Diagonal bare Hamiltonian from the given energies.
    pub fn h0_from_energies(&self, energies: &[f64]) -> CMat {
        CMat::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                c(energies[i])
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// H0 + H_extra at t = 0 (or the static values).
    pub fn hamiltonian(&self) -> CMat {
        self.h0_from_energies(&self.energies) + &self.h_extra
    }
}
