//! Phase states, the non-canonical model abstraction and the bundled models.
//!
//! A model describes `z' = B(z) ∇H(z)` with a skew-symmetric, state-dependent
//! structure matrix `B = K⁻¹`.

mod ablowitz_ladik;
mod gyrocenter;
mod model1;
pub mod pair;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

pub use ablowitz_ladik::{ALParams, AblowitzLadik};
pub use gyrocenter::{GyroParams, Gyrocenter};
pub use model1::Model1;
pub use pair::PairStructure;

/// A point in the original `d`-dimensional phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState(pub Vec<f64>);

impl PhaseState {
    pub fn new(coords: Vec<f64>) -> Self {
        PhaseState(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for PhaseState {
    fn from(v: Vec<f64>) -> Self {
        PhaseState(v)
    }
}

/// How many copies of phase space a model needs for an explicit splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionStrategy {
    /// `B` has the `[[0, -K12], [K12ᵀ, 0]]` block form with diagonal `K12`; two copies suffice.
    TwoCopySpecial,
    /// General `B`; one copy per phase-space dimension.
    DCopyGeneral,
}

/// A non-canonical Hamiltonian system `z' = B(z) ∇H(z)`.
///
/// Implementations are immutable and shareable across threads.
pub trait NonCanonicalModel: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn strategy(&self) -> ExtensionStrategy;

    fn copy_count(&self) -> usize {
        match self.strategy() {
            ExtensionStrategy::TwoCopySpecial => 2,
            ExtensionStrategy::DCopyGeneral => self.dim(),
        }
    }

    fn default_initial(&self) -> PhaseState;

    /// Rejects states outside the region where `H`, `∇H`, `B` and the closed-form
    /// flows are valid.
    fn check_domain(&self, z: &[f64]) -> Result<()>;

    fn hamiltonian(&self, z: &[f64]) -> Result<f64>;

    fn gradient(&self, z: &[f64], out: &mut [f64]) -> Result<()>;

    /// `B(z) = K⁻¹(z)`.
    fn structure_inverse(&self, z: &[f64]) -> Result<DMatrix<f64>>;

    /// Closed-form scalar flows, when `B` has one coupled partner per row.
    fn pair_structure(&self) -> Option<&dyn PairStructure> {
        None
    }

    /// Draws a random admissible state, used by the randomized checks.
    fn sample_admissible(&self, rng: &mut dyn rand::RngCore) -> PhaseState;
}

pub(crate) fn check_len(model: &str, z: &[f64], dim: usize) -> Result<()> {
    if z.len() != dim {
        return Err(Error::domain(
            model,
            format!("expected {dim} coordinates, got {}", z.len()),
        ));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(model, format!("coordinate {i} is not finite")));
    }
    Ok(())
}

pub fn hamiltonian_value(model: &dyn NonCanonicalModel, z: &PhaseState) -> Result<f64> {
    model.hamiltonian(z.as_slice())
}

pub fn hamiltonian_gradient(model: &dyn NonCanonicalModel, z: &PhaseState) -> Result<Vec<f64>> {
    let mut g = vec![0.0; model.dim()];
    model.gradient(z.as_slice(), &mut g)?;
    Ok(g)
}

/// Central-difference gradient; the independent check on `hamiltonian_gradient`.
pub fn gradient_fd_oracle(
    model: &dyn NonCanonicalModel,
    z: &PhaseState,
    step: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {step}")));
    }
    let mut probe = z.0.clone();
    let mut out = Vec::with_capacity(z.dim());
    for i in 0..z.dim() {
        let base = probe[i];
        probe[i] = base + step;
        let hp = model.hamiltonian(&probe)?;
        probe[i] = base - step;
        let hm = model.hamiltonian(&probe)?;
        probe[i] = base;
        out.push((hp - hm) / (2.0 * step));
    }
    Ok(out)
}

pub fn structure_inverse(model: &dyn NonCanonicalModel, z: &PhaseState) -> Result<DMatrix<f64>> {
    model.structure_inverse(z.as_slice())
}

/// `B(z) ∇H(z)`.
pub fn vector_field(model: &dyn NonCanonicalModel, z: &PhaseState) -> Result<Vec<f64>> {
    let b = model.structure_inverse(z.as_slice())?;
    let g = DVector::from_vec(hamiltonian_gradient(model, z)?);
    Ok((b * g).as_slice().to_vec())
}

/// Identifier of a bundled model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    Model1,
    AblowitzLadik(usize),
    Gyrocenter,
}

impl ModelId {
    pub fn build(self) -> Result<Arc<dyn NonCanonicalModel>> {
        Ok(match self {
            ModelId::Model1 => Arc::new(make_model1()),
            ModelId::AblowitzLadik(n) => Arc::new(make_ablowitz_ladik(n)?),
            ModelId::Gyrocenter => Arc::new(make_gyrocenter()),
        })
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelId::Model1 => write!(f, "model1"),
            ModelId::AblowitzLadik(n) => write!(f, "ablowitz-ladik:{n}"),
            ModelId::Gyrocenter => write!(f, "gyrocenter"),
        }
    }
}

impl FromStr for ModelId {
    type Err = Error;

    /// Accepts `model1`, `gyrocenter` (`gyro`), and `ablowitz-ladik` (`al`)
    /// with an optional `:N` lattice size (default 4).
    fn from_str(s: &str) -> Result<Self> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let id = match head.trim().to_ascii_lowercase().as_str() {
            "model1" => ModelId::Model1,
            "gyrocenter" | "gyro" => ModelId::Gyrocenter,
            "ablowitz-ladik" | "al" => {
                let n = match tail {
                    Some(t) => t
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad lattice size in model id '{s}'")))?,
                    None => 4,
                };
                return Ok(ModelId::AblowitzLadik(n));
            }
            _ => return Err(Error::Config(format!("unknown model '{s}'"))),
        };
        if tail.is_some() {
            return Err(Error::Config(format!("model '{head}' takes no parameter")));
        }
        Ok(id)
    }
}

pub fn make_model1() -> Model1 {
    Model1
}

pub fn make_ablowitz_ladik(n: usize) -> Result<AblowitzLadik> {
    AblowitzLadik::new(n)
}

pub fn make_gyrocenter() -> Gyrocenter {
    Gyrocenter::new(GyroParams::default())
}

pub(crate) fn uniform(rng: &mut dyn rand::RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}
