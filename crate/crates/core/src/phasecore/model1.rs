use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use super::pair::{self, FlowFailure, PairStructure};
use super::{check_len, uniform, ExtensionStrategy, NonCanonicalModel, PhaseState};
use crate::error::{Error, Result};

const NAME: &str = "model1";

/// Four-dimensional test system in `(x, y, z, u)`:
///
/// ```text
/// H = (x² + y² + z²)^{5/2} + y u
/// B = [[0, 0, cos²(xz), 0], [0, 0, 0, u²/(2 sin y)], [-cos²(xz), 0, 0, 0], [0, -u²/(2 sin y), 0, 0]]
/// ```
///
/// Admissible states have `y ∈ (0, π)` and `|xz| < π/2 - 1e-9`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Model1;

impl Model1 {
    pub fn energy(z: &[f64]) -> f64 {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        r2 * r2 * r2.sqrt() + z[1] * z[3]
    }

    pub fn energy_gradient(z: &[f64], out: &mut [f64]) {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let k = 5.0 * r2 * r2.sqrt();
        out[0] = k * z[0];
        out[1] = k * z[1] + z[3];
        out[2] = k * z[2];
        out[3] = z[1];
    }
}

impl NonCanonicalModel for Model1 {
    fn name(&self) -> &str {
        NAME
    }

    fn dim(&self) -> usize {
        4
    }

    fn strategy(&self) -> ExtensionStrategy {
        ExtensionStrategy::TwoCopySpecial
    }

    fn default_initial(&self) -> PhaseState {
        PhaseState(vec![0.2, 0.4, 0.3, 0.5])
    }

    fn check_domain(&self, z: &[f64]) -> Result<()> {
        check_len(NAME, z, 4)?;
        if !(z[1] > 0.0 && z[1] < PI) {
            return Err(Error::domain(NAME, format!("y = {} outside (0, π)", z[1])));
        }
        if (z[0] * z[2]).abs() >= FRAC_PI_2 - 1e-9 {
            return Err(Error::domain(NAME, format!("|xz| = {} too close to π/2", (z[0] * z[2]).abs())));
        }
        Ok(())
    }

    fn hamiltonian(&self, z: &[f64]) -> Result<f64> {
        self.check_domain(z)?;
        Ok(Self::energy(z))
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_domain(z)?;
        Self::energy_gradient(z, out);
        Ok(())
    }

    fn structure_inverse(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(z)?;
        let c2 = (z[0] * z[2]).cos().powi(2);
        let s = z[3] * z[3] / (2.0 * z[1].sin());
        let mut b = DMatrix::zeros(4, 4);
        b[(0, 2)] = c2;
        b[(2, 0)] = -c2;
        b[(1, 3)] = s;
        b[(3, 1)] = -s;
        Ok(b)
    }

    fn pair_structure(&self) -> Option<&dyn PairStructure> {
        Some(self)
    }

    fn sample_admissible(&self, rng: &mut dyn rand::RngCore) -> PhaseState {
        PhaseState(vec![
            uniform(rng, -0.5, 0.5),
            uniform(rng, 0.4, 1.2),
            uniform(rng, -0.5, 0.5),
            uniform(rng, -0.8, 0.8),
        ])
    }
}

impl PairStructure for Model1 {
    fn partner(&self, slot: usize) -> usize {
        (slot + 2) % 4
    }

    fn coupling(&self, slot: usize, value: f64, partner_value: f64) -> f64 {
        match slot {
            0 => (value * partner_value).cos().powi(2),
            2 => -(value * partner_value).cos().powi(2),
            1 => partner_value * partner_value / (2.0 * value.sin()),
            3 => -value * value / (2.0 * partner_value.sin()),
            _ => unreachable!("model1 has four slots"),
        }
    }

    fn advance(
        &self,
        slot: usize,
        value: f64,
        partner_value: f64,
        rate: f64,
        t: f64,
    ) -> std::result::Result<f64, FlowFailure> {
        match slot {
            0 => Ok(pair::tan_shear(value, partner_value, rate * t)),
            2 => Ok(pair::tan_shear(value, partner_value, -rate * t)),
            // sin(y) y' = rate u²/2 with u frozen
            1 => pair::arccos_drift(value, rate * partner_value * partner_value * t / 2.0),
            // u' = -rate u² / (2 sin y) with y frozen
            3 => {
                let sy = partner_value.sin();
                if !(sy > 0.0) {
                    return Err(FlowFailure("sin(y) must be positive"));
                }
                pair::reciprocal(value, rate * t / (2.0 * sy))
            }
            _ => unreachable!("model1 has four slots"),
        }
    }
}
