use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use super::pair::{self, FlowFailure, PairStructure};
use super::{check_len, uniform, ExtensionStrategy, NonCanonicalModel, PhaseState};
use crate::error::{Error, Result};

const NAME: &str = "gyrocenter";

/// Field and potential parameters for the gyrocenter model with
/// `B(X) = (0, 0, sec²(xy))`.
///
/// The unit field direction is constant, so every `u`-dependent term of the
/// `a_ij` vanishes and the coefficients are stored directly instead of going
/// through a vector potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroParams {
    /// Magnetic moment.
    pub mu: f64,
    /// Coefficient of the scalar potential `φ = phi_coeff * |X|`.
    pub phi_coeff: f64,
}

impl Default for GyroParams {
    fn default() -> Self {
        GyroParams {
            mu: 1.0,
            phi_coeff: 1e-2,
        }
    }
}

impl GyroParams {
    /// `a12 = sec²(xy)`.
    pub fn a12(&self, x: f64, y: f64) -> f64 {
        1.0 / (x * y).cos().powi(2)
    }

    pub fn a13(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }

    pub fn a23(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }

    pub fn unit_field(&self) -> [f64; 3] {
        [0.0, 0.0, 1.0]
    }

    /// `a12 b3 - a13 b2 + a23 b1`.
    pub fn denominator(&self, x: f64, y: f64) -> f64 {
        let b = self.unit_field();
        self.a12(x, y) * b[2] - self.a13(x, y) * b[1] + self.a23(x, y) * b[0]
    }
}

/// Gyrocenter motion in `(x, y, z, u)` with
/// `H = μ sec²(xy) + φ_c √(x² + y² + z²) + u²/2`.
#[derive(Debug, Clone)]
pub struct Gyrocenter {
    params: GyroParams,
}

impl Gyrocenter {
    pub fn new(params: GyroParams) -> Self {
        Gyrocenter { params }
    }

    pub fn params(&self) -> GyroParams {
        self.params
    }
}

impl NonCanonicalModel for Gyrocenter {
    fn name(&self) -> &str {
        NAME
    }

    fn dim(&self) -> usize {
        4
    }

    fn strategy(&self) -> ExtensionStrategy {
        ExtensionStrategy::DCopyGeneral
    }

    fn default_initial(&self) -> PhaseState {
        PhaseState(vec![0.003, 0.002, 0.004, 0.005])
    }

    fn check_domain(&self, z: &[f64]) -> Result<()> {
        check_len(NAME, z, 4)?;
        let xy = (z[0] * z[1]).abs();
        if xy >= FRAC_PI_2 - 1e-9 {
            return Err(Error::domain(NAME, format!("|xy| = {xy} too close to π/2")));
        }
        Ok(())
    }

    fn hamiltonian(&self, z: &[f64]) -> Result<f64> {
        self.check_domain(z)?;
        let p = &self.params;
        let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
        Ok(p.mu * p.a12(z[0], z[1]) + p.phi_coeff * r + 0.5 * z[3] * z[3])
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_domain(z)?;
        let p = &self.params;
        let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
        if r == 0.0 {
            return Err(Error::domain(NAME, "potential gradient undefined at |X| = 0"));
        }
        let xy = z[0] * z[1];
        // d/dw sec²(w) = 2 sec²(w) tan(w)
        let dsec = 2.0 * p.mu * p.a12(z[0], z[1]) * xy.tan();
        let k = p.phi_coeff / r;
        out[0] = dsec * z[1] + k * z[0];
        out[1] = dsec * z[0] + k * z[1];
        out[2] = k * z[2];
        out[3] = z[3];
        Ok(())
    }

    fn structure_inverse(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(z)?;
        let p = &self.params;
        let (x, y) = (z[0], z[1]);
        let den = p.denominator(x, y);
        if den == 0.0 || !den.is_finite() {
            return Err(Error::domain(NAME, "singular structure denominator"));
        }
        let [b1, b2, b3] = p.unit_field();
        let (a12, a13, a23) = (p.a12(x, y), p.a13(x, y), p.a23(x, y));
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            0.0, -b3,  b2,  a23,
            b3,  0.0, -b1, -a13,
            -b2,  b1, 0.0,  a12,
            -a23, a13, -a12, 0.0,
        ]);
        Ok(m / den)
    }

    fn pair_structure(&self) -> Option<&dyn PairStructure> {
        Some(self)
    }

    fn sample_admissible(&self, rng: &mut dyn rand::RngCore) -> PhaseState {
        loop {
            let z: Vec<f64> = (0..4).map(|_| uniform(rng, -1.0, 1.0)).collect();
            if (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt() > 1e-2 {
                return PhaseState(z);
            }
        }
    }
}

/// Pairing of the reduced matrix `[[0, -cos²(xy), 0, 0], [cos²(xy), 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]]`.
impl PairStructure for Gyrocenter {
    fn partner(&self, slot: usize) -> usize {
        slot ^ 1
    }

    fn coupling(&self, slot: usize, value: f64, partner_value: f64) -> f64 {
        match slot {
            0 => -(value * partner_value).cos().powi(2),
            1 => (value * partner_value).cos().powi(2),
            2 => 1.0,
            3 => -1.0,
            _ => unreachable!("gyrocenter has four slots"),
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
        Ok(match slot {
            0 => pair::tan_shear(value, partner_value, -rate * t),
            1 => pair::tan_shear(value, partner_value, rate * t),
            2 => value + rate * t,
            3 => value - rate * t,
            _ => unreachable!("gyrocenter has four slots"),
        })
    }
}
