use nalgebra::DMatrix;

use super::pair::{self, FlowFailure, PairStructure};
use super::{check_len, uniform, ExtensionStrategy, NonCanonicalModel, PhaseState};
use crate::error::{Error, Result};

const NAME: &str = "ablowitz-ladik";

/// Lattice size and spacing of the periodic Ablowitz–Ladik chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ALParams {
    pub n: usize,
    pub h: f64,
}

impl ALParams {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("Ablowitz-Ladik lattice needs N >= 2, got {n}")));
        }
        Ok(ALParams {
            n,
            h: 1.0 / n as f64,
        })
    }
}

/// Ablowitz–Ladik discretisation of the cubic Schrödinger equation with
/// `W_k = u_k + i v_k`, state laid out as `(u_1..u_N, v_1..v_N)`.
///
/// `B = [[0, -D], [D, 0]]` with `D = diag(1 + h²(u_k² + v_k²))` and
/// `H = h⁻² Σ (u_k u_{k-1} + v_k v_{k-1}) - h⁻⁴ Σ ln(1 + h²(u_k² + v_k²))`,
/// indices periodic.
#[derive(Debug, Clone)]
pub struct AblowitzLadik {
    params: ALParams,
}

impl AblowitzLadik {
    pub fn new(n: usize) -> Result<Self> {
        Ok(AblowitzLadik {
            params: ALParams::new(n)?,
        })
    }

    pub fn params(&self) -> ALParams {
        self.params
    }

    /// `d_k = 1 + h²(u_k² + v_k²)`.
    pub fn diagonal(&self, z: &[f64], k: usize) -> f64 {
        let n = self.params.n;
        let h2 = self.params.h * self.params.h;
        1.0 + h2 * (z[k] * z[k] + z[n + k] * z[n + k])
    }
}

impl NonCanonicalModel for AblowitzLadik {
    fn name(&self) -> &str {
        NAME
    }

    fn dim(&self) -> usize {
        2 * self.params.n
    }

    fn strategy(&self) -> ExtensionStrategy {
        ExtensionStrategy::TwoCopySpecial
    }

    /// `u = (0.2, 0.4, 0.3, 0.5)`, `v = (0.3, 0.2, 0.3, 0.2)`, repeated cyclically for `N != 4`.
    fn default_initial(&self) -> PhaseState {
        const U: [f64; 4] = [0.2, 0.4, 0.3, 0.5];
        const V: [f64; 4] = [0.3, 0.2, 0.3, 0.2];
        let n = self.params.n;
        let mut z: Vec<f64> = (0..n).map(|k| U[k % 4]).collect();
        z.extend((0..n).map(|k| V[k % 4]));
        PhaseState(z)
    }

    fn check_domain(&self, z: &[f64]) -> Result<()> {
        check_len(NAME, z, self.dim())
    }

    fn hamiltonian(&self, z: &[f64]) -> Result<f64> {
        self.check_domain(z)?;
        let n = self.params.n;
        let h2 = self.params.h * self.params.h;
        let (u, v) = z.split_at(n);
        let mut hop = 0.0;
        let mut log = 0.0;
        for k in 0..n {
            let prev = (k + n - 1) % n;
            hop += u[k] * u[prev] + v[k] * v[prev];
            log += (h2 * (u[k] * u[k] + v[k] * v[k])).ln_1p();
        }
        Ok(hop / h2 - log / (h2 * h2))
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_domain(z)?;
        let n = self.params.n;
        let h2 = self.params.h * self.params.h;
        let (u, v) = z.split_at(n);
        for k in 0..n {
            let prev = (k + n - 1) % n;
            let next = (k + 1) % n;
            let d = self.diagonal(z, k);
            out[k] = (u[next] + u[prev]) / h2 - 2.0 * u[k] / (h2 * d);
            out[n + k] = (v[next] + v[prev]) / h2 - 2.0 * v[k] / (h2 * d);
        }
        Ok(())
    }

    fn structure_inverse(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(z)?;
        let n = self.params.n;
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            let d = self.diagonal(z, k);
            b[(k, n + k)] = -d;
            b[(n + k, k)] = d;
        }
        Ok(b)
    }

    fn pair_structure(&self) -> Option<&dyn PairStructure> {
        Some(self)
    }

    fn sample_admissible(&self, rng: &mut dyn rand::RngCore) -> PhaseState {
        PhaseState((0..self.dim()).map(|_| uniform(rng, -1.0, 1.0)).collect())
    }
}

impl PairStructure for AblowitzLadik {
    fn partner(&self, slot: usize) -> usize {
        let n = self.params.n;
        if slot < n {
            slot + n
        } else {
            slot - n
        }
    }

    fn coupling(&self, slot: usize, value: f64, partner_value: f64) -> f64 {
        let h2 = self.params.h * self.params.h;
        let d = 1.0 + h2 * (value * value + partner_value * partner_value);
        if slot < self.params.n {
            -d
        } else {
            d
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
        let s = if slot < self.params.n { -rate * t } else { rate * t };
        pair::lattice_tan(value, partner_value, self.params.h, s)
    }
}
