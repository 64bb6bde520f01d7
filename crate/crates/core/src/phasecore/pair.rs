//! Scalar closed-form flows for structure matrices whose rows each couple a
//! single slot to a single partner slot.
//!
//! Every exactly solvable subsystem of an augmented Hamiltonian freezes the
//! coordinates its Hamiltonian depends on, so each remaining coordinate obeys a
//! scalar equation `v' = rate * k(v, a)` where `a` is the frozen partner value
//! and `rate` is a constant partial derivative. The functions here integrate
//! the shapes of `k` that occur in the bundled models.

use std::f64::consts::FRAC_PI_2;

/// Reason a closed-form scalar flow could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowFailure(pub &'static str);

/// Structure matrices with exactly one nonzero entry per row, at a fixed
/// partner column that depends only on the row's own coordinate and the
/// partner's coordinate.
pub trait PairStructure: Send + Sync {
    /// Column of the single nonzero entry in row `slot`.
    fn partner(&self, slot: usize) -> usize;

    /// The entry `B[slot][partner(slot)]` as a function of the two coordinates.
    fn coupling(&self, slot: usize, value: f64, partner_value: f64) -> f64;

    /// Exact solution at time `t` of `v' = rate * coupling(slot, v, partner_value)`
    /// with `v(0) = value` and the partner held fixed.
    fn advance(
        &self,
        slot: usize,
        value: f64,
        partner_value: f64,
        rate: f64,
        t: f64,
    ) -> Result<f64, FlowFailure>;
}

fn atan_over(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        let r2 = r * r;
        1.0 - r2 / 3.0 + r2 * r2 / 5.0
    } else {
        r.atan() / r
    }
}

/// Solves `v' = cos²(a v) * rate`, i.e. `tan(a v) = tan(a v0) + a * s` with `s = rate * t`.
///
/// Works with the increment `a (v - v0)` through the tangent subtraction
/// formula, so the result stays on the branch of `a v0` and reduces smoothly
/// to `v0 + s` as `a -> 0`.
pub fn tan_shear(v0: f64, a: f64, s: f64) -> f64 {
    let (sn, cs) = (a * v0).sin_cos();
    let w = a * s;
    let num = w * cs * cs;
    let den = 1.0 + w * sn * cs;
    if den > 0.0 {
        let r = num / den;
        v0 + (s * cs * cs / den) * atan_over(r)
    } else {
        v0 + num.atan2(den) / a
    }
}

/// Solves `v' = (c² + h² v²) * rate` with `c² = 1 + h² a²`:
/// `v = (c/h) tan(h c s + atan(h v0 / c))`, `s = rate * t`.
pub fn lattice_tan(v0: f64, a: f64, h: f64, s: f64) -> Result<f64, FlowFailure> {
    let c = (1.0 + h * h * a * a).sqrt();
    let theta = (h * v0 / c).atan() + h * c * s;
    if theta.abs() >= FRAC_PI_2 {
        return Err(FlowFailure("solution blows up within the step"));
    }
    Ok(c / h * theta.tan())
}

/// Solves `v' = -k v²` with `s = k t`: `v = v0 / (1 + v0 s)`.
pub fn reciprocal(v0: f64, s: f64) -> Result<f64, FlowFailure> {
    let den = 1.0 + v0 * s;
    if den <= 0.0 {
        return Err(FlowFailure("solution blows up within the step"));
    }
    Ok(v0 / den)
}

/// Solves `sin(v) v' = k`, i.e. `cos v = cos v0 - s` with `s = k t`, on the branch `v ∈ [0, π]`.
pub fn arccos_drift(v0: f64, s: f64) -> Result<f64, FlowFailure> {
    let mut arg = v0.cos() - s;
    if arg.abs() > 1.0 {
        if arg.abs() - 1.0 <= 1e-12 {
            arg = arg.signum();
        } else {
            return Err(FlowFailure("arccos argument left [-1, 1]"));
        }
    }
    Ok(arg.acos())
}
