//! Extended phase space: copies of the state, mixed-variable Hamiltonians and
//! the quadratic restraint binding the copies together.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phasecore::{ExtensionStrategy, NonCanonicalModel, PhaseState};

/// Restraint strength used by the bundled experiments.
pub const DEFAULT_OMEGA: f64 = 20.0;

/// `copies` blocks of `dim` coordinates, copy-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    data: Vec<f64>,
    copies: usize,
    dim: usize,
}

impl ExtendedState {
    pub fn new(copies: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != copies * dim {
            return Err(Error::Argument(format!(
                "extended state of {copies} x {dim} needs {} entries, got {}",
                copies * dim,
                data.len()
            )));
        }
        Ok(ExtendedState { data, copies, dim })
    }

    /// `m` identical copies of `z`.
    pub fn extend(z: &PhaseState, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Argument(format!("need at least two copies, got {m}")));
        }
        let data = z.0.iter().copied().cycle().take(m * z.dim()).collect();
        Ok(ExtendedState {
            data,
            copies: m,
            dim: z.dim(),
        })
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn copy(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// The first copy, which carries the original-system diagnostics.
    pub fn readout(&self) -> PhaseState {
        PhaseState(self.copy(0).to_vec())
    }

    /// Coordinate-wise mean over the copies.
    pub fn mean_readout(&self) -> PhaseState {
        let mut mean = vec![0.0; self.dim];
        for k in 0..self.copies {
            for (m, v) in mean.iter_mut().zip(self.copy(k)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.copies as f64);
        PhaseState(mean)
    }

    /// Largest `|z_{a,j} - z_{b,j}|` over copy pairs and slots.
    pub fn copy_divergence(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.copies {
            for b in a + 1..self.copies {
                for (x, y) in self.copy(a).iter().zip(self.copy(b)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }

    /// Max-norm distance to another state of the same shape.
    pub fn max_abs_diff(&self, other: &ExtendedState) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Which copy supplies argument slot `j` of mixed Hamiltonian `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixupAssignment {
    rows: Vec<Vec<usize>>,
}

impl MixupAssignment {
    /// `H_A = H(P from copy 1, Q from copy 2)` and `H_B = H(P from copy 2, Q from copy 1)`.
    pub fn two_copy(dim: usize) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::Config(format!("two-copy extension needs an even dimension, got {dim}")));
        }
        let n = dim / 2;
        let rows = vec![
            (0..dim).map(|j| usize::from(j >= n)).collect(),
            (0..dim).map(|j| usize::from(j < n)).collect(),
        ];
        Ok(MixupAssignment { rows })
    }

    /// `d` Hamiltonians over `d` copies; row `k` takes slot `j` from copy `(j - k) mod d`,
    /// so the first row reads the diagonal `(p_11, p_22, ..., p_dd)`.
    pub fn cyclic(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("d-copy extension needs d >= 2, got {dim}")));
        }
        let rows = (0..dim)
            .map(|k| (0..dim).map(|j| (j + dim - k) % dim).collect())
            .collect();
        Ok(MixupAssignment { rows })
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn slots(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// 0-based copy index for Hamiltonian `i`, argument slot `j`.
    pub fn copy_of(&self, i: usize, j: usize) -> usize {
        self.rows[i][j]
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    /// Every slot-`j` variable of every copy appears in exactly one Hamiltonian.
    pub fn validate(&self, copies: usize) -> Result<()> {
        if self.rows.len() != copies {
            return Err(Error::Config(format!(
                "mixup has {} Hamiltonians for {copies} copies",
                self.rows.len()
            )));
        }
        for j in 0..self.slots() {
            let mut seen = vec![false; copies];
            for row in &self.rows {
                let c = row[j];
                if c >= copies || seen[c] {
                    return Err(Error::Config(format!("slot {j} is not a bijection over copies")));
                }
                seen[c] = true;
            }
        }
        Ok(())
    }
}

/// Copy index (1-based) of argument `j` in the mix-up Hamiltonian `H_i`,
/// `H_1 = H(p_{d1}, p_{12}, p_{23}, ...)` through `H_d = H(p_{11}, p_{22}, ..., p_{dd})`.
pub fn mixup_copy_index(i: usize, j: usize, d: usize) -> Result<usize> {
    if d == 0 || !(1..=d).contains(&i) || !(1..=d).contains(&j) {
        return Err(Error::Argument(format!("mixup index ({i}, {j}) out of range for d = {d}")));
    }
    Ok((j + 2 * d - i - 1) % d + 1)
}

/// `Ω Σ_partners (z_{anchor,slot} - z_{partner,slot})² / 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintTerm {
    pub slot: usize,
    pub anchor: usize,
    pub partners: Vec<usize>,
}

impl ConstraintTerm {
    pub fn value(&self, ext: &ExtendedState, omega: f64) -> f64 {
        let d = ext.dim();
        let a = ext.data[self.anchor * d + self.slot];
        let sum: f64 = self
            .partners
            .iter()
            .map(|&b| {
                let diff = a - ext.data[b * d + self.slot];
                diff * diff
            })
            .sum();
        omega * sum / 2.0
    }

    /// Copies whose slot variable this term reads, anchor first.
    pub fn copies(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.anchor).chain(self.partners.iter().copied())
    }
}

/// Everything that defines the augmented Hamiltonian for a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionSpec {
    pub copies: usize,
    pub omega: f64,
    pub mixup: MixupAssignment,
    pub constraint_terms: Vec<ConstraintTerm>,
}

impl ExtensionSpec {
    /// Two copies with one scalar restraint per slot, or `d` copies with the
    /// anchor-major restraint partition, depending on the model's strategy.
    pub fn for_model(model: &dyn NonCanonicalModel, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Config(format!("omega must be positive, got {omega}")));
        }
        let d = model.dim();
        let (copies, mixup, constraint_terms) = match model.strategy() {
            ExtensionStrategy::TwoCopySpecial => {
                let terms = (0..d)
                    .map(|slot| ConstraintTerm {
                        slot,
                        anchor: 0,
                        partners: vec![1],
                    })
                    .collect();
                (2, MixupAssignment::two_copy(d)?, terms)
            }
            ExtensionStrategy::DCopyGeneral => {
                let mut terms = Vec::with_capacity(d * (d - 1));
                for anchor in 0..d - 1 {
                    for slot in 0..d {
                        terms.push(ConstraintTerm {
                            slot,
                            anchor,
                            partners: (anchor + 1..d).collect(),
                        });
                    }
                }
                (d, MixupAssignment::cyclic(d)?, terms)
            }
        };
        if copies != model.copy_count() {
            return Err(Error::Config(format!(
                "model {} declares {} copies but its strategy needs {copies}",
                model.name(),
                model.copy_count()
            )));
        }
        mixup.validate(copies)?;
        Ok(ExtensionSpec {
            copies,
            omega,
            mixup,
            constraint_terms,
        })
    }

    pub fn with_omega(mut self, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Config(format!("omega must be positive, got {omega}")));
        }
        self.omega = omega;
        Ok(self)
    }

    pub(crate) fn check_shape(&self, model: &dyn NonCanonicalModel, ext: &ExtendedState) -> Result<()> {
        if ext.copies() != self.copies || ext.dim() != model.dim() {
            return Err(Error::Argument(format!(
                "state is {} x {}, extension expects {} x {}",
                ext.copies(),
                ext.dim(),
                self.copies,
                model.dim()
            )));
        }
        Ok(())
    }

    /// Gathers the arguments of mixed Hamiltonian `row` into `buf`.
    pub fn mixed_args(&self, ext: &ExtendedState, row: usize, buf: &mut [f64]) {
        let d = ext.dim();
        for (j, &c) in self.mixup.row(row).iter().enumerate() {
            buf[j] = ext.data[c * d + j];
        }
    }
}

/// `Σ_i H(mixed arguments of H_i) + Ω H_c`.
pub fn augmented_hamiltonian(
    model: &dyn NonCanonicalModel,
    spec: &ExtensionSpec,
    ext: &ExtendedState,
) -> Result<f64> {
    spec.check_shape(model, ext)?;
    let mut buf = vec![0.0; model.dim()];
    let mut total = 0.0;
    for row in 0..spec.mixup.rows() {
        spec.mixed_args(ext, row, &mut buf);
        total += model.hamiltonian(&buf)?;
    }
    Ok(total + spec.omega * constraint_value(spec, ext))
}

/// `H_c = Σ_{a<b} ‖copy_a - copy_b‖² / 2` (without the `Ω` factor).
pub fn constraint_value(spec: &ExtensionSpec, ext: &ExtendedState) -> f64 {
    let _ = spec;
    let mut total = 0.0;
    for a in 0..ext.copies() {
        for b in a + 1..ext.copies() {
            total += ext
                .copy(a)
                .iter()
                .zip(ext.copy(b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
        }
    }
    total / 2.0
}

/// `∇H̄` in copy-major layout.
pub fn augmented_gradient(
    model: &dyn NonCanonicalModel,
    spec: &ExtensionSpec,
    ext: &ExtendedState,
    out: &mut [f64],
) -> Result<()> {
    spec.check_shape(model, ext)?;
    let d = model.dim();
    let m = ext.copies();
    let mut args = vec![0.0; d];
    let mut grad = vec![0.0; d];
    out.fill(0.0);
    for row in 0..spec.mixup.rows() {
        spec.mixed_args(ext, row, &mut args);
        model.gradient(&args, &mut grad)?;
        for (j, &c) in spec.mixup.row(row).iter().enumerate() {
            out[c * d + j] += grad[j];
        }
    }
    let x = ext.as_slice();
    for k in 0..m {
        for b in 0..m {
            if b == k {
                continue;
            }
            for j in 0..d {
                out[k * d + j] += spec.omega * (x[k * d + j] - x[b * d + j]);
            }
        }
    }
    Ok(())
}

/// Block-diagonal `B̄ = diag(B(copy_1), ..., B(copy_m))`.
pub fn extended_structure_inverse(
    model: &dyn NonCanonicalModel,
    ext: &ExtendedState,
) -> Result<DMatrix<f64>> {
    let d = ext.dim();
    let n = ext.len();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..ext.copies() {
        let block = model.structure_inverse(ext.copy(k))?;
        out.view_mut((k * d, k * d), (d, d)).copy_from(&block);
    }
    Ok(out)
}

/// `B̄ ∇H̄`, evaluated copy by copy.
pub fn extended_vector_field(
    model: &dyn NonCanonicalModel,
    spec: &ExtensionSpec,
    ext: &ExtendedState,
    out: &mut [f64],
) -> Result<()> {
    let d = model.dim();
    let mut grad = vec![0.0; ext.len()];
    augmented_gradient(model, spec, ext, &mut grad)?;
    for k in 0..ext.copies() {
        let b = model.structure_inverse(ext.copy(k))?;
        let g = DVector::from_column_slice(&grad[k * d..(k + 1) * d]);
        out[k * d..(k + 1) * d].copy_from_slice((b * g).as_slice());
    }
    Ok(())
}
