//! Exact subflows of the augmented Hamiltonian and the explicit methods built
//! by composing them.
//!
//! Each piece of the splitting (a mixed-variable copy of `H`, or one term of
//! the restraint) depends only on a set of coordinates that its own flow
//! leaves fixed. The partial derivatives with respect to those coordinates are
//! therefore constant over the step, and every other coordinate moves along a
//! scalar equation solved in closed form by the model's [`PairStructure`].

mod compose;

use std::sync::Arc;

use crate::diagnostics::{run_steps, Method, Trajectory};
use crate::error::{Error, Result};
use crate::extension::{ExtendedState, ExtensionSpec};
use crate::phasecore::{NonCanonicalModel, PairStructure, PhaseState};

pub use compose::{CompositionScheme, Direction, Stage, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    /// Copy of `H` evaluated at the mixed arguments of mixup row `row`.
    Mixed { row: usize },
    /// One term of the partitioned restraint.
    Constraint { term: usize },
}

/// One exactly solvable piece of the augmented system.
#[derive(Debug, Clone, PartialEq)]
pub struct SubFlow {
    pub label: String,
    pub kind: FlowKind,
    /// Extended indices of the coordinates `H_i` depends on; all are constant along the flow.
    frozen: Vec<usize>,
    /// `(extended index, position in frozen of its partner)` for every coordinate that moves.
    moving: Vec<(usize, usize)>,
}

impl SubFlow {
    pub fn frozen(&self) -> &[usize] {
        &self.frozen
    }

    pub fn moving(&self) -> impl Iterator<Item = usize> + '_ {
        self.moving.iter().map(|&(i, _)| i)
    }
}

/// Scratch buffers reused across subflow applications.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    args: Vec<f64>,
    rates: Vec<f64>,
}

/// A model, its extension and the ordered list of exact subflows.
#[derive(Clone)]
pub struct SplitSystem {
    model: Arc<dyn NonCanonicalModel>,
    spec: ExtensionSpec,
    flows: Vec<SubFlow>,
}

impl std::fmt::Debug for SplitSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitSystem")
            .field("model", &self.model.name())
            .field("spec", &self.spec)
            .field("flows", &self.flows.len())
            .finish()
    }
}

impl SplitSystem {
    /// Builds the subflows in listing order: the mixed Hamiltonians first,
    /// then the restraint terms.
    pub fn build(model: Arc<dyn NonCanonicalModel>, spec: ExtensionSpec) -> Result<Self> {
        let pairs = model.pair_structure().ok_or_else(|| {
            Error::Config(format!(
                "model {} has no closed-form pair structure; its subsystems cannot be solved explicitly",
                model.name()
            ))
        })?;
        let d = model.dim();
        if spec.copies != model.copy_count() || spec.mixup.slots() != d {
            return Err(Error::Config(format!(
                "extension with {} copies does not match model {}",
                spec.copies,
                model.name()
            )));
        }
        for j in 0..d {
            let p = pairs.partner(j);
            if p >= d || p == j || pairs.partner(p) != j {
                return Err(Error::Config(format!("partner map of {} is not an involution", model.name())));
            }
        }
        let two_copy = spec.copies == 2;
        let mut flows = Vec::with_capacity(spec.mixup.rows() + spec.constraint_terms.len());
        for row in 0..spec.mixup.rows() {
            let label = if two_copy {
                ["H_A", "H_B"][row].to_string()
            } else {
                format!("H_{}", row + 1)
            };
            let frozen = spec
                .mixup
                .row(row)
                .iter()
                .enumerate()
                .map(|(j, &c)| c * d + j)
                .collect();
            flows.push(Self::make_flow(label, FlowKind::Mixed { row }, frozen, d, pairs)?);
        }
        let offset = flows.len();
        for (t, term) in spec.constraint_terms.iter().enumerate() {
            let frozen = term.copies().map(|c| c * d + term.slot).collect();
            let label = format!("H_{}", offset + t + 1);
            flows.push(Self::make_flow(label, FlowKind::Constraint { term: t }, frozen, d, pairs)?);
        }
        Ok(SplitSystem { model, spec, flows })
    }

    fn make_flow(
        label: String,
        kind: FlowKind,
        frozen: Vec<usize>,
        d: usize,
        pairs: &dyn PairStructure,
    ) -> Result<SubFlow> {
        let mut moving = Vec::with_capacity(frozen.len());
        for (pos, &e) in frozen.iter().enumerate() {
            let (c, j) = (e / d, e % d);
            let target = c * d + pairs.partner(j);
            if frozen.contains(&target) {
                return Err(Error::Config(format!(
                    "{label} depends on a conjugate pair in copy {}; not exactly solvable",
                    c + 1
                )));
            }
            moving.push((target, pos));
        }
        Ok(SubFlow {
            label,
            kind,
            frozen,
            moving,
        })
    }

    pub fn model(&self) -> &dyn NonCanonicalModel {
        self.model.as_ref()
    }

    pub fn model_arc(&self) -> Arc<dyn NonCanonicalModel> {
        Arc::clone(&self.model)
    }

    pub fn spec(&self) -> &ExtensionSpec {
        &self.spec
    }

    pub fn flows(&self) -> &[SubFlow] {
        &self.flows
    }

    pub fn extend(&self, z: &PhaseState) -> Result<ExtendedState> {
        if z.dim() != self.model.dim() {
            return Err(Error::Argument(format!(
                "initial state has {} coordinates, model {} needs {}",
                z.dim(),
                self.model.name(),
                self.model.dim()
            )));
        }
        ExtendedState::extend(z, self.spec.copies)
    }

    /// The Hamiltonian `H_i` of subflow `idx`.
    pub fn own_hamiltonian(&self, idx: usize, s: &ExtendedState) -> Result<f64> {
        match self.flows[idx].kind {
            FlowKind::Mixed { row } => {
                let mut args = vec![0.0; self.model.dim()];
                self.spec.mixed_args(s, row, &mut args);
                self.model.hamiltonian(&args)
            }
            FlowKind::Constraint { term } => {
                Ok(self.spec.constraint_terms[term].value(s, self.spec.omega))
            }
        }
    }

    /// Full extended gradient of `H_i`, assembled without the frozen-coordinate shortcut.
    pub fn own_gradient(&self, idx: usize, s: &ExtendedState, out: &mut [f64]) -> Result<()> {
        let d = self.model.dim();
        out.fill(0.0);
        match self.flows[idx].kind {
            FlowKind::Mixed { row } => {
                let mut args = vec![0.0; d];
                let mut grad = vec![0.0; d];
                self.spec.mixed_args(s, row, &mut args);
                self.model.gradient(&args, &mut grad)?;
                for (j, &c) in self.spec.mixup.row(row).iter().enumerate() {
                    out[c * d + j] += grad[j];
                }
            }
            FlowKind::Constraint { term } => {
                let t = &self.spec.constraint_terms[term];
                let x = s.as_slice();
                let a = t.anchor * d + t.slot;
                for &p in &t.partners {
                    let b = p * d + t.slot;
                    let diff = self.spec.omega * (x[a] - x[b]);
                    out[a] += diff;
                    out[b] -= diff;
                }
            }
        }
        Ok(())
    }

    fn frozen_rates(&self, flow: &SubFlow, s: &ExtendedState, scratch: &mut Scratch) -> Result<()> {
        let d = self.model.dim();
        scratch.rates.resize(flow.frozen.len(), 0.0);
        match flow.kind {
            FlowKind::Mixed { row } => {
                scratch.args.resize(d, 0.0);
                self.spec.mixed_args(s, row, &mut scratch.args);
                self.model.gradient(&scratch.args, &mut scratch.rates)?;
            }
            FlowKind::Constraint { .. } => {
                let x = s.as_slice();
                let anchor = x[flow.frozen[0]];
                let omega = self.spec.omega;
                let mut total = 0.0;
                for (k, &e) in flow.frozen.iter().enumerate().skip(1) {
                    let diff = x[e] - anchor;
                    scratch.rates[k] = omega * diff;
                    total -= diff;
                }
                scratch.rates[0] = omega * total;
            }
        }
        Ok(())
    }

    pub(crate) fn apply_with(
        &self,
        idx: usize,
        s: &mut ExtendedState,
        tau: f64,
        scratch: &mut Scratch,
    ) -> Result<()> {
        if tau == 0.0 {
            return Ok(());
        }
        let flow = &self.flows[idx];
        self.frozen_rates(flow, s, scratch)?;
        let pairs = self.model.pair_structure().expect("checked at build");
        let d = self.model.dim();
        let x = s.as_mut_slice();
        for &(target, pos) in &flow.moving {
            let slot = target % d;
            let rate = scratch.rates[pos];
            let partner_value = x[flow.frozen[pos]];
            let next = pairs
                .advance(slot, x[target], partner_value, rate, tau)
                .map_err(|f| Error::Integration {
                    flow: flow.label.clone(),
                    coordinate: target,
                    reason: f.0.to_string(),
                })?;
            if !next.is_finite() {
                return Err(Error::Integration {
                    flow: flow.label.clone(),
                    coordinate: target,
                    reason: "non-finite result".into(),
                });
            }
            x[target] = next;
        }
        Ok(())
    }

    /// Exact time-`tau` map of subflow `idx`.
    pub fn apply_subflow(&self, idx: usize, s: &ExtendedState, tau: f64) -> Result<ExtendedState> {
        let mut out = s.clone();
        self.apply_with(idx, &mut out, tau, &mut Scratch::default())?;
        Ok(out)
    }

    /// Runs a composition scheme once with step `tau`.
    pub fn compose_step(
        &self,
        scheme: &CompositionScheme,
        s: &ExtendedState,
        tau: f64,
    ) -> Result<ExtendedState> {
        let mut out = s.clone();
        Stepper::new(self, scheme).step(&mut out, tau)?;
        Ok(out)
    }

    /// `Φ_τ`: every subflow in build order with the full step.
    pub fn first_order_step(&self, s: &ExtendedState, tau: f64) -> Result<ExtendedState> {
        self.compose_step(&CompositionScheme::first_order(), s, tau)
    }

    /// `Φ*_τ`: the subflows in reverse order.
    pub fn adjoint_first_order_step(&self, s: &ExtendedState, tau: f64) -> Result<ExtendedState> {
        self.compose_step(&CompositionScheme::adjoint_first_order(), s, tau)
    }

    /// `Ψ²_τ = Φ*_{τ/2} ∘ Φ_{τ/2}`.
    pub fn strang_step(&self, s: &ExtendedState, tau: f64) -> Result<ExtendedState> {
        self.compose_step(&CompositionScheme::strang(), s, tau)
    }

    /// `Ψ⁴_τ = Φ_{α_s τ} ∘ Φ*_{β_s τ} ∘ … ∘ Φ_{α_1 τ} ∘ Φ*_{β_1 τ}` for a symmetric order-4 scheme.
    pub fn fourth_order_step(
        &self,
        s: &ExtendedState,
        tau: f64,
        scheme: &CompositionScheme,
    ) -> Result<ExtendedState> {
        if scheme.order() != 4 || !scheme.is_symmetric() {
            return Err(Error::Config("fourth-order step needs a symmetric order-4 scheme".into()));
        }
        self.compose_step(scheme, s, tau)
    }
}

/// The three composition methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KsymMethod {
    Ksym1,
    Ksym2,
    Ksym4,
}

impl KsymMethod {
    pub fn scheme(self) -> CompositionScheme {
        match self {
            KsymMethod::Ksym1 => CompositionScheme::first_order(),
            KsymMethod::Ksym2 => CompositionScheme::strang(),
            KsymMethod::Ksym4 => CompositionScheme::suzuki_fourth(),
        }
    }
}

impl From<KsymMethod> for Method {
    fn from(m: KsymMethod) -> Self {
        match m {
            KsymMethod::Ksym1 => Method::Ksym1,
            KsymMethod::Ksym2 => Method::Ksym2,
            KsymMethod::Ksym4 => Method::Ksym4,
        }
    }
}

/// Iterates a composition method from the duplicated initial state, recording
/// every `record_every` steps.
pub fn integrate(
    system: &SplitSystem,
    method: KsymMethod,
    z0: &PhaseState,
    tau: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    integrate_with_scheme(system, &method.scheme(), method.into(), z0, tau, t_final, record_every)
}

/// As [`integrate`], with an arbitrary composition scheme.
pub fn integrate_with_scheme(
    system: &SplitSystem,
    scheme: &CompositionScheme,
    label: Method,
    z0: &PhaseState,
    tau: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let s0 = system.extend(z0)?;
    let mut stepper = Stepper::new(system, scheme);
    run_steps(s0, label, system.spec().omega, tau, t_final, record_every, |s| {
        stepper.step(s, tau)
    })
}
