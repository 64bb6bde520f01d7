//! Trajectories and the quantities plotted or asserted about them: energy
//! errors, copy divergence, Poisson residuals, convergence orders and orbit
//! geometry.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::baselines::{integrate_rk, make_rk3_heun, make_rk5_butcher, reference_solution, ButcherTableau};
use crate::error::{Error, Result};
use crate::extension::{augmented_hamiltonian, extended_structure_inverse, ExtendedState, ExtensionSpec};
use crate::flows::{integrate_with_scheme, CompositionScheme, KsymMethod, SplitSystem};
use crate::phasecore::{NonCanonicalModel, PhaseState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ksym1,
    Ksym2,
    Ksym4,
    Rk3,
    Rk5,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ksym1, Method::Ksym2, Method::Ksym4, Method::Rk3, Method::Rk5];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ksym1 => "ksym1",
            Method::Ksym2 => "ksym2",
            Method::Ksym4 => "ksym4",
            Method::Rk3 => "rk3",
            Method::Rk5 => "rk5",
        }
    }

    /// Column label used in the timing tables.
    pub fn table_label(self) -> &'static str {
        match self {
            Method::Ksym1 => "1stKsym",
            Method::Ksym2 => "2ndKsym",
            Method::Ksym4 => "4thKsym",
            Method::Rk3 => "3rdRK",
            Method::Rk5 => "5thRK",
        }
    }

    pub fn nominal_order(self) -> u32 {
        match self {
            Method::Ksym1 => 1,
            Method::Ksym2 => 2,
            Method::Rk3 => 3,
            Method::Ksym4 => 4,
            Method::Rk5 => 5,
        }
    }

    pub fn is_composition(self) -> bool {
        matches!(self, Method::Ksym1 | Method::Ksym2 | Method::Ksym4)
    }

    /// Default propagator for this method.
    pub fn propagator(self) -> Propagator {
        match self {
            Method::Ksym1 => Propagator::Composition(KsymMethod::Ksym1.scheme()),
            Method::Ksym2 => Propagator::Composition(KsymMethod::Ksym2.scheme()),
            Method::Ksym4 => Propagator::Composition(KsymMethod::Ksym4.scheme()),
            Method::Rk3 => Propagator::RungeKutta(make_rk3_heun()),
            Method::Rk5 => Propagator::RungeKutta(make_rk5_butcher()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ksym1" | "1stksym" => Ok(Method::Ksym1),
            "ksym2" | "2ndksym" => Ok(Method::Ksym2),
            "ksym4" | "4thksym" => Ok(Method::Ksym4),
            "rk3" | "3rdrk" => Ok(Method::Rk3),
            "rk5" | "5thrk" => Ok(Method::Rk5),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected ksym1, ksym2, ksym4, rk3 or rk5)"
            ))),
        }
    }
}

/// How a step is produced: a composition of exact subflows or an explicit RK tableau.
#[derive(Debug, Clone, PartialEq)]
pub enum Propagator {
    Composition(CompositionScheme),
    RungeKutta(ButcherTableau),
}

/// Recorded states of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ExtendedState>,
    pub tau: f64,
    pub omega: f64,
    pub method: Method,
    pub record_every: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&ExtendedState> {
        self.states.last()
    }
}

/// Number of steps of size `tau` that make up `t_final`; `t_final` must be a
/// whole multiple of `tau` up to rounding.
pub fn step_count(tau: f64, t_final: f64) -> Result<usize> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Argument(format!("step size must be positive, got {tau}")));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Argument(format!("final time must be non-negative, got {t_final}")));
    }
    let n = (t_final / tau).round();
    if (n * tau - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::Config(format!("t_final = {t_final} is not a multiple of tau = {tau}")));
    }
    Ok(n as usize)
}

/// Drives `step` from `s0` for `t_final / tau` steps, recording the initial
/// state and every `record_every`-th state. Times are `k τ`, not accumulated sums.
pub fn run_steps<F>(
    s0: ExtendedState,
    method: Method,
    omega: f64,
    tau: f64,
    t_final: f64,
    record_every: usize,
    mut step: F,
) -> Result<Trajectory>
where
    F: FnMut(&mut ExtendedState) -> Result<()>,
{
    if record_every == 0 {
        return Err(Error::Argument("record_every must be at least 1".into()));
    }
    let n = step_count(tau, t_final)?;
    let records = n / record_every + 1;
    let mut times = Vec::with_capacity(records);
    let mut states = Vec::with_capacity(records);
    times.push(0.0);
    states.push(s0.clone());
    let mut s = s0;
    for k in 1..=n {
        step(&mut s).map_err(|e| e.at_step(k))?;
        if !s.is_finite() {
            return Err(Error::Diagnostic("state became non-finite".into()).at_step(k));
        }
        if k % record_every == 0 {
            times.push(k as f64 * tau);
            states.push(s.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        tau,
        omega,
        method,
        record_every,
    })
}

/// Runs any of the five methods on the extended system.
pub fn simulate(
    system: &SplitSystem,
    method: Method,
    z0: &PhaseState,
    tau: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    simulate_with(system, &method.propagator(), method, z0, tau, t_final, record_every)
}

/// As [`simulate`] with an explicit propagator; `label` only tags the trajectory.
pub fn simulate_with(
    system: &SplitSystem,
    propagator: &Propagator,
    label: Method,
    z0: &PhaseState,
    tau: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    match propagator {
        Propagator::Composition(scheme) => {
            integrate_with_scheme(system, scheme, label, z0, tau, t_final, record_every)
        }
        Propagator::RungeKutta(tab) => integrate_rk(system, tab, label, z0, tau, t_final, record_every),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    /// `H̄` on the extended state.
    Augmented,
    /// `H` evaluated on the first copy.
    OriginalFirstCopy,
}

/// `(E(t) − E(0)) / E(0)` per record.
pub fn relative_energy_error_series(
    traj: &Trajectory,
    model: &dyn NonCanonicalModel,
    spec: &ExtensionSpec,
    which: EnergyKind,
) -> Result<Vec<f64>> {
    let energy = |s: &ExtendedState| -> Result<f64> {
        match which {
            EnergyKind::Augmented => augmented_hamiltonian(model, spec, s),
            EnergyKind::OriginalFirstCopy => model.hamiltonian(s.readout().as_slice()),
        }
    };
    let first = traj
        .states
        .first()
        .ok_or_else(|| Error::Diagnostic("empty trajectory".into()))?;
    let e0 = energy(first)?;
    if e0 == 0.0 {
        return Err(Error::Diagnostic("initial energy is zero; relative error undefined".into()));
    }
    traj.states
        .iter()
        // `+ 0.0` turns the −0.0 of a negative e0 into 0.0
        .map(|s| energy(s).map(|e| (e - e0) / e0 + 0.0))
        .collect()
}

/// Per record, the largest coordinate difference between any two copies.
pub fn copy_divergence_series(traj: &Trajectory) -> Vec<f64> {
    traj.states.iter().map(ExtendedState::copy_divergence).collect()
}

/// `max |second half| / max |first half|` of a series, splitting at the
/// midpoint index. Infinite when the first half is identically zero and the
/// second is not.
pub fn two_halves_ratio(series: &[f64]) -> f64 {
    let mid = series.len() / 2;
    let peak = |xs: &[f64]| xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (a, b) = (peak(&series[..mid]), peak(&series[mid..]));
    if a == 0.0 {
        if b == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        b / a
    }
}

/// Second-half maximum at most twice the first-half maximum.
pub fn two_halves_bounded(series: &[f64]) -> bool {
    two_halves_ratio(series) <= 2.0
}

/// `‖J B̄(s) Jᵀ − B̄(ψ(s))‖_∞` with `J` the central-difference Jacobian of `step` at `s`.
pub fn poisson_residual<F>(step: F, model: &dyn NonCanonicalModel, s: &ExtendedState, fd_step: f64) -> Result<f64>
where
    F: Fn(&ExtendedState) -> Result<ExtendedState>,
{
    if !(fd_step > 0.0) {
        return Err(Error::Argument(format!("fd_step must be positive, got {fd_step}")));
    }
    let diag = |e: Error| Error::Diagnostic(format!("Poisson residual: {e}"));
    let n = s.len();
    let image = step(s).map_err(diag)?;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let mut plus = s.clone();
        let mut minus = s.clone();
        plus.as_mut_slice()[k] += fd_step;
        minus.as_mut_slice()[k] -= fd_step;
        let fp = step(&plus).map_err(diag)?;
        let fm = step(&minus).map_err(diag)?;
        for i in 0..n {
            jac[(i, k)] = (fp.as_slice()[i] - fm.as_slice()[i]) / (2.0 * fd_step);
        }
    }
    let b0 = extended_structure_inverse(model, s).map_err(diag)?;
    let b1 = extended_structure_inverse(model, &image).map_err(diag)?;
    let r = &jac * b0 * jac.transpose() - b1;
    Ok(r.amax())
}

/// Global errors of an order study and the fitted slope.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy {
    pub method: Method,
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Argument("slope fit needs at least two matched points".into()));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::Diagnostic("slope fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("step sizes must differ".into()));
    }
    Ok(sxy / sxx)
}

/// Max-norm global error at `t_final` against [`reference_solution`] for each
/// step size, with the fitted slope.
pub fn convergence_order(
    system: &SplitSystem,
    method: Method,
    z0: &PhaseState,
    taus: &[f64],
    t_final: f64,
) -> Result<OrderStudy> {
    let reference = reference_solution(system, z0, t_final)?;
    convergence_order_against(system, &method.propagator(), method, z0, taus, t_final, &reference)
}

/// As [`convergence_order`] with an explicit propagator and a precomputed reference.
pub fn convergence_order_against(
    system: &SplitSystem,
    propagator: &Propagator,
    label: Method,
    z0: &PhaseState,
    taus: &[f64],
    t_final: f64,
    reference: &ExtendedState,
) -> Result<OrderStudy> {
    if taus.len() < 3 {
        return Err(Error::Argument(format!("order study needs at least 3 step sizes, got {}", taus.len())));
    }
    for &tau in taus {
        step_count(tau, t_final)?;
    }
    let errors = taus
        .par_iter()
        .map(|&tau| {
            let n = step_count(tau, t_final)?.max(1);
            let traj = simulate_with(system, propagator, label, z0, tau, t_final, n)?;
            let last = traj.last().expect("trajectory holds the initial state");
            Ok(last.max_abs_diff(reference))
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = log_log_slope(taus, &errors)?;
    Ok(OrderStudy {
        method: label,
        taus: taus.to_vec(),
        errors,
        slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitStats {
    pub center: (f64, f64),
    pub mean_radius: f64,
    /// `max |r − r̄| / r̄`.
    pub max_rel_deviation: f64,
    pub initial_radius: f64,
    pub final_radius: f64,
}

/// Radius statistics of the first-copy projection onto `(slot_a, slot_b)`,
/// measured about the time-mean center.
pub fn orbit_radius_stats(traj: &Trajectory, slot_a: usize, slot_b: usize) -> Result<OrbitStats> {
    if traj.is_empty() {
        return Err(Error::Diagnostic("empty trajectory".into()));
    }
    let dim = traj.states[0].dim();
    if slot_a >= dim || slot_b >= dim {
        return Err(Error::Argument(format!("projection slots must be below {dim}")));
    }
    let pts: Vec<(f64, f64)> = traj
        .states
        .iter()
        .map(|s| (s.copy(0)[slot_a], s.copy(0)[slot_b]))
        .collect();
    let n = pts.len() as f64;
    // Offsets from the first point keep a constant orbit exactly centered.
    let (x0, y0) = pts[0];
    let cx = x0 + pts.iter().map(|p| p.0 - x0).sum::<f64>() / n;
    let cy = y0 + pts.iter().map(|p| p.1 - y0).sum::<f64>() / n;
    let radii: Vec<f64> = pts.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).collect();
    let mean = radii.iter().sum::<f64>() / n;
    let max_dev = if mean == 0.0 {
        0.0
    } else {
        radii.iter().fold(0.0f64, |m, r| m.max((r - mean).abs())) / mean
    };
    Ok(OrbitStats {
        center: (cx, cy),
        mean_radius: mean,
        max_rel_deviation: max_dev,
        initial_radius: radii[0],
        final_radius: *radii.last().expect("nonempty"),
    })
}
