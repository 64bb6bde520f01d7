use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{make_rk3_heun, make_rk5_butcher, reference_solution, rk_extended_step, subflow_oracle_check, ButcherTableau};
use crate::diagnostics::{convergence_order_against, poisson_residual, Method, Propagator};
use crate::error::{Error, Result};
use crate::extension::{extended_vector_field, ExtendedState, ExtensionSpec, DEFAULT_OMEGA};
use crate::flows::{KsymMethod, SplitSystem};
use crate::phasecore::{vector_field, ModelId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Subflows,
    Poisson,
    Orders,
    Invariants,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subflows" => Ok(Suite::Subflows),
            "poisson" => Ok(Suite::Poisson),
            "orders" => Ok(Suite::Orders),
            "invariants" => Ok(Suite::Invariants),
            "all" => Ok(Suite::All),
            other => Err(Error::Config(format!(
                "unknown suite '{other}' (expected subflows, poisson, orders, invariants or all)"
            ))),
        }
    }
}

/// Inputs of a verification run. The tableaux are replaceable so a corrupted
/// method can serve as a negative control.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub rk3: ButcherTableau,
    pub rk5: ButcherTableau,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            rk3: make_rk3_heun(),
            rk5: make_rk5_butcher(),
        }
    }
}

impl VerifyOptions {
    /// Heun weights shifted so the tableau stays consistent but drops to first order
    /// (Σ b·c = 7/15 instead of 1/2).
    pub fn with_corrupted_tableau(mut self) -> Self {
        self.rk3.name = "rk3-corrupted".into();
        self.rk3.b = vec![0.3, 0.0, 0.7];
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Human-readable acceptance rule, e.g. `<= 1e-9`.
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            threshold: format!("<= {limit:e}"),
            pass: measured <= limit,
        }
    }

    fn within(name: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            threshold: format!("{target} ± {tol}"),
            pass: (measured - target).abs() <= tol,
        }
    }

    fn above(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            threshold: format!("> {limit:e}"),
            pass: measured > limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<52} measured {:<12.4e} threshold {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )
    }
}

const MODELS: [ModelId; 3] = [ModelId::Model1, ModelId::AblowitzLadik(4), ModelId::Gyrocenter];

fn system(id: ModelId) -> Result<SplitSystem> {
    let model = id.build()?;
    let spec = ExtensionSpec::for_model(model.as_ref(), DEFAULT_OMEGA)?;
    SplitSystem::build(model, spec)
}

/// The model default initial condition duplicated, then random admissible points with
/// every copy perturbed by up to `spread`.
fn sample_states(sys: &SplitSystem, count: usize, spread: f64, rng: &mut ChaCha8Rng) -> Result<Vec<ExtendedState>> {
    let mut out = vec![sys.extend(&sys.model().default_initial())?];
    for _ in 0..count {
        let z = sys.model().sample_admissible(rng);
        let mut s = sys.extend(&z)?;
        for v in s.as_mut_slice() {
            *v += rng.gen_range(-spread..spread);
        }
        out.push(s);
    }
    Ok(out)
}

fn worst(values: impl IntoIterator<Item = Result<f64>>) -> f64 {
    values
        .into_iter()
        .map(|r| r.unwrap_or(f64::INFINITY))
        .fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
}

fn subflows(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (k, id) in MODELS.into_iter().enumerate() {
        let sys = system(id)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
        let states = sample_states(&sys, 20, 0.05, &mut rng)?;
        let per_flow: Vec<f64> = (0..sys.flows().len())
            .into_par_iter()
            .map(|f| worst(states.iter().map(|s| subflow_oracle_check(&sys, f, s, 0.01, 10_000))))
            .collect();
        for (f, err) in per_flow.into_iter().enumerate() {
            checks.push(Check::at_most(
                format!("oracle {id} {}", sys.flows()[f].label),
                err,
                1e-9,
            ));
        }
    }
    Ok(checks)
}

fn poisson(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let scheme = KsymMethod::Ksym2.scheme();
    for (k, id) in [ModelId::Model1, ModelId::Gyrocenter].into_iter().enumerate() {
        let sys = system(id)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(10 + k as u64));
        let states = sample_states(&sys, 4, 1e-3, &mut rng)?;
        let mut ks_worst = 0.0f64;
        let mut margin = f64::INFINITY;
        for s in &states {
            let ks = poisson_residual(|x| sys.compose_step(&scheme, x, 0.01), sys.model(), s, 1e-6)?;
            let rk = poisson_residual(|x| rk_extended_step(&sys, &opts.rk3, x, 0.01), sys.model(), s, 1e-6)?;
            ks_worst = ks_worst.max(ks);
            margin = margin.min(rk / ks);
        }
        checks.push(Check::at_most(format!("poisson residual {id} ksym2"), ks_worst, 1e-5));
        checks.push(Check::above(format!("poisson residual {id} rk3 / ksym2"), margin, 1.0));
    }
    Ok(checks)
}

/// Step sizes inside each method's asymptotic range. The Ω = 20 restraint and
/// the stiff AL lattice need smaller steps for the low-order methods, while rk5
/// needs larger ones to stay above the f64 error floor.
fn order_taus(id: ModelId, m: Method) -> &'static [f64] {
    const COARSE: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
    const MID: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];
    const FINE: [f64; 4] = [0.01, 0.005, 0.0025, 0.00125];
    const FINEST: [f64; 4] = [0.0025, 0.00125, 0.000625, 0.0003125];
    match (id, m) {
        (ModelId::Model1, Method::Rk5) => &COARSE,
        (ModelId::Model1, _) => &FINE,
        (_, Method::Ksym4 | Method::Rk5) => &MID,
        _ => &FINEST,
    }
}

fn orders(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let bands: [(Method, Propagator, f64, f64); 5] = [
        (Method::Ksym1, Method::Ksym1.propagator(), 1.0, 0.2),
        (Method::Ksym2, Method::Ksym2.propagator(), 2.0, 0.2),
        (Method::Ksym4, Method::Ksym4.propagator(), 4.0, 0.5),
        (Method::Rk3, Propagator::RungeKutta(opts.rk3.clone()), 3.0, 0.3),
        (Method::Rk5, Propagator::RungeKutta(opts.rk5.clone()), 5.0, 0.5),
    ];
    let mut checks = Vec::new();
    for id in [ModelId::Model1, ModelId::AblowitzLadik(4)] {
        let sys = Arc::new(system(id)?);
        let z0 = sys.model().default_initial();
        let reference = reference_solution(&sys, &z0, 1.0)?;
        let slopes: Vec<f64> = bands
            .par_iter()
            .map(|(m, p, _, _)| {
                convergence_order_against(&sys, p, *m, &z0, order_taus(id, *m), 1.0, &reference)
                    .map(|s| s.slope)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        for ((m, _, target, tol), slope) in bands.iter().zip(slopes) {
            checks.push(Check::within(format!("order {id} {m}"), slope, *target, *tol));
        }
    }
    Ok(checks)
}

fn invariants(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (name, tab) in [("rk3", &opts.rk3), ("rk5", &opts.rk5)] {
        checks.push(Check {
            name: format!("tableau {name} consistency"),
            measured: if tab.validate().is_ok() { 0.0 } else { 1.0 },
            threshold: "valid".into(),
            pass: tab.validate().is_ok(),
        });
    }
    for (k, id) in MODELS.into_iter().enumerate() {
        let sys = system(id)?;
        let model = sys.model();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(20 + k as u64));

        let mut skew = 0.0f64;
        let mut diag = 0.0f64;
        for _ in 0..100 {
            let z = model.sample_admissible(&mut rng);
            let b = model.structure_inverse(z.as_slice())?;
            skew = skew.max((&b + b.transpose()).amax());
            let omega = 10f64.powf(rng.gen_range(-2.0..3.0));
            let spec = ExtensionSpec::for_model(model, omega)?;
            let ext = ExtendedState::extend(&z, spec.copies)?;
            let mut field = vec![0.0; ext.len()];
            extended_vector_field(model, &spec, &ext, &mut field)?;
            let f = vector_field(model, &z)?;
            for (a, b) in field[..model.dim()].iter().zip(&f) {
                diag = diag.max((a - b).abs() / (1.0 + b.abs()));
            }
        }
        checks.push(Check::at_most(format!("skew-symmetry {id}"), skew, 0.0));
        checks.push(Check::at_most(format!("diagonal field {id}"), diag, 1e-13));

        let states = sample_states(&sys, 100, 0.05, &mut rng)?;
        let mut cons = 0.0f64;
        for s in &states {
            for i in 0..sys.flows().len() {
                let after = sys.apply_subflow(i, s, 0.01)?;
                let h0 = sys.own_hamiltonian(i, s)?;
                let h1 = sys.own_hamiltonian(i, &after)?;
                cons = cons.max((h1 - h0).abs() / (1.0 + h0.abs()));
            }
        }
        checks.push(Check::at_most(format!("subflow self-conservation {id}"), cons, 1e-12));
    }
    Ok(checks)
}

/// Runs a suite; the caller decides the exit status from the returned checks.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let want = |s: Suite| suite == Suite::All || suite == s;
    if want(Suite::Invariants) {
        checks.extend(invariants(opts)?);
    }
    if want(Suite::Subflows) {
        checks.extend(subflows(opts)?);
    }
    if want(Suite::Poisson) {
        checks.extend(poisson(opts)?);
    }
    if want(Suite::Orders) {
        checks.extend(orders(opts)?);
    }
    Ok(checks)
}
