//! Explicit Runge–Kutta baselines on the extended system, and brute-force
//! oracles used to validate the closed-form subflows and the convergence
//! studies.

use nalgebra::DVector;

use crate::diagnostics::{run_steps, step_count, Method, Trajectory};
use crate::error::{Error, Result};
use crate::extension::{extended_vector_field, ExtendedState};
use crate::flows::{integrate, KsymMethod, SplitSystem};
use crate::phasecore::PhaseState;

/// Explicit Butcher tableau; `a` is stored row-major, strictly lower triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub order: u32,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Weights sum to one, rows sum to the nodes, and the tableau is explicit.
    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        if self.c.len() != s || self.a.len() != s || self.a.iter().any(|r| r.len() != s) {
            return Err(Error::Config(format!("tableau {} has inconsistent shape", self.name)));
        }
        let bsum: f64 = self.b.iter().sum();
        if (bsum - 1.0).abs() > 1e-14 {
            return Err(Error::Config(format!("tableau {} weights sum to {bsum}", self.name)));
        }
        for i in 0..s {
            if self.a[i][i..].iter().any(|&v| v != 0.0) {
                return Err(Error::Config(format!("tableau {} is not explicit in row {i}", self.name)));
            }
            let row: f64 = self.a[i].iter().sum();
            if (row - self.c[i]).abs() > 1e-14 {
                return Err(Error::Config(format!(
                    "tableau {} row {i} sums to {row}, node is {}",
                    self.name, self.c[i]
                )));
            }
        }
        Ok(())
    }
}

/// Heun's third-order method.
pub fn make_rk3_heun() -> ButcherTableau {
    ButcherTableau {
        name: "rk3-heun".into(),
        c: vec![0.0, 1.0 / 3.0, 2.0 / 3.0],
        b: vec![0.25, 0.0, 0.75],
        a: vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0 / 3.0, 0.0, 0.0],
            vec![0.0, 2.0 / 3.0, 0.0],
        ],
        order: 3,
    }
}

/// Butcher's six-stage fifth-order method.
pub fn make_rk5_butcher() -> ButcherTableau {
    ButcherTableau {
        name: "rk5-butcher".into(),
        c: vec![0.0, 0.25, 0.25, 0.5, 0.75, 1.0],
        b: vec![7.0 / 90.0, 0.0, 32.0 / 90.0, 12.0 / 90.0, 32.0 / 90.0, 7.0 / 90.0],
        a: vec![
            vec![0.0; 6],
            vec![0.25, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.125, 0.125, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, -0.5, 1.0, 0.0, 0.0, 0.0],
            vec![3.0 / 16.0, 0.0, 0.0, 9.0 / 16.0, 0.0, 0.0],
            vec![-3.0 / 7.0, 2.0 / 7.0, 12.0 / 7.0, -12.0 / 7.0, 8.0 / 7.0, 0.0],
        ],
        order: 5,
    }
}

/// Classical fourth-order method, used only by the subflow oracle.
pub fn make_rk4_classic() -> ButcherTableau {
    ButcherTableau {
        name: "rk4".into(),
        c: vec![0.0, 0.5, 0.5, 1.0],
        b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        a: vec![
            vec![0.0; 4],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ],
        order: 4,
    }
}

/// Reusable stage storage for [`RkIntegrator`].
pub struct RkIntegrator<'t> {
    tableau: &'t ButcherTableau,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
}

impl<'t> RkIntegrator<'t> {
    pub fn new(tableau: &'t ButcherTableau, len: usize) -> Self {
        RkIntegrator {
            tableau,
            k: vec![vec![0.0; len]; tableau.stages()],
            stage: vec![0.0; len],
        }
    }

    pub fn step<F>(&mut self, field: &mut F, y: &mut [f64], tau: f64) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let tab = self.tableau;
        for i in 0..tab.stages() {
            self.stage.copy_from_slice(y);
            for (j, kj) in self.k.iter().enumerate().take(i) {
                let aij = tab.a[i][j];
                if aij != 0.0 {
                    for (st, kv) in self.stage.iter_mut().zip(kj) {
                        *st += tau * aij * kv;
                    }
                }
            }
            field(&self.stage, &mut self.k[i])?;
        }
        for (i, ki) in self.k.iter().enumerate() {
            let bi = tab.b[i];
            if bi != 0.0 {
                for (yv, kv) in y.iter_mut().zip(ki) {
                    *yv += tau * bi * kv;
                }
            }
        }
        Ok(())
    }
}

/// One explicit Runge–Kutta step of `y' = field(y)`.
pub fn rk_step<F>(tableau: &ButcherTableau, mut field: F, s: &ExtendedState, tau: f64) -> Result<ExtendedState>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let mut out = s.clone();
    RkIntegrator::new(tableau, s.len()).step(&mut field, out.as_mut_slice(), tau)?;
    Ok(out)
}

/// `B̄ ∇H̄` of the system as a plain-slice closure.
pub fn extended_field(system: &SplitSystem) -> impl FnMut(&[f64], &mut [f64]) -> Result<()> + '_ {
    let model = system.model();
    let spec = system.spec();
    let (m, d) = (spec.copies, model.dim());
    move |y, out| {
        let ext = ExtendedState::new(m, d, y.to_vec())?;
        extended_vector_field(model, spec, &ext, out)
    }
}

/// One Runge–Kutta step on the extended system.
pub fn rk_extended_step(
    system: &SplitSystem,
    tableau: &ButcherTableau,
    s: &ExtendedState,
    tau: f64,
) -> Result<ExtendedState> {
    rk_step(tableau, extended_field(system), s, tau)
}

/// Runs a Runge–Kutta method on the extended system from the duplicated initial state.
pub fn integrate_rk(
    system: &SplitSystem,
    tableau: &ButcherTableau,
    label: Method,
    z0: &PhaseState,
    tau: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    tableau.validate()?;
    let s0 = system.extend(z0)?;
    let mut rk = RkIntegrator::new(tableau, s0.len());
    let mut field = extended_field(system);
    run_steps(s0, label, system.spec().omega, tau, t_final, record_every, |s| {
        rk.step(&mut field, s.as_mut_slice(), tau)
    })
}

/// Max-norm distance between the closed-form subflow and an RK4 integration
/// of the same subsystem `z' = B̄(z) ∇H_i(z)` with `substeps` steps.
///
/// The right-hand side is assembled from the model's full structure matrix
/// and the full gradient of `H_i`, independent of the pair solvers.
pub fn subflow_oracle_check(
    system: &SplitSystem,
    idx: usize,
    s: &ExtendedState,
    tau: f64,
    substeps: usize,
) -> Result<f64> {
    if substeps < 100 {
        return Err(Error::Argument(format!("oracle needs at least 100 substeps, got {substeps}")));
    }
    let exact = system.apply_subflow(idx, s, tau)?;
    let model = system.model();
    let (m, d) = (s.copies(), s.dim());
    let mut grad = vec![0.0; s.len()];
    let mut field = |y: &[f64], out: &mut [f64]| -> Result<()> {
        let ext = ExtendedState::new(m, d, y.to_vec())?;
        system.own_gradient(idx, &ext, &mut grad)?;
        out.fill(0.0);
        for k in 0..m {
            let g = &grad[k * d..(k + 1) * d];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            let b = model.structure_inverse(ext.copy(k))?;
            let v = b * DVector::from_column_slice(g);
            out[k * d..(k + 1) * d].copy_from_slice(v.as_slice());
        }
        Ok(())
    };
    let rk4 = make_rk4_classic();
    let mut rk = RkIntegrator::new(&rk4, s.len());
    let mut y = s.as_slice().to_vec();
    let h = tau / substeps as f64;
    for _ in 0..substeps {
        rk.step(&mut field, &mut y, h)?;
    }
    Ok(exact
        .as_slice()
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Step size of the default convergence reference.
pub const REFERENCE_TAU: f64 = 1e-5;

/// High-accuracy solution of the extended system at `t_final`: the
/// fourth-order composition with step `REFERENCE_TAU` (shortened so it divides `t_final`).
pub fn reference_solution(system: &SplitSystem, z0: &PhaseState, t_final: f64) -> Result<ExtendedState> {
    reference_with(system, z0, t_final, Method::Ksym4, REFERENCE_TAU)
}

/// Alternative reference from a given method and nominal step.
pub fn reference_with(
    system: &SplitSystem,
    z0: &PhaseState,
    t_final: f64,
    method: Method,
    nominal_tau: f64,
) -> Result<ExtendedState> {
    if t_final == 0.0 {
        return system.extend(z0);
    }
    if !(t_final > 0.0) {
        return Err(Error::Argument(format!("reference horizon must be non-negative, got {t_final}")));
    }
    let n = (t_final / nominal_tau).ceil().max(1.0);
    let tau = t_final / n;
    let n = step_count(tau, t_final)?;
    let traj = match method {
        Method::Ksym1 | Method::Ksym2 | Method::Ksym4 => {
            let k = match method {
                Method::Ksym1 => KsymMethod::Ksym1,
                Method::Ksym2 => KsymMethod::Ksym2,
                _ => KsymMethod::Ksym4,
            };
            integrate(system, k, z0, tau, t_final, n)?
        }
        Method::Rk3 => integrate_rk(system, &make_rk3_heun(), method, z0, tau, t_final, n)?,
        Method::Rk5 => integrate_rk(system, &make_rk5_butcher(), method, z0, tau, t_final, n)?,
    };
    traj.states
        .into_iter()
        .last()
        .ok_or_else(|| Error::Diagnostic("empty reference trajectory".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::ExtensionSpec;
    use crate::phasecore::{make_model1, ModelId, NonCanonicalModel};
    use std::sync::Arc;

    #[test]
    fn tableaux_are_consistent() {
        for t in [make_rk3_heun(), make_rk5_butcher(), make_rk4_classic()] {
            t.validate().unwrap();
        }
        let rk3 = make_rk3_heun();
        assert_eq!(rk3.b.iter().sum::<f64>(), 1.0);
        assert_eq!(rk3.c[1], rk3.a[1][0]);
        assert_eq!(rk3.c[1], 1.0 / 3.0);
    }

    #[test]
    fn corrupted_tableau_is_rejected() {
        let mut t = make_rk3_heun();
        t.b[0] = 0.3;
        assert!(t.validate().is_err());
        let mut t = make_rk5_butcher();
        t.a[2][2] = 0.1;
        assert!(t.validate().is_err());
    }

    /// Applies a tableau to `y' = λ y` and returns the stability polynomial value.
    fn linear_growth(t: &ButcherTableau, z: f64) -> f64 {
        let s = ExtendedState::new(1, 1, vec![1.0]).unwrap();
        let out = rk_step(
            t,
            |y: &[f64], o: &mut [f64]| {
                o[0] = z * y[0];
                Ok(())
            },
            &s,
            1.0,
        )
        .unwrap();
        out.as_slice()[0]
    }

    /// Observed order on `y' = -y²`, `y(0) = 1`, whose solution is `1 / (1 + t)`.
    fn riccati_order(t: &ButcherTableau) -> f64 {
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&tau| {
                let mut y = vec![1.0];
                let mut rk = RkIntegrator::new(t, 1);
                let mut f = |y: &[f64], o: &mut [f64]| -> Result<()> {
                    o[0] = -y[0] * y[0];
                    Ok(())
                };
                let n = (2.0f64 / tau).round() as usize;
                for _ in 0..n {
                    rk.step(&mut f, &mut y, tau).unwrap();
                }
                (y[0] - 1.0 / 3.0).abs()
            })
            .collect();
        (errs[1] / errs[2]).log2()
    }

    #[test]
    fn nonlinear_orders() {
        assert!((riccati_order(&make_rk3_heun()) - 3.0).abs() < 0.15);
        assert!((riccati_order(&make_rk5_butcher()) - 5.0).abs() < 0.25);
        assert!((riccati_order(&make_rk4_classic()) - 4.0).abs() < 0.2);
    }

    #[test]
    fn heun_on_linear_test() {
        let v = linear_growth(&make_rk3_heun(), 0.1);
        let expected = 1.0 + 0.1 + 0.005 + 0.1f64.powi(3) / 6.0;
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 1.105_166_666_666_666_7).abs() < 1e-15);
    }

    #[test]
    fn rk5_stability_polynomial_is_taylor() {
        // An order-5 method reproduces exp(z) through z^5; the only remaining
        // term of a six-stage explicit method is b·A⁵·1 z^6.
        let t = make_rk5_butcher();
        let c6 = t.b[5] * t.a[5][4] * t.a[4][3] * t.a[3][2] * t.a[2][1] * t.a[1][0];
        for z in [0.05f64, 0.1, 0.2] {
            let taylor: f64 = (0..=5).map(|k| z.powi(k) / (1..=k).product::<i32>().max(1) as f64).sum();
            let r = linear_growth(&t, z);
            assert!((r - taylor - c6 * z.powi(6)).abs() < 1e-15, "z = {z}: {r} vs {taylor}");
        }
    }

    #[test]
    fn rk_zero_step_is_identity() {
        let s = ExtendedState::new(1, 2, vec![0.3, -0.2]).unwrap();
        let out = rk_step(
            &make_rk5_butcher(),
            |y: &[f64], o: &mut [f64]| {
                o[0] = y[1];
                o[1] = -y[0];
                Ok(())
            },
            &s,
            0.0,
        )
        .unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn oracle_needs_substeps() {
        let m = Arc::new(make_model1());
        let spec = ExtensionSpec::for_model(m.as_ref(), 20.0).unwrap();
        let sys = SplitSystem::build(m.clone(), spec).unwrap();
        let s = sys.extend(&m.default_initial()).unwrap();
        assert!(subflow_oracle_check(&sys, 0, &s, 0.01, 10).is_err());
        assert_eq!(subflow_oracle_check(&sys, 0, &s, 0.0, 100).unwrap(), 0.0);
    }

    #[test]
    fn model1_h_a_oracle() {
        let m = Arc::new(make_model1());
        let spec = ExtensionSpec::for_model(m.as_ref(), 20.0).unwrap();
        let sys = SplitSystem::build(m.clone(), spec).unwrap();
        let s = sys.extend(&m.default_initial()).unwrap();
        let err = subflow_oracle_check(&sys, 0, &s, 0.01, 10_000).unwrap();
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn gyro_h5_oracle_on_diagonal_is_zero() {
        let m = ModelId::Gyrocenter.build().unwrap();
        let spec = ExtensionSpec::for_model(m.as_ref(), 20.0).unwrap();
        let sys = SplitSystem::build(m.clone(), spec).unwrap();
        let s = sys.extend(&m.default_initial()).unwrap();
        let err = subflow_oracle_check(&sys, 4, &s, 0.01, 100).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn reference_at_zero_horizon() {
        let m = Arc::new(make_model1());
        let spec = ExtensionSpec::for_model(m.as_ref(), 20.0).unwrap();
        let sys = SplitSystem::build(m.clone(), spec).unwrap();
        let z = m.default_initial();
        assert_eq!(reference_solution(&sys, &z, 0.0).unwrap(), sys.extend(&z).unwrap());
    }
}
