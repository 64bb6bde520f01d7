use super::{Scratch, SplitSystem};
use crate::error::{Error, Result};
use crate::extension::ExtendedState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `Φ`: subflows in build order.
    Base,
    /// `Φ*`: subflows in reverse order.
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub direction: Direction,
    pub coefficient: f64,
}

/// Stages listed in application order; the first stage acts on the state first.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionScheme {
    stages: Vec<Stage>,
    order: u32,
}

fn stage(direction: Direction, coefficient: f64) -> Stage {
    Stage {
        direction,
        coefficient,
    }
}

impl CompositionScheme {
    pub fn new(stages: Vec<Stage>, order: u32) -> Result<Self> {
        let sum: f64 = stages.iter().map(|s| s.coefficient).sum();
        if stages.is_empty() || (sum - 1.0).abs() > 1e-12 || stages.iter().any(|s| !s.coefficient.is_finite()) {
            return Err(Error::Config(format!(
                "composition coefficients must sum to 1, got {sum}"
            )));
        }
        Ok(CompositionScheme { stages, order })
    }

    /// `Ψ_τ = Φ_{α_s τ} ∘ Φ*_{β_s τ} ∘ … ∘ Φ_{α_1 τ} ∘ Φ*_{β_1 τ}`.
    pub fn from_alpha_beta(alpha: &[f64], beta: &[f64], order: u32) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::Config("alpha and beta need the same length".into()));
        }
        let stages = beta
            .iter()
            .zip(alpha)
            .flat_map(|(&b, &a)| [stage(Direction::Adjoint, b), stage(Direction::Base, a)])
            .collect();
        Self::new(stages, order)
    }

    pub fn first_order() -> Self {
        CompositionScheme {
            stages: vec![stage(Direction::Base, 1.0)],
            order: 1,
        }
    }

    pub fn adjoint_first_order() -> Self {
        CompositionScheme {
            stages: vec![stage(Direction::Adjoint, 1.0)],
            order: 1,
        }
    }

    /// `Φ*_{τ/2} ∘ Φ_{τ/2}`.
    pub fn strang() -> Self {
        CompositionScheme {
            stages: vec![stage(Direction::Base, 0.5), stage(Direction::Adjoint, 0.5)],
            order: 2,
        }
    }

    /// Five-stage Suzuki composition of the symmetric second-order map
    /// `Φ_{h/2} ∘ Φ*_{h/2}`, written with `α_i = β_i = γ_i / 2` and
    /// `γ = (g, g, 1 - 4g, g, g)`, `g = 1 / (4 - 4^{1/3})`.
    pub fn suzuki_fourth() -> Self {
        let g = 1.0 / (4.0 - 4f64.cbrt());
        let gamma = [g, g, 1.0 - 4.0 * g, g, g];
        let half: Vec<f64> = gamma.iter().map(|x| x / 2.0).collect();
        Self::from_alpha_beta(&half, &half, 4).expect("Suzuki coefficients are consistent")
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// The adjoint of the composition is the reversed composition of adjoints;
    /// a scheme is symmetric when that equals itself.
    pub fn is_symmetric(&self) -> bool {
        let live: Vec<Stage> = self.stages.iter().copied().filter(|s| s.coefficient != 0.0).collect();
        let mirrored = live.iter().rev().map(|s| Stage {
            direction: match s.direction {
                Direction::Base => Direction::Adjoint,
                Direction::Adjoint => Direction::Base,
            },
            coefficient: s.coefficient,
        });
        live.iter()
            .zip(mirrored)
            .all(|(a, b)| a.direction == b.direction && (a.coefficient - b.coefficient).abs() <= 1e-15)
    }

    /// Expands the stages into a sequence of `(subflow, step fraction)` and
    /// fuses neighbouring applications of the same subflow.
    pub fn flow_sequence(&self, n_flows: usize) -> Vec<(usize, f64)> {
        let mut seq: Vec<(usize, f64)> = Vec::new();
        for st in &self.stages {
            if st.coefficient == 0.0 {
                continue;
            }
            let order: Box<dyn Iterator<Item = usize>> = match st.direction {
                Direction::Base => Box::new(0..n_flows),
                Direction::Adjoint => Box::new((0..n_flows).rev()),
            };
            for f in order {
                match seq.last_mut() {
                    Some((last, c)) if *last == f => *c += st.coefficient,
                    _ => seq.push((f, st.coefficient)),
                }
            }
        }
        seq
    }
}

/// A compiled composition method bound to a split system.
pub struct Stepper<'a> {
    system: &'a SplitSystem,
    sequence: Vec<(usize, f64)>,
    scratch: Scratch,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a SplitSystem, scheme: &CompositionScheme) -> Self {
        Stepper {
            system,
            sequence: scheme.flow_sequence(system.flows().len()),
            scratch: Scratch::default(),
        }
    }

    pub fn step(&mut self, s: &mut ExtendedState, tau: f64) -> Result<()> {
        for &(f, c) in &self.sequence {
            self.system.apply_with(f, s, c * tau, &mut self.scratch)?;
        }
        Ok(())
    }
}
