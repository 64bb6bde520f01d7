//! Command-line front end: `run`, `verify`, `bench` and `order`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or argument
//! error, 3 integration or domain error.

mod bench;
mod config;
mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{
    convergence_order, copy_divergence_series, relative_energy_error_series, simulate, EnergyKind, Method,
    OrderStudy, Trajectory,
};
use crate::error::{Error, Result};
use crate::extension::ExtensionSpec;
use crate::flows::SplitSystem;
use crate::phasecore::{ModelId, PhaseState};

pub use bench::{bench_table, BenchConfig, BenchRow, BenchTable, BENCH_METHODS};
pub use config::{parse_vector, Overrides, RunConfig};
pub use verify::{run_suite, Check, Suite, VerifyOptions};

pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INTEGRATION: u8 = 3;

/// Exit status for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Config(_) | Error::Argument(_) => EXIT_CONFIG,
        _ => EXIT_INTEGRATION,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ksym", version, about = "Explicit K-symplectic integrators for non-canonical Hamiltonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write its diagnostics as CSV.
    Run(RunArgs),
    /// Run verification suites; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Time the four comparison methods.
    Bench(BenchArgs),
    /// Measure convergence orders against a fine reference.
    Order(OrderArgs),
}

fn parse_model(s: &str) -> std::result::Result<ModelId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Flags shared by every subcommand that configures a run.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// model1, gyrocenter (gyro) or ablowitz-ladik[:N] (al[:N]).
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelId>,
    /// ksym1, ksym2, ksym4, rk3 or rk5.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Restraint strength.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
    /// Comma-separated initial state overriding the model default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<f64>>,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            model: self.model,
            method: self.method,
            tau: self.tau,
            t_final: self.t_final,
            omega: self.omega,
            record_every: self.record_every,
            initial: self.initial.clone(),
            out: self.out.clone(),
            seed: self.seed,
        }
    }

    /// Layers command defaults, the config file and the flags.
    fn resolve(&self, defaults: RunConfig) -> Result<RunConfig> {
        let mut cfg = defaults;
        if let Some(path) = &self.config {
            Overrides::from_file(path)?.apply(&mut cfg);
        }
        self.overrides().apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub flags: RunFlags,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// subflows, poisson, orders, invariants or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace the third-order tableau by a consistent but wrong one (negative control).
    #[arg(long, hide = true)]
    pub corrupt_tableau: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub flags: RunFlags,
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    #[command(flatten)]
    pub flags: RunFlags,
    /// Comma-separated step sizes, at least three.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
}

fn model_system(cfg: &RunConfig) -> Result<SplitSystem> {
    let model = cfg.model.build()?;
    let spec = ExtensionSpec::for_model(model.as_ref(), cfg.omega)?;
    SplitSystem::build(model, spec)
}

fn initial_state(cfg: &RunConfig, sys: &SplitSystem) -> Result<PhaseState> {
    let z = match &cfg.initial {
        Some(v) => PhaseState(v.clone()),
        None => sys.model().default_initial(),
    };
    sys.model().check_domain(z.as_slice())?;
    Ok(z)
}

/// Formats a double as the shortest decimal that reads back to the same value.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

/// CSV of the trajectory diagnostics: `t, energy_rel_aug, energy_rel_orig,
/// copy_div_max, c1..c{d}` with first-copy coordinates.
pub fn write_csv(traj: &Trajectory, sys: &SplitSystem, w: &mut dyn Write) -> Result<()> {
    let aug = relative_energy_error_series(traj, sys.model(), sys.spec(), EnergyKind::Augmented)?;
    let orig = relative_energy_error_series(traj, sys.model(), sys.spec(), EnergyKind::OriginalFirstCopy)?;
    let div = copy_divergence_series(traj);
    let io = |e: io::Error| Error::Io(format!("cannot write CSV: {e}"));
    let mut header = String::from("t,energy_rel_aug,energy_rel_orig,copy_div_max");
    for j in 1..=sys.model().dim() {
        header.push_str(&format!(",c{j}"));
    }
    writeln!(w, "{header}").map_err(io)?;
    for (k, s) in traj.states.iter().enumerate() {
        let mut line = [traj.times[k], aug[k], orig[k], div[k]]
            .iter()
            .map(|v| format_f64(*v))
            .collect::<Vec<_>>();
        line.extend(s.copy(0).iter().map(|v| format_f64(*v)));
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `run`: integrate and write the CSV.
pub fn cmd_run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let sys = model_system(cfg)?;
    let z0 = initial_state(cfg, &sys)?;
    let traj = simulate(&sys, cfg.method, &z0, cfg.tau, cfg.t_final, cfg.record_every)?;
    match &cfg.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Error::Argument(format!("cannot create {}: {e}", path.display())))?;
            write_csv(&traj, &sys, &mut BufWriter::new(file))
        }
        None => write_csv(&traj, &sys, stdout),
    }
}

/// `order`: per-step errors and fitted slope for each requested method.
pub fn cmd_order(cfg: &RunConfig, methods: &[Method], taus: &[f64]) -> Result<Vec<OrderStudy>> {
    if taus.len() < 3 {
        return Err(Error::Argument(format!("order study needs at least 3 step sizes, got {}", taus.len())));
    }
    let sys = model_system(cfg)?;
    let z0 = initial_state(cfg, &sys)?;
    methods
        .iter()
        .map(|&m| convergence_order(&sys, m, &z0, taus, cfg.t_final))
        .collect()
}

pub fn render_order(cfg: &RunConfig, studies: &[OrderStudy]) -> String {
    let mut out = format!("order study: {}, T = {}, omega = {}\n", cfg.model, cfg.t_final, cfg.omega);
    for st in studies {
        out.push_str(&format!("{}\n  {:>10}  {:>12}\n", st.method, "tau", "error"));
        for (t, e) in st.taus.iter().zip(&st.errors) {
            out.push_str(&format!("  {t:>10}  {e:>12.4e}\n"));
        }
        out.push_str(&format!("  slope {:.3} (nominal {})\n", st.slope, st.method.nominal_order()));
    }
    out
}

pub const DEFAULT_ORDER_TAUS: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<u8> {
    let io = |e: io::Error| Error::Io(format!("cannot write output: {e}"));
    match cli.command {
        Command::Run(a) => {
            let cfg = a.flags.resolve(RunConfig::default())?;
            cmd_run(&cfg, stdout)?;
            Ok(0)
        }
        Command::Verify(a) => {
            let suite: Suite = a.suite.parse()?;
            let mut opts = VerifyOptions {
                seed: a.seed,
                ..VerifyOptions::default()
            };
            if a.corrupt_tableau {
                opts = opts.with_corrupted_tableau();
            }
            let checks = run_suite(suite, &opts)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            for c in &checks {
                writeln!(stdout, "{c}").map_err(io)?;
            }
            writeln!(stdout, "{} checks, {failed} failed", checks.len()).map_err(io)?;
            Ok(if failed == 0 { 0 } else { EXIT_VERIFY_FAILED })
        }
        Command::Bench(a) => {
            let cfg = a.flags.resolve(RunConfig::default())?;
            let models = if a.flags.model.is_some() || a.flags.config.is_some() {
                vec![cfg.model]
            } else {
                vec![ModelId::Model1, ModelId::Gyrocenter]
            };
            for model in models {
                let table = bench_table(&BenchConfig {
                    model,
                    tau: cfg.tau,
                    t_final: cfg.t_final,
                    omega: cfg.omega,
                })?;
                writeln!(stdout, "{}\n", table.render()).map_err(io)?;
            }
            Ok(0)
        }
        Command::Order(a) => {
            let defaults = RunConfig {
                t_final: 1.0,
                ..RunConfig::default()
            };
            let cfg = a.flags.resolve(defaults)?;
            let methods: Vec<Method> = match a.flags.method {
                Some(m) => vec![m],
                None => Method::ALL.to_vec(),
            };
            let taus = a.taus.unwrap_or_else(|| DEFAULT_ORDER_TAUS.to_vec());
            let studies = cmd_order(&cfg, &methods, &taus)?;
            write!(stdout, "{}", render_order(&cfg, &studies)).map_err(io)?;
            Ok(0)
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli, &mut lock) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_for(cfg: &RunConfig) -> String {
        let mut buf = Vec::new();
        cmd_run(cfg, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn zero_horizon_csv() {
        let cfg = RunConfig {
            t_final: 0.0,
            ..RunConfig::default()
        };
        let text = csv_for(&cfg);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,energy_rel_aug,energy_rel_orig,copy_div_max,c1,c2,c3,c4");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("0.0,0.0,0.0,0.0,"));
    }

    #[test]
    fn row_count_and_determinism() {
        let cfg = RunConfig {
            t_final: 1.0,
            record_every: 10,
            ..RunConfig::default()
        };
        let a = csv_for(&cfg);
        assert_eq!(a.lines().count(), 1 + 1 + 10);
        assert_eq!(a, csv_for(&cfg));
        assert!(!a.contains('\r'));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Argument("x".into())), 2);
        assert_eq!(exit_code(&Error::Config("x".into()).at_step(3)), 2);
        assert_eq!(
            exit_code(&Error::Integration {
                flow: "H_A".into(),
                coordinate: 0,
                reason: "x".into()
            }),
            3
        );
    }

    #[test]
    fn order_needs_three_taus() {
        let cfg = RunConfig {
            t_final: 1.0,
            ..RunConfig::default()
        };
        assert!(matches!(cmd_order(&cfg, &[Method::Ksym2], &[0.01]), Err(Error::Argument(_))));
    }
}
