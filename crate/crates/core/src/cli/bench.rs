use std::fmt::Write as _;
use std::time::Instant;

use crate::diagnostics::{simulate, step_count, Method};
use crate::error::Result;
use crate::extension::ExtensionSpec;
use crate::flows::SplitSystem;
use crate::phasecore::ModelId;

/// Methods of the timing table, in column order.
pub const BENCH_METHODS: [Method; 4] = [Method::Ksym2, Method::Rk3, Method::Ksym4, Method::Rk5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub model: ModelId,
    pub tau: f64,
    pub t_final: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn render(&self) -> String {
        let c = &self.config;
        let mut out = format!("CPU time (s), {}, tau = {}, T = {}\n", c.model, c.tau, c.t_final);
        let mut header = format!("{:<16}", "model");
        let mut row = format!("{:<16}", c.model.to_string());
        for r in &self.rows {
            let _ = write!(header, " | {:>10}", r.method.table_label());
            let _ = write!(row, " | {:>10.3}", r.seconds);
        }
        out.push_str(&header);
        out.push('\n');
        out.push_str(&row);
        out
    }
}

/// Wall-clock time of each method over the whole run, executed one after another.
pub fn bench_table(cfg: &BenchConfig) -> Result<BenchTable> {
    let model = cfg.model.build()?;
    let spec = ExtensionSpec::for_model(model.as_ref(), cfg.omega)?;
    let z0 = model.default_initial();
    let sys = SplitSystem::build(model, spec)?;
    let n = step_count(cfg.tau, cfg.t_final)?.max(1);
    let mut rows = Vec::with_capacity(BENCH_METHODS.len());
    for m in BENCH_METHODS {
        let start = Instant::now();
        simulate(&sys, m, &z0, cfg.tau, cfg.t_final, n)?;
        rows.push(BenchRow {
            method: m,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(BenchTable { config: *cfg, rows })
}
