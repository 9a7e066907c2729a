//! CSV and JSON writers. Floats use the shortest representation that parses
//! back to the same value.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use apprentice_core::apprentice::RunResult;
use serde::Serialize;

use crate::{CliError, SweepRow};

pub const ITERATION_COLUMNS: &str = "iter,t_margin,dist_min,ratio_observed,ratio_bound,mc_samples,wallclock_ms";
pub const DIAG_COLUMNS: &str =
    "iter,distance,ratio_observed,ratio_bound,hull_ratio,lambda,hypotheses_hold,bound_satisfied";
pub const SWEEP_COLUMNS: &str = "epsilon,epsilon_rl,k,status,iterations,dist_min,threshold,theorem1_bound";

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// Wall-clock values only appear with `timings`, so two identical runs give
/// identical bytes by default.
pub fn iterations_csv(result: &RunResult, timings: bool, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{ITERATION_COLUMNS}")?;
    for (i, r) in result.records.iter().enumerate() {
        let d = r.diagnostic.as_ref();
        let wall = if timings {
            opt(result.wallclock_ms.get(i).copied())
        } else {
            String::new()
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.iteration,
            num(r.t_margin),
            num(r.dist_min),
            opt(d.map(|d| d.ratio_observed)),
            opt(d.and_then(|d| d.ratio_bound)),
            r.mc_samples,
            wall
        )?;
    }
    Ok(())
}

pub fn diag_csv(result: &RunResult, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{DIAG_COLUMNS}")?;
    for d in result.records.iter().filter_map(|r| r.diagnostic.as_ref()) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            d.iteration,
            num(d.distance),
            num(d.ratio_observed),
            opt(d.ratio_bound),
            opt(d.hull_ratio),
            num(d.lambda),
            d.hypotheses_hold,
            d.bound_satisfied
        )?;
    }
    Ok(())
}

pub(crate) fn sweep_csv(rows: &[SweepRow], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            num(r.epsilon),
            num(r.epsilon_rl),
            r.k,
            r.status,
            r.iterations.map(|n| n.to_string()).unwrap_or_default(),
            opt(r.dist_min),
            opt(r.threshold),
            opt(r.theorem1_bound)
        )?;
    }
    Ok(())
}
