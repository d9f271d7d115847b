//! Plot script and summary table for an artifact directory.
//!
//! Nothing is rendered here. `plots.gp` is a gnuplot script that reads the
//! trace CSVs next to it; run `gnuplot plots.gp` inside the directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiment::{
    arms, column_indices, load_artifact, trace_path, Arm, ExperimentError, SeedSummary,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{0}: trace has no rows")]
    EmptyTrace(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// What a chart plots against the timeslot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// Summed average-reward estimates, both objectives.
    AvgReward,
    /// Decision errors per timeslot.
    Errors,
    /// Running mini-slot level DER.
    DerMinislot,
    /// Running timeslot level DER.
    DerTimeslot,
}

impl Chart {
    fn columns(self) -> &'static [&'static str] {
        match self {
            Chart::AvgReward => &["t", "Rbar", "Pbar"],
            Chart::Errors => &["t", "err_count"],
            Chart::DerMinislot => &["t", "der_minislot"],
            Chart::DerTimeslot => &["t", "der_timeslot"],
        }
    }

    fn slug(self) -> &'static str {
        match self {
            Chart::AvgReward => "avg_reward",
            Chart::Errors => "errors",
            Chart::DerMinislot => "der_minislot",
            Chart::DerTimeslot => "der_timeslot",
        }
    }

    fn ylabel(self) -> &'static str {
        match self {
            Chart::AvgReward => "estimated average reward",
            Chart::Errors => "decision errors per timeslot",
            Chart::DerMinislot => "mini-slot level average DER",
            Chart::DerTimeslot => "timeslot level average DER",
        }
    }
}

/// Charts for a scenario name: the figure presets get their own figure's
/// charts, anything else gets all of them.
pub fn charts_for(name: &str) -> Vec<Chart> {
    let base = name.strip_suffix("-baseline").unwrap_or(name);
    match base {
        "fig2a" | "fig2b" | "fig3a" | "fig3b" => vec![Chart::AvgReward],
        "fig4a" | "fig4b" => vec![Chart::Errors],
        "fig5" | "fig6" => vec![Chart::DerMinislot, Chart::DerTimeslot],
        _ => vec![
            Chart::AvgReward,
            Chart::Errors,
            Chart::DerMinislot,
            Chart::DerTimeslot,
        ],
    }
}

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub script: PathBuf,
    pub table: PathBuf,
}

/// Writes `plots.gp` and `summary.txt` into an artifact directory.
pub fn emit_report(dir: &Path) -> Result<ReportFiles, ReportError> {
    let art = load_artifact(dir)?;
    let charts = charts_for(&art.config.name);
    let mut needed: Vec<&str> = charts
        .iter()
        .flat_map(|c| c.columns().iter().copied())
        .collect();
    needed.sort_unstable();
    needed.dedup();

    let arms = arms(&art.config);
    for &arm in &arms {
        for &seed in &art.config.seeds {
            check_trace(&trace_path(dir, arm, seed), &needed)?;
        }
    }

    let script = dir.join("plots.gp");
    let text = plot_script(&art.config.name, &charts, &arms, &art.config.seeds);
    fs::write(&script, text).map_err(|source| ReportError::Io {
        path: script.clone(),
        source,
    })?;
    let table = dir.join("summary.txt");
    fs::write(&table, summary_table(&art.config.name, &art.summaries)).map_err(|source| {
        ReportError::Io {
            path: table.clone(),
            source,
        }
    })?;
    Ok(ReportFiles { script, table })
}

fn check_trace(path: &Path, needed: &[&str]) -> Result<(), ReportError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let header = r
        .headers()
        .map_err(|source| ExperimentError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    column_indices(&header, needed, path)?;
    if r.records().next().is_none() {
        return Err(ReportError::EmptyTrace(path.to_path_buf()));
    }
    Ok(())
}

fn file_name(arm: Arm, seed: u64) -> String {
    trace_path(Path::new(""), arm, seed).display().to_string()
}

pub fn plot_script(name: &str, charts: &[Chart], arms: &[Arm], seeds: &[u64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {name}: run with `gnuplot plots.gp` in this directory");
    let _ = writeln!(s, "set datafile separator \",\"");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set key outside right");
    let _ = writeln!(s, "set xlabel \"timeslot\"");
    for &chart in charts {
        let _ = writeln!(s);
        let _ = writeln!(s, "set output \"{name}_{}.png\"", chart.slug());
        let _ = writeln!(s, "set title \"{name}: {}\"", chart.ylabel());
        let _ = writeln!(s, "set ylabel \"{}\"", chart.ylabel());
        let mut series = Vec::new();
        for &arm in arms {
            for &seed in seeds {
                let f = file_name(arm, seed);
                for col in &chart.columns()[1..] {
                    series.push(format!(
                        "\"{f}\" using \"t\":\"{col}\" with lines title \"{} {col} seed {seed}\"",
                        arm.label()
                    ));
                }
            }
        }
        let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
    }
    s
}

pub fn summary_table(name: &str, rows: &[SeedSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{name}");
    let _ = writeln!(
        s,
        "{:<9} {:>6} {:>9} {:>9} {:>9} {:>12} {:>12} {:>9}",
        "arm", "seed", "timeslots", "Rbar", "Pbar", "der_minislot", "der_timeslot", "full_tx"
    );
    let line = |s: &mut String, arm: &str, seed: &str, r: &SeedSummary| {
        let _ = writeln!(
            s,
            "{:<9} {:>6} {:>9} {:>9.4} {:>9.4} {:>12.6} {:>12.6} {:>9.4}",
            arm,
            seed,
            r.timeslots,
            r.rbar,
            r.pbar,
            r.der_minislot,
            r.der_timeslot,
            r.full_minislot_tx
        );
    };
    for r in rows {
        line(&mut s, r.arm.label(), &r.seed.to_string(), r);
    }
    for arm in [Arm::Morl, Arm::Baseline] {
        let sel: Vec<&SeedSummary> = rows.iter().filter(|r| r.arm == arm).collect();
        if sel.is_empty() {
            continue;
        }
        let k = sel.len() as f64;
        let mean = |f: fn(&SeedSummary) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / k;
        let m = SeedSummary {
            arm,
            seed: 0,
            timeslots: sel.iter().map(|r| r.timeslots).max().unwrap_or(0),
            rbar: mean(|r| r.rbar),
            pbar: mean(|r| r.pbar),
            der_minislot: mean(|r| r.der_minislot),
            der_timeslot: mean(|r| r.der_timeslot),
            full_minislot_tx: mean(|r| r.full_minislot_tx),
            stopped_early: false,
        };
        line(&mut s, arm.label(), "mean", &m);
    }
    s
}
