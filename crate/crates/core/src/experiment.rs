//! Seeded experiment execution and the files it leaves behind.
//!
//! An output directory holds
//!
//! * `config.toml`, the fully resolved scenario,
//! * `<arm>_seed<S>.csv`, one row per timeslot (see [`TRACE_COLUMNS`]),
//! * `<arm>_seed<S>_rbar.csv`, the per-mini-slot average-reward estimates,
//! * `summary.csv`, one row per (arm, seed),
//! * `<arm>_seed<S>.ckpt` while a run is in progress.
//!
//! `arm` is `morl` for the configured weights and `baseline` for the
//! `w_p = 0` companion run.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::agent::{AgentError, DrcController};
use crate::config::{parse_config, ConfigError, ScenarioConfig};
use crate::metrics::{DerLevel, MetricsError, RunTrace, TimeslotRecord};
use crate::radio::{InterferencePattern, RadioError};

pub const TRACE_COLUMNS: [&str; 10] = [
    "t",
    "R_t",
    "P_t",
    "Rbar",
    "Pbar",
    "err_count",
    "minislot_err_bits",
    "timeslot_err",
    "der_minislot",
    "der_timeslot",
];

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "arm",
    "seed",
    "timeslots",
    "Rbar",
    "Pbar",
    "der_minislot",
    "der_timeslot",
    "full_minislot_tx",
    "stopped_early",
];

/// Trailing window used for the `full_minislot_tx` summary column.
pub const TAIL_WINDOW: usize = 500;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{dir} holds a run of a different config; use a fresh directory")]
    ConfigMismatch { dir: PathBuf },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arm {
    Morl,
    Baseline,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Morl => "morl",
            Arm::Baseline => "baseline",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "morl" => Some(Arm::Morl),
            "baseline" => Some(Arm::Baseline),
            _ => None,
        }
    }
}

pub fn trace_path(dir: &Path, arm: Arm, seed: u64) -> PathBuf {
    dir.join(format!("{}_seed{seed}.csv", arm.label()))
}

pub fn rbar_path(dir: &Path, arm: Arm, seed: u64) -> PathBuf {
    dir.join(format!("{}_seed{seed}_rbar.csv", arm.label()))
}

pub fn checkpoint_path(dir: &Path, arm: Arm, seed: u64) -> PathBuf {
    dir.join(format!("{}_seed{seed}.ckpt", arm.label()))
}

/// Arms run for a config: the configured weights, plus the baseline when
/// requested.
pub fn arms(cfg: &ScenarioConfig) -> Vec<Arm> {
    if cfg.with_baseline {
        vec![Arm::Morl, Arm::Baseline]
    } else {
        vec![Arm::Morl]
    }
}

fn arm_config(cfg: &ScenarioConfig, arm: Arm) -> ScenarioConfig {
    match arm {
        Arm::Morl => cfg.clone(),
        Arm::Baseline => cfg.baseline(),
    }
}

/// One (arm, seed) run: controller plus the trace recorded so far.
pub struct SeedJob {
    cfg: ScenarioConfig,
    arm: Arm,
    ctl: DrcController,
    trace: RunTrace,
    stopped: bool,
    /// Trace rows already on disk.
    flushed: usize,
}

impl SeedJob {
    pub fn new(cfg: &ScenarioConfig, arm: Arm, seed: u64) -> Result<Self, ExperimentError> {
        let cfg = arm_config(cfg, arm);
        let ctl = DrcController::new(cfg.environment()?, cfg.quantizer, cfg.learning, seed)?;
        let trace = RunTrace::new(cfg.grid.num_minislots)?;
        Ok(Self {
            cfg,
            arm,
            ctl,
            trace,
            stopped: false,
            flushed: 0,
        })
    }

    /// Picks up from the checkpoint in `dir`, if there is one.
    pub fn resume(
        cfg: &ScenarioConfig,
        arm: Arm,
        seed: u64,
        dir: &Path,
    ) -> Result<Option<Self>, ExperimentError> {
        let ckpt = checkpoint_path(dir, arm, seed);
        if !ckpt.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&ckpt).map_err(io_err(&ckpt))?;
        let cfg = arm_config(cfg, arm);
        let ctl = DrcController::restore(cfg.environment()?, cfg.quantizer, cfg.learning, &text)?;
        if ctl.seed() != seed {
            return Err(ExperimentError::Format {
                path: ckpt,
                msg: format!("checkpoint is for seed {}, expected {seed}", ctl.seed()),
            });
        }
        let mut trace = read_trace(
            &trace_path(dir, arm, seed),
            &rbar_path(dir, arm, seed),
            cfg.grid.num_minislots,
        )?;
        let t = ctl.t() as usize;
        if trace.len() < t {
            return Err(ExperimentError::Format {
                path: ckpt,
                msg: format!(
                    "checkpoint at timeslot {t} but trace has {} rows",
                    trace.len()
                ),
            });
        }
        let mut flushed = trace.len();
        if trace.len() > t {
            trace = truncate(&trace, t)?;
            flushed = 0;
        }
        Ok(Some(Self {
            cfg,
            arm,
            ctl,
            trace,
            stopped: false,
            flushed,
        }))
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn controller(&self) -> &DrcController {
        &self.ctl
    }

    pub fn t(&self) -> u64 {
        self.ctl.t()
    }

    pub fn is_done(&self) -> bool {
        self.stopped || self.ctl.t() >= self.cfg.horizon
    }

    /// Runs one timeslot and appends it to the trace.
    pub fn step(&mut self) {
        let out = self.ctl.run_timeslot();
        self.trace
            .record_outcome(&out, self.ctl.avg_rewards())
            .expect("trace sized from the same grid");
        if let Some(rule) = self.cfg.stop {
            self.stopped = plateaued(
                &self.trace,
                self.cfg.learning.weights(),
                rule.window,
                rule.tol,
            );
        }
    }

    /// Steps until the horizon, the stop rule, or timeslot `until`.
    pub fn advance_to(&mut self, until: u64) {
        while !self.is_done() && self.ctl.t() < until {
            self.step();
        }
    }

    /// Brings the trace files up to date, appending when possible.
    fn flush_trace(&mut self, dir: &Path) -> Result<(), ExperimentError> {
        let seed = self.ctl.seed();
        let (main, rbar) = (
            trace_path(dir, self.arm, seed),
            rbar_path(dir, self.arm, seed),
        );
        if self.flushed == 0 {
            write_trace(&self.trace, &main, &rbar)?;
        } else {
            let mut a = String::new();
            let mut b = String::new();
            for i in self.flushed..self.trace.len() {
                trace_row(&mut a, &self.trace, i)?;
                rbar_row(&mut b, &self.trace.records()[i]);
            }
            append(&main, &a)?;
            append(&rbar, &b)?;
        }
        self.flushed = self.trace.len();
        Ok(())
    }

    /// Writes the trace files and a checkpoint for the current timeslot.
    pub fn save_checkpoint(&mut self, dir: &Path) -> Result<(), ExperimentError> {
        self.flush_trace(dir)?;
        write_atomic(
            &checkpoint_path(dir, self.arm, self.ctl.seed()),
            &self.ctl.checkpoint(),
        )
    }

    /// Writes the final trace files and drops the checkpoint.
    pub fn finish(mut self, dir: &Path) -> Result<SeedSummary, ExperimentError> {
        let seed = self.ctl.seed();
        self.flush_trace(dir)?;
        let ckpt = checkpoint_path(dir, self.arm, seed);
        if ckpt.exists() {
            fs::remove_file(&ckpt).map_err(io_err(&ckpt))?;
        }
        summarize(self.arm, seed, &self.trace, &self.cfg.pattern, self.stopped)
    }
}

/// True once the scalarized summed average-reward estimate has stayed within
/// `tol` over the last `window` timeslots.
pub fn plateaued(trace: &RunTrace, w: [f64; 2], window: usize, tol: f64) -> bool {
    let recs = trace.records();
    if recs.len() < window {
        return false;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in &recs[recs.len() - window..] {
        let s = r.summed_avg_reward();
        let v = w[0] * s[0] + w[1] * s[1];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo < tol
}

/// Runs one seed in memory, without touching the filesystem.
pub fn run_seed(cfg: &ScenarioConfig, arm: Arm, seed: u64) -> Result<RunTrace, ExperimentError> {
    let mut job = SeedJob::new(cfg, arm, seed)?;
    job.advance_to(u64::MAX);
    Ok(job.trace)
}

/// Final numbers of one (arm, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub arm: Arm,
    pub seed: u64,
    pub timeslots: usize,
    pub rbar: f64,
    pub pbar: f64,
    pub der_minislot: f64,
    pub der_timeslot: f64,
    /// Fraction of the trailing timeslots with a transmission in a fully
    /// jammed mini-slot.
    pub full_minislot_tx: f64,
    pub stopped_early: bool,
}

pub fn summarize(
    arm: Arm,
    seed: u64,
    trace: &RunTrace,
    pattern: &InterferencePattern,
    stopped_early: bool,
) -> Result<SeedSummary, ExperimentError> {
    let n = trace.len();
    let last = trace.last().ok_or(MetricsError::EmptyWindow)?;
    let [rbar, pbar] = last.summed_avg_reward();
    Ok(SeedSummary {
        arm,
        seed,
        timeslots: n,
        rbar,
        pbar,
        der_minislot: trace.avg_der(DerLevel::Minislot, n)?,
        der_timeslot: trace.avg_der(DerLevel::Timeslot, n)?,
        full_minislot_tx: full_minislot_tx_fraction(trace, pattern, TAIL_WINDOW),
        stopped_early,
    })
}

/// Share of the last `window` timeslots in which some UE was scheduled in a
/// mini-slot the pattern jams on every frequency. Any such transmission is a
/// decision error, so the error bits are enough to tell.
pub fn full_minislot_tx_fraction(
    trace: &RunTrace,
    pattern: &InterferencePattern,
    window: usize,
) -> f64 {
    let recs = trace.records();
    let tail = &recs[recs.len().saturating_sub(window)..];
    if tail.is_empty() {
        return 0.0;
    }
    let hits = tail
        .iter()
        .filter(|r| {
            (0..trace.num_minislots()).any(|n| {
                r.minislot_err_bits & (1 << n) != 0 && pattern.slice(r.t, n).fully_occupied()
            })
        })
        .count();
    hits as f64 / tail.len() as f64
}

/// A completed experiment directory.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub config: ScenarioConfig,
    pub summaries: Vec<SeedSummary>,
}

impl RunArtifact {
    pub fn summary(&self, arm: Arm) -> impl Iterator<Item = &SeedSummary> {
        self.summaries.iter().filter(move |s| s.arm == arm)
    }
}

/// Runs every (arm, seed) of `cfg` in parallel and writes the artifact files
/// into `dir`. With `resume`, unfinished runs continue from their checkpoints
/// and finished ones are read back instead of rerun.
pub fn run_experiment(
    cfg: &ScenarioConfig,
    dir: &Path,
    resume: bool,
) -> Result<RunArtifact, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let snapshot = cfg.to_toml();
    let snap_path = dir.join("config.toml");
    if resume && snap_path.exists() {
        let old = fs::read_to_string(&snap_path).map_err(io_err(&snap_path))?;
        if old != snapshot {
            return Err(ExperimentError::ConfigMismatch {
                dir: dir.to_path_buf(),
            });
        }
    }
    write_atomic(&snap_path, &snapshot)?;

    let jobs: Vec<(Arm, u64)> = arms(cfg)
        .into_iter()
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut summaries = jobs
        .par_iter()
        .map(|&(arm, seed)| run_one(cfg, arm, seed, dir, resume))
        .collect::<Result<Vec<_>, _>>()?;
    summaries.sort_by_key(|s| (s.arm, s.seed));
    write_summary(&summaries, &dir.join("summary.csv"))?;
    Ok(RunArtifact {
        dir: dir.to_path_buf(),
        config: cfg.clone(),
        summaries,
    })
}

fn run_one(
    cfg: &ScenarioConfig,
    arm: Arm,
    seed: u64,
    dir: &Path,
    resume: bool,
) -> Result<SeedSummary, ExperimentError> {
    let mut job = if resume {
        match SeedJob::resume(cfg, arm, seed, dir)? {
            Some(job) => job,
            None => {
                let trace_file = trace_path(dir, arm, seed);
                if trace_file.exists() {
                    let arm_cfg = arm_config(cfg, arm);
                    let trace = read_trace(
                        &trace_file,
                        &rbar_path(dir, arm, seed),
                        arm_cfg.grid.num_minislots,
                    )?;
                    let stopped = (trace.len() as u64) < arm_cfg.horizon;
                    return summarize(arm, seed, &trace, &arm_cfg.pattern, stopped);
                }
                SeedJob::new(cfg, arm, seed)?
            }
        }
    } else {
        SeedJob::new(cfg, arm, seed)?
    };
    let every = cfg.checkpoint_every;
    while !job.is_done() {
        let next = job
            .t()
            .checked_div(every)
            .map_or(u64::MAX, |k| (k + 1) * every);
        job.advance_to(next);
        if every != 0 && !job.is_done() {
            job.save_checkpoint(dir)?;
        }
    }
    job.finish(dir)
}

/// Runs `cfg` once per energy weight, into `dir/wp-<value>`, and collects
/// every summary row in `dir/sweep.csv`.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    weights: &[f64],
    dir: &Path,
    resume: bool,
) -> Result<Vec<(f64, RunArtifact)>, ExperimentError> {
    let mut out = Vec::with_capacity(weights.len());
    for &w_p in weights {
        let mut c = cfg.clone();
        c.learning.w_p = w_p;
        c.learning.validate()?;
        c.name = format!("{}-wp{w_p}", cfg.name);
        let art = run_experiment(&c, &dir.join(format!("wp-{w_p}")), resume)?;
        out.push((w_p, art));
    }
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    let mut header = vec!["w_p"];
    header.extend(SUMMARY_COLUMNS);
    w.write_record(&header).map_err(csv_err(&path))?;
    for (w_p, art) in &out {
        for s in &art.summaries {
            let mut row = vec![w_p.to_string()];
            row.extend(summary_row(s));
            w.write_record(&row).map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(out)
}

// ---- persistence ---------------------------------------------------------------

fn write_atomic(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn append(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let mut f = fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    f.write_all(contents.as_bytes()).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))
}

fn trace_row(out: &mut String, trace: &RunTrace, i: usize) -> Result<(), ExperimentError> {
    let r = &trace.records()[i];
    let [rb, pb] = r.summed_avg_reward();
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        r.t,
        r.throughput,
        r.energy,
        rb,
        pb,
        r.err_count,
        r.minislot_err_bits,
        u8::from(r.timeslot_err),
        trace.avg_der(DerLevel::Minislot, i + 1)?,
        trace.avg_der(DerLevel::Timeslot, i + 1)?,
    );
    Ok(())
}

fn rbar_row(out: &mut String, r: &TimeslotRecord) {
    let _ = write!(out, "{}", r.t);
    for a in &r.avg_rewards {
        let _ = write!(out, ",{},{}", a[0], a[1]);
    }
    out.push('\n');
}

pub fn write_trace(trace: &RunTrace, path: &Path, rbar: &Path) -> Result<(), ExperimentError> {
    let mut main = String::with_capacity(trace.len() * 64);
    let _ = writeln!(main, "{}", TRACE_COLUMNS.join(","));
    let mut agents = String::with_capacity(trace.len() * 96);
    agents.push('t');
    for k in 1..=trace.num_minislots() {
        let _ = write!(agents, ",R{k},P{k}");
    }
    agents.push('\n');
    for (i, r) in trace.records().iter().enumerate() {
        trace_row(&mut main, trace, i)?;
        rbar_row(&mut agents, r);
    }
    write_atomic(path, &main)?;
    write_atomic(rbar, &agents)
}

/// Column positions of `wanted` in a CSV header; fails naming the first
/// missing column.
pub fn column_indices(
    header: &csv::StringRecord,
    wanted: &[&str],
    path: &Path,
) -> Result<Vec<usize>, ExperimentError> {
    wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h == *w)
                .ok_or_else(|| ExperimentError::Format {
                    path: path.to_path_buf(),
                    msg: format!("missing column `{w}`"),
                })
        })
        .collect()
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    path: &Path,
) -> Result<T, ExperimentError> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| ExperimentError::Format {
        path: path.to_path_buf(),
        msg: format!(
            "bad value `{raw}` on row {}",
            rec.position().map_or(0, |p| p.line())
        ),
    })
}

/// Reads a trace and its per-mini-slot estimates back into a [`RunTrace`].
pub fn read_trace(
    path: &Path,
    rbar: &Path,
    num_minislots: usize,
) -> Result<RunTrace, ExperimentError> {
    let mut main = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let cols = column_indices(
        &main.headers().map_err(csv_err(path))?.clone(),
        &[
            "t",
            "R_t",
            "P_t",
            "err_count",
            "minislot_err_bits",
            "timeslot_err",
        ],
        path,
    )?;
    let mut agents = csv::Reader::from_path(rbar).map_err(csv_err(rbar))?;
    let width = agents.headers().map_err(csv_err(rbar))?.len();
    if width != 1 + 2 * num_minislots {
        return Err(ExperimentError::Format {
            path: rbar.to_path_buf(),
            msg: format!("expected {} columns, found {width}", 1 + 2 * num_minislots),
        });
    }
    let mut trace = RunTrace::new(num_minislots)?;
    let mut agent_rows = agents.records();
    for rec in main.records() {
        let rec = rec.map_err(csv_err(path))?;
        let arec = agent_rows
            .next()
            .ok_or_else(|| ExperimentError::Format {
                path: rbar.to_path_buf(),
                msg: "fewer rows than the trace".into(),
            })?
            .map_err(csv_err(rbar))?;
        let t: u64 = field(&rec, cols[0], path)?;
        if t != trace.len() as u64 || field::<u64>(&arec, 0, rbar)? != t {
            return Err(ExperimentError::Format {
                path: path.to_path_buf(),
                msg: format!("timeslot {t} out of sequence"),
            });
        }
        let mut avg = Vec::with_capacity(num_minislots);
        for k in 0..num_minislots {
            avg.push([
                field(&arec, 1 + 2 * k, rbar)?,
                field(&arec, 2 + 2 * k, rbar)?,
            ]);
        }
        trace.push(TimeslotRecord {
            t,
            throughput: field(&rec, cols[1], path)?,
            energy: field(&rec, cols[2], path)?,
            avg_rewards: avg,
            err_count: field(&rec, cols[3], path)?,
            minislot_err_bits: field(&rec, cols[4], path)?,
            timeslot_err: field::<u8>(&rec, cols[5], path)? != 0,
        });
    }
    Ok(trace)
}

fn truncate(trace: &RunTrace, len: usize) -> Result<RunTrace, ExperimentError> {
    let mut out = RunTrace::new(trace.num_minislots())?;
    for r in &trace.records()[..len] {
        out.push(r.clone());
    }
    Ok(out)
}

fn summary_row(s: &SeedSummary) -> Vec<String> {
    vec![
        s.arm.label().to_string(),
        s.seed.to_string(),
        s.timeslots.to_string(),
        s.rbar.to_string(),
        s.pbar.to_string(),
        s.der_minislot.to_string(),
        s.der_timeslot.to_string(),
        s.full_minislot_tx.to_string(),
        u8::from(s.stopped_early).to_string(),
    ]
}

pub fn write_summary(rows: &[SeedSummary], path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(SUMMARY_COLUMNS).map_err(csv_err(path))?;
    for s in rows {
        w.write_record(summary_row(s)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<Vec<SeedSummary>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let cols = column_indices(
        &r.headers().map_err(csv_err(path))?.clone(),
        &SUMMARY_COLUMNS,
        path,
    )?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let arm_raw = rec.get(cols[0]).unwrap_or("");
        let arm = Arm::parse(arm_raw).ok_or_else(|| ExperimentError::Format {
            path: path.to_path_buf(),
            msg: format!("unknown arm `{arm_raw}`"),
        })?;
        out.push(SeedSummary {
            arm,
            seed: field(&rec, cols[1], path)?,
            timeslots: field(&rec, cols[2], path)?,
            rbar: field(&rec, cols[3], path)?,
            pbar: field(&rec, cols[4], path)?,
            der_minislot: field(&rec, cols[5], path)?,
            der_timeslot: field(&rec, cols[6], path)?,
            full_minislot_tx: field(&rec, cols[7], path)?,
            stopped_early: field::<u8>(&rec, cols[8], path)? != 0,
        });
    }
    Ok(out)
}

/// Loads an artifact directory written by [`run_experiment`].
pub fn load_artifact(dir: &Path) -> Result<RunArtifact, ExperimentError> {
    let snap = dir.join("config.toml");
    let text = fs::read_to_string(&snap).map_err(io_err(&snap))?;
    let config = parse_config(&text, dir)?;
    let summaries = read_summary(&dir.join("summary.csv"))?;
    Ok(RunArtifact {
        dir: dir.to_path_buf(),
        config,
        summaries,
    })
}
