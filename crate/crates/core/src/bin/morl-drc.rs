use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use morl_drc::config::{load_config, preset, ScenarioConfig, PRESETS};
use morl_drc::experiment::{run_experiment, run_sweep};
use morl_drc::report::{emit_report, summary_table};

#[derive(Parser)]
#[command(
    name = "morl-drc",
    version,
    about = "Grant-free uplink resource configuration with multi-objective R-learning"
)]
struct Cli {
    /// Parent of default output directories.
    #[arg(long, global = true, env = "MORL_DRC_OUT", default_value = "runs")]
    out_root: PathBuf,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for every seed and write traces and a summary.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also write plots.gp and summary.txt.
        #[arg(long)]
        report: bool,
    },
    /// Run a scenario once per energy weight.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Energy weights to try, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        wp: Vec<f64>,
    },
    /// Write plots.gp and summary.txt for a finished run directory.
    Report { dir: PathBuf },
    /// List the figure presets.
    Presets,
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file.
    config: Option<PathBuf>,
    /// Start from a figure preset (append -baseline for the w_p = 0 variant).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Seeds to run; repeat or comma separate. Overrides the config.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Number of timeslots. Overrides the config.
    #[arg(long)]
    horizon: Option<u64>,
    /// Output directory. Defaults to the config's out_dir, then OUT_ROOT/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from checkpoints already in the output directory.
    #[arg(long)]
    resume: bool,
}

impl ScenarioArgs {
    fn resolve(&self, out_root: &Path) -> Result<(ScenarioConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => {
                load_config(path).with_context(|| format!("loading {}", path.display()))?
            }
            (None, Some(name)) => preset(name)?,
            (None, None) => ScenarioConfig::default(),
            (Some(_), Some(_)) => bail!("give a config file or --preset, not both"),
        };
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(h) = self.horizon {
            if h == 0 {
                bail!("--horizon must be positive");
            }
            cfg.horizon = h;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| out_root.join(&cfg.name));
        Ok((cfg, out))
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Run { scenario, report } => {
            let (cfg, out) = scenario.resolve(&cli.out_root)?;
            let art = run_experiment(&cfg, &out, scenario.resume)
                .with_context(|| format!("running {} into {}", cfg.name, out.display()))?;
            print!("{}", summary_table(&cfg.name, &art.summaries));
            if report {
                let files = emit_report(&out)?;
                eprintln!("wrote {}", files.script.display());
            }
            eprintln!("results in {}", out.display());
        }
        Command::Sweep { scenario, wp } => {
            let (cfg, out) = scenario.resolve(&cli.out_root)?;
            let runs = run_sweep(&cfg, &wp, &out, scenario.resume)
                .with_context(|| format!("sweeping {} into {}", cfg.name, out.display()))?;
            for (w_p, art) in runs {
                print!("{}", summary_table(&format!("w_p = {w_p}"), &art.summaries));
            }
            eprintln!("results in {}", out.join("sweep.csv").display());
        }
        Command::Report { dir } => {
            let files =
                emit_report(&dir).with_context(|| format!("reporting {}", dir.display()))?;
            print!("{}", std::fs::read_to_string(&files.table)?);
            eprintln!("wrote {}", files.script.display());
        }
        Command::Presets => {
            for (name, what) in PRESETS {
                println!("{name:<8} {what}");
            }
        }
    }
    Ok(())
}
