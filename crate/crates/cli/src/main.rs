use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dyntopo::driver::{
    compare_modes, comparison_csv, export_outputs, ladder_csv, preset, run, summary_text, RunConfig, PRESETS,
};

/// Dynamic topology optimization with reanalysis and POD-based equivalent
/// static loads.
#[derive(Parser)]
#[command(name = "dyntopo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimization. Exit code 0 when converged, 2 when the
    /// iteration cap was reached first.
    Run {
        #[command(flatten)]
        source: Source,
        /// Directory for CSV logs, density grids and the summary.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Replay the designs of a full run through both dynamic solvers and
    /// report their agreement, factorization counts and timings.
    Compare {
        #[command(flatten)]
        source: Source,
        /// Mesh ladder for timing, e.g. `20x10,40x20` or `default`.
        #[arg(long)]
        ladder: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Show a preset configuration.
    Preset {
        /// One of cantilever_hole, bridge, box3d.
        name: Option<String>,
        /// Print the full configuration as TOML.
        #[arg(long)]
        print_config: bool,
        /// List preset names.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args)]
struct Source {
    /// TOML configuration file, or the name of a preset.
    config: String,
    /// Override a configuration key, e.g. `--set osdca.tol_rb=0.02`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set run.solver=...` (full_newmark or osdca).
    #[arg(long)]
    solver: Option<String>,
    /// Shorthand for `--set run.esl=...` (exact, pod or peak_static).
    #[arg(long)]
    esl: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol_dy: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn load(&self) -> Result<RunConfig> {
        let path = Path::new(&self.config);
        let base = if path.exists() {
            RunConfig::load(path)?
        } else if PRESETS.contains(&self.config.as_str()) || matches!(self.config.as_str(), "cantilever" | "box") {
            preset(&self.config)?
        } else {
            bail!(
                "'{}' is neither a config file nor a preset ({})",
                self.config,
                PRESETS.join(", ")
            );
        };
        let mut keys = self.overrides.clone();
        if let Some(s) = &self.solver {
            keys.push(format!("run.solver=\"{s}\""));
        }
        if let Some(e) = &self.esl {
            keys.push(format!("run.esl=\"{e}\""));
        }
        if let Some(n) = self.max_iter {
            keys.push(format!("run.max_iter={n}"));
        }
        if let Some(t) = self.tol_dy {
            keys.push(format!("run.tol_dy={t:e}"));
        }
        if let Some(s) = self.seed {
            keys.push(format!("run.seed={s}"));
        }
        Ok(base.with_overrides(&keys)?)
    }
}

const DEFAULT_LADDER: [(usize, usize); 5] = [(20, 10), (40, 20), (60, 30), (80, 40), (100, 50)];

fn parse_ladder(text: &str) -> Result<Vec<(usize, usize)>> {
    if text == "default" {
        return Ok(DEFAULT_LADDER.to_vec());
    }
    text.split(',')
        .map(|rung| {
            let (x, y) = rung
                .trim()
                .split_once('x')
                .with_context(|| format!("ladder rung '{rung}' is not NXxNY"))?;
            Ok((x.parse()?, y.parse()?))
        })
        .collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(source: &Source, output: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = source.load()?;
    if output.is_some() {
        cfg.run.output_dir = output;
    }
    let report = run(&cfg)?;
    print!("{}", summary_text(&report));
    if let Some(dir) = &cfg.run.output_dir {
        let files = export_outputs(&report, dir)?;
        write(&dir.join("config.toml"), &cfg.to_toml()?)?;
        println!("wrote {} files to {}", files.len() + 1, dir.display());
    }
    Ok(if report.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_compare(source: &Source, ladder: Option<&str>, output: Option<PathBuf>) -> Result<ExitCode> {
    let cfg = source.load()?;
    let ladder = ladder.map(parse_ladder).transpose()?.unwrap_or_default();
    let report = compare_modes(&cfg, &ladder)?;
    println!(
        "{:>4} {:>12} {:>12} {:>7} {:>9} {:>9}",
        "k", "nodal_err", "column_err", "refresh", "t_full", "t_osdca"
    );
    for r in &report.records {
        println!(
            "{:>4} {:>12.3e} {:>12.3e} {:>7} {:>9.4} {:>9.4}",
            r.k, r.max_nodal_error, r.max_column_error, r.refresh, r.full_time_s, r.reduced_time_s
        );
    }
    println!(
        "factorizations: full {} (one per design), osdca {} (baseline builds and refreshes)",
        report.full_factorizations, report.reduced_factorizations
    );
    if !report.ladder.is_empty() {
        println!(
            "{:>9} {:>7} {:>9} {:>9} {:>8}",
            "mesh", "dofs", "t_full", "t_osdca", "speedup"
        );
        for r in &report.ladder {
            println!(
                "{:>9} {:>7} {:>9.4} {:>9.4} {:>8.2}",
                format!("{}x{}", r.nelx, r.nely),
                r.dofs,
                r.full_time_s,
                r.reduced_time_s,
                r.speedup()
            );
        }
        let (up, steps) = report.speedup_trend();
        println!("speedup non-decreasing on {up} of {steps} steps");
    }
    let dir = output.or(cfg.run.output_dir.clone());
    if let Some(dir) = dir {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("compare.csv"), &comparison_csv(&report))?;
        write(&dir.join("ladder.csv"), &ladder_csv(&report))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_preset(name: Option<&str>, print_config: bool, list: bool) -> Result<ExitCode> {
    if list || name.is_none() {
        for p in PRESETS {
            println!("{p}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let cfg = preset(name.unwrap_or_default())?;
    if print_config {
        print!("{}", cfg.to_toml()?);
    } else {
        println!("{}: use --print-config to show the configuration", cfg.case.name());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { source, output } => cmd_run(&source, output),
        Command::Compare { source, ladder, output } => cmd_compare(&source, ladder.as_deref(), output),
        Command::Preset {
            name,
            print_config,
            list,
        } => cmd_preset(name.as_deref(), print_config, list),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
