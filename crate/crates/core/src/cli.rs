//! Command-line front end.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    complexity_report, frequency_sweep, load_config, run_monte_carlo, write_results, Algorithm,
    ComplexityRow, Experiment, ExperimentConfig, ResultSet, SweepRow,
};
use crate::scene::{write_atf_file, AtfBundle};

#[derive(Debug, Parser)]
#[command(name = "diffpm", version, about = "Centralized and distributed adaptive pressure matching experiments")]
pub struct Cli {
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "DIFFPM_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo runs at `run_frequency_hz`.
    Run { config: PathBuf },
    /// Steady-state levels over `frequencies`.
    Sweep { config: PathBuf },
    /// Per-iteration operation counts only.
    Complexity { config: Option<PathBuf> },
    /// CPM against every DPM-D system at `run_frequency_hz`.
    Compare { config: PathBuf },
    /// Write the nominal ATFs at `frequencies` to a binary ATF file.
    ExportAtf {
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn config_for(cli: &Cli, path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let jobs = cli.jobs.unwrap_or(1);
    if jobs == 0 {
        return Err(Error::Config("`--jobs` must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Run { config } => {
            let cfg = config_for(cli, Some(config))?;
            let rs = run_monte_carlo(&cfg)?;
            print_summary(&rs.sweep);
            finish(&rs, &cfg)
        }
        Command::Sweep { config } => {
            let cfg = config_for(cli, Some(config))?;
            let rs = frequency_sweep(&cfg)?;
            print_summary(&rs.sweep);
            finish(&rs, &cfg)
        }
        Command::Complexity { config } => {
            let cfg = config_for(cli, config.as_ref())?;
            let rows = complexity_report(&Experiment::new(&cfg)?)?;
            print_complexity(&rows);
            if cli.out.is_some() {
                let mut rs = empty_result(&cfg);
                rs.complexity = rows;
                finish(&rs, &cfg)?;
            }
            Ok(())
        }
        Command::Compare { config } => {
            let mut cfg = config_for(cli, Some(config))?;
            cfg.algorithm = Algorithm::Both;
            let rs = run_monte_carlo(&cfg)?;
            print_comparison(&rs.sweep);
            finish(&rs, &cfg)
        }
        Command::ExportAtf { config, output } => {
            let cfg = config_for(cli, Some(config))?;
            let exp = Experiment::new(&cfg)?;
            let mut bundles = Vec::new();
            for (i, &f) in cfg.frequencies.iter().enumerate() {
                let setup = exp.frequency(f, i)?;
                bundles.push(AtfBundle {
                    control: setup.control,
                    validation: setup.validation,
                });
            }
            write_atf_file(output, &bundles)?;
            println!("wrote {} frequency blocks to {}", bundles.len(), output.display());
            Ok(())
        }
    })
}

fn empty_result(cfg: &ExperimentConfig) -> ResultSet {
    ResultSet {
        learning_curves: Vec::new(),
        sweep: Vec::new(),
        complexity: Vec::new(),
        provenance: crate::harness::Provenance::new(cfg),
    }
}

fn finish(rs: &ResultSet, cfg: &ExperimentConfig) -> Result<()> {
    let paths = write_results(rs, &cfg.output_dir)?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_summary(rows: &[SweepRow]) {
    println!("{:>10}  {:<16} {:>12} {:>12}", "freq_hz", "series", "nmse_ss_db", "ac_ss_db");
    for r in rows {
        match &r.failure {
            None => println!(
                "{:>10.1}  {:<16} {:>12.3} {:>12.3}",
                r.freq_hz,
                r.series.name(),
                r.nmse_ss_db,
                r.ac_ss_db
            ),
            Some(msg) => println!("{:>10.1}  {:<16} failed: {msg}", r.freq_hz, r.series.name()),
        }
    }
}

/// Rounds to two decimals without printing a negative zero.
fn delta2(v: f64) -> String {
    format!("{:+.2}", (v * 100.0).round() / 100.0 + 0.0).replace("+0.00", "0.00")
}

fn print_comparison(rows: &[SweepRow]) {
    let Some(cpm) = rows.iter().find(|r| r.series.algorithm == "cpm") else {
        return;
    };
    println!(
        "{:<16} {:>12} {:>12} {:>14} {:>12}",
        "series", "nmse_ss_db", "ac_ss_db", "delta_nmse_db", "delta_ac_db"
    );
    for r in rows {
        println!(
            "{:<16} {:>12.3} {:>12.3} {:>14} {:>12}",
            r.series.name(),
            r.nmse_ss_db,
            r.ac_ss_db,
            delta2(r.nmse_ss_db - cpm.nmse_ss_db),
            delta2(r.ac_ss_db - cpm.ac_ss_db)
        );
    }
}

fn print_complexity(rows: &[ComplexityRow]) {
    println!(
        "{:<16} {:>5} {:>16} {:>16} {:>10} {:>10}",
        "series", "node", "additions", "multiplications", "proc_add", "proc_mul"
    );
    for r in rows {
        println!(
            "{:<16} {:>5} {:>16.6e} {:>16.6e} {:>10} {:>10}",
            r.series.name(),
            r.node.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            r.profile.additions,
            r.profile.multiplications,
            r.profile.processing_additions,
            r.profile.processing_multiplications
        );
    }
}
