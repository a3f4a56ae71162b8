use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mumimo::airtime::{overhead_table, write_overhead_csv, Codebook};
use mumimo::capacity::{idealized_study, write_capacity_csv, write_idealized_summary_csv};
use mumimo::config::{RunConfig, CONFIG_KEYS};
use mumimo::scenarios::{
    dominance_stats, guideline_table, sweep_distance, sweep_separation, with_workers,
    write_distance_csv, write_separation_csv,
};
use mumimo::{Error, Result};

/// 802.11ax downlink SU/MU-MIMO sounding overhead and capacity simulator.
#[derive(Parser, Debug)]
#[command(version, after_long_help = CONFIG_KEYS)]
struct Cli {
    /// TOML run configuration; see the key list in `--help`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, overriding `workers`; 0 uses one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Codebook information bit, overriding `sounding.codebook_info`.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(0..=1))]
    codebook: Option<u8>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sounding airtime for 1, 2, 4 and 8 stations (overhead.csv).
    Overhead,
    /// Interference-free capacity traces versus user count (capacity.csv,
    /// capacity_summary.csv).
    Capacity,
    /// LoS separation sweep or NLoS distance sweep.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
    },
    /// SU/MU decision table over scenarios and CSI configurations
    /// (guideline.csv, guideline.json).
    Guideline,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepKind {
    Separation,
    Distance,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(cb) = cli.codebook {
        cfg.sounding.codebook = Codebook::try_from(cb).map_err(Error::Config)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    fs::create_dir_all(&cfg.out)?;
    let out = cfg.out.as_path();
    let sim = cfg.simulation();
    match cli.command {
        Command::Overhead => {
            let rows = overhead_table(&cfg.sounding, &cfg.phy)?;
            write_overhead_csv(&rows, create(out, "overhead.csv")?)?;
            for r in &rows {
                println!(
                    "n_sta={} total={:.1} us ratio={:.4}",
                    r.n_sta, r.total_overhead_us, r.overhead_ratio
                );
            }
        }
        Command::Capacity => {
            let codebooks = match cli.codebook {
                Some(_) => vec![cfg.sounding.codebook],
                None => vec![Codebook::Zero, Codebook::One],
            };
            let study = idealized_study(
                &cfg.sounding,
                &cfg.phy,
                &cfg.link,
                &cfg.idealized,
                &codebooks,
                cfg.seed,
            )?;
            write_capacity_csv(&study, create(out, "capacity.csv")?)?;
            write_idealized_summary_csv(&study, create(out, "capacity_summary.csv")?)?;
            for (p, _) in &study {
                println!("{} C_eff={:.3} Mb/s", p.scenario_id, p.effective_capacity_bps / 1e6);
            }
        }
        Command::Sweep { kind: SweepKind::Separation } => {
            let curve = with_workers(cfg.workers, || {
                sweep_separation(&sim, &cfg.separation, cfg.n_cycles, cfg.seed)
            })??;
            let stats = dominance_stats(&curve)?;
            write_separation_csv(&curve, create(out, "separation_sweep.csv")?)?;
            serde_json::to_writer_pretty(create(out, "separation_summary.json")?, &stats)?;
            println!(
                "SU-dominant {}/{} ({:.1}%), min MU/SU {:.3} at {} deg",
                stats.su_dominant,
                stats.n_points,
                stats.su_dominant_percent,
                stats.min_ratio,
                stats.min_ratio_separation_deg
            );
        }
        Command::Sweep { kind: SweepKind::Distance } => {
            let curve = with_workers(cfg.workers, || {
                sweep_distance(&sim, &cfg.distance, cfg.n_cycles, cfg.seed)
            })??;
            write_distance_csv(&curve, create(out, "distance_sweep.csv")?)?;
            for p in &curve {
                println!("{:>5} m  MU-dominant {:.3}", p.distance_m, p.proportion);
            }
        }
        Command::Guideline => {
            let table = with_workers(cfg.workers, || {
                guideline_table(&sim, &cfg.guideline, cfg.n_cycles, cfg.seed)
            })??;
            table.write_csv(create(out, "guideline.csv")?)?;
            table.write_json(create(out, "guideline.json")?)?;
            print!("{}", table.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
