use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ogm_cbf::harness::{run_batch, run_episode_observed, Stage, StageTimer};
use ogm_cbf::scenario::corridor_scenario;
use ogm_cbf::{export_fields, Episode, NavError, Scenario};

#[derive(Parser)]
#[command(name = "ogm-cbf", version, about = "Occupancy-grid barrier-function navigation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its metrics.
    Run {
        scenario: PathBuf,
        /// Per-step trajectory CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write map and field files for one step into this directory.
        #[arg(long, requires = "at_step")]
        export_fields: Option<PathBuf>,
        #[arg(long)]
        at_step: Option<usize>,
    },
    /// Run every scenario in a directory or matching a glob.
    Batch {
        source: String,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Check a scenario file and list every violated invariant.
    Validate { scenario: PathBuf },
    /// Time each pipeline stage.
    Bench {
        scenario: PathBuf,
        #[arg(long, default_value_t = 500)]
        steps: usize,
    },
    /// Write seeded corridor scenarios.
    Generate {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario, log, export_fields: export_dir, at_step } => {
            let s = Scenario::load(&scenario)?;
            let (traj, m) = run_episode_observed(&s, &mut ())?;
            if let Some(path) = log {
                traj.save_csv(&path)?;
            }
            if let (Some(dir), Some(k)) = (export_dir, at_step) {
                for p in export_fields(&s, k, &dir)? {
                    println!("wrote {}", p.display());
                }
            }
            println!("termination        {}", m.termination);
            println!("steps              {}", m.steps);
            println!("collision          {}", m.collision);
            println!("min_phi_over_path  {:.4} m", m.min_phi_over_path);
            println!("min_h              {:.4}", m.min_h);
            println!("final_h            {:.4}", m.final_h);
            println!("path_length        {:.3} m", m.path_length);
            println!("heading_error      {:.4} rad", m.heading_error);
            println!("mean_step_time     {:.3} ms", 1e3 * m.mean_step_time);
            println!("max_step_time      {:.3} ms", 1e3 * m.max_step_time);
            println!("map_update_rate    {:.1} Hz", m.map_update_hz);
            Ok(if m.collision { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Batch { source, jobs, summary } => {
            let files = collect_scenarios(&source)?;
            let items = files
                .iter()
                .map(|p| (p.display().to_string(), Scenario::load(p)))
                .collect();
            let result = run_batch(items, jobs);
            let mut out = Vec::new();
            result.write_csv(&mut out)?;
            print!("{}", String::from_utf8_lossy(&out));
            if let Some(path) = summary {
                std::fs::write(&path, &out).with_context(|| path.display().to_string())?;
            }
            eprintln!("{} episodes, {} collisions, {} errors", result.rows.len(), result.collisions(), result.errors());
            Ok(ExitCode::from(result.exit_code() as u8))
        }
        Command::Validate { scenario } => match Scenario::load(&scenario) {
            Ok(_) => {
                println!("{}: ok", scenario.display());
                Ok(ExitCode::SUCCESS)
            }
            Err(NavError::Validation(errs)) => {
                for e in errs {
                    println!("{}: {e}", scenario.display());
                }
                Ok(ExitCode::from(1))
            }
            Err(e) => Err(e.into()),
        },
        Command::Bench { scenario, steps } => {
            let mut s = Scenario::load(&scenario)?;
            s.duration = s.dt * steps as f64;
            let mut timer = StageTimer::default();
            let mut episode = Episode::new(&s)?;
            episode.run(&mut timer)?;
            let ran = episode.rows().len();
            println!("steps {ran} ({})", episode.termination().map(|t| t.to_string()).unwrap_or_default());
            println!("{:<12} {:>10} {:>8}", "stage", "mean ms", "calls");
            for stage in Stage::ALL {
                println!("{:<12} {:>10.3} {:>8}", stage.name(), 1e3 * timer.mean(stage).as_secs_f64(), timer.count[stage as usize]);
            }
            let total = timer.pipeline_total().as_secs_f64();
            if ran > 0 && total > 0.0 {
                println!("pipeline     {:>10.3} ms/step  {:.1} Hz", 1e3 * total / ran as f64, ran as f64 / total);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { out_dir, count, first_seed } => {
            std::fs::create_dir_all(&out_dir).with_context(|| out_dir.display().to_string())?;
            for seed in first_seed..first_seed + count {
                let s = corridor_scenario(seed);
                let path = out_dir.join(format!("{}.json", s.name));
                std::fs::write(&path, s.to_json()).with_context(|| path.display().to_string())?;
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// JSON files in a directory, or the matches of a glob pattern, sorted.
fn collect_scenarios(source: &str) -> Result<Vec<PathBuf>> {
    let dir = Path::new(source);
    let mut files: Vec<PathBuf> = if dir.is_dir() {
        std::fs::read_dir(dir)
            .with_context(|| source.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect()
    } else {
        let paths = glob::glob(source).with_context(|| format!("bad pattern {source}"))?;
        paths.filter_map(Result::ok).collect()
    };
    if files.is_empty() && !dir.is_dir() && !source.contains(['*', '?', '[']) {
        bail!("{source}: no such file or directory");
    }
    files.sort();
    Ok(files)
}
