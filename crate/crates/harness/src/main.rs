use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airgrasp_core::mission::Episode;
use airgrasp_core::scene::SceneFile;
use airgrasp_harness::plot::{outcome_chart, score_histogram, trajectory_view};
use airgrasp_harness::suite::{read_results, run_one, run_suite, RunOptions};
use airgrasp_harness::{build_scenario, Config, HarnessError, Result, ScenarioName};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "airgrasp", version, about = "Aerial grasping simulator and benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured suite and write results, summary and traces.
    Run {
        config: PathBuf,
        /// Seed of the first episode in every cell.
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict to one scenario, e.g. tabletop_dense.
        #[arg(long)]
        scenario: Option<ScenarioName>,
        /// Restrict to one ablation, e.g. full or no_obstacle_awareness.
        #[arg(long)]
        ablation: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Skip per-episode trace files.
        #[arg(long)]
        no_traces: bool,
    },
    /// Summarize a trace; with --config, re-run the episode and compare.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render SVG figures from a results table.
    Plot {
        results: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check a scene file (.json) or suite config (.toml).
    Validate { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            config,
            seed,
            scenario,
            ablation,
            out_dir,
            no_traces,
        } => run(&config, seed, scenario, ablation, out_dir, !no_traces),
        Command::Replay { trace, config } => replay(&trace, config.as_deref()),
        Command::Plot { results, out_dir } => plot(&results, out_dir),
        Command::Validate { path } => validate(&path),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(
    config: &Path,
    seed: Option<u64>,
    scenario: Option<ScenarioName>,
    ablation: Option<String>,
    out_dir: Option<PathBuf>,
    traces: bool,
) -> Result<u8> {
    let cfg = Config::load(config)?;
    let opts = RunOptions {
        out_dir,
        base_seed: seed,
        scenario,
        ablation,
        write_traces: traces,
    };
    let out = run_suite(&cfg, &opts)?;
    for c in &out.cells {
        println!("[{}]\n{}\n", c.cell, c.metrics);
    }
    println!("wrote {}", out.out_dir.join("results.csv").display());
    if out.errors.is_empty() {
        Ok(0)
    } else {
        for (cell, seed, e) in &out.errors {
            eprintln!("{cell} seed {seed}: {e}");
        }
        Ok(1)
    }
}

fn load_trace(path: &Path) -> Result<Episode> {
    Ok(Episode::read_trace(BufReader::new(File::open(path)?))?)
}

fn replay(trace: &Path, config: Option<&Path>) -> Result<u8> {
    let ep = load_trace(trace)?;
    if let Some(m) = &ep.meta {
        println!(
            "{} / {} seed {} (config {})\n\"{}\"",
            m.scenario, m.ablation, m.scenario_seed, m.config_hash, m.instruction
        );
    }
    println!("{:>6} {:<14} {:>4} {:>4} {:>5} {:>8} {:<10}", "tick", "mode", "ctx", "obj", "cand", "S_best", "decision");
    for r in ep.trace.iter().filter(|r| r.decision.is_some() || r.tick % 50 == 0) {
        println!(
            "{:>6} {:<14} {:>4} {:>4} {:>5} {:>8} {:<10}",
            r.tick,
            r.mode.as_str(),
            r.masks_found[0],
            r.masks_found[1],
            r.n_candidates,
            r.s_best.map(|s| format!("{s:.3}")).unwrap_or_default(),
            r.decision.map(|d| format!("{d:?}").to_lowercase()).unwrap_or_default()
        );
    }
    let r = &ep.result;
    println!(
        "outcome {} after {} ticks, {} evaluations, grasp error {}",
        r.outcome.as_str(),
        r.ticks,
        r.evaluations,
        r.grasp_error()
            .map(|e| format!("{:.2} cm", 100.0 * e))
            .unwrap_or_else(|| "n/a".into())
    );
    let Some(cfg_path) = config else { return Ok(0) };
    let meta = ep
        .meta
        .as_ref()
        .ok_or_else(|| HarnessError::Config("trace has no episode header".into()))?;
    let cfg = Config::load(cfg_path)?;
    if cfg.hash() != meta.config_hash {
        eprintln!("warning: config hash {} differs from the trace's {}", cfg.hash(), meta.config_hash);
    }
    let scenario: ScenarioName = meta.scenario.parse()?;
    let again = run_one(&cfg, scenario, &meta.ablation, meta.scenario_seed)?;
    let strip = |mut r: airgrasp_core::mission::EpisodeResult| {
        r.cycle_ms.clear();
        r
    };
    if strip(again.result) == strip(ep.result.clone()) {
        println!("replay matches");
        Ok(0)
    } else {
        println!("replay differs");
        Ok(1)
    }
}

fn plot(results: &Path, out_dir: Option<PathBuf>) -> Result<u8> {
    let rows = read_results(results)?;
    let base = results.parent().unwrap_or(Path::new("."));
    let dir = out_dir.unwrap_or_else(|| base.join("plots"));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("outcomes.svg"), outcome_chart(&rows))?;
    std::fs::write(dir.join("scores.svg"), score_histogram(&rows, 20))?;
    let cfg = Config::load(base.join("config.toml")).ok();
    let mut written = 2;
    let mut seen = std::collections::BTreeSet::new();
    for r in &rows {
        if !seen.insert(r.cell.clone()) {
            continue;
        }
        let path = base
            .join("traces")
            .join(&r.scenario)
            .join(&r.ablation)
            .join(format!("seed_{}.jsonl", r.scenario_seed));
        let Ok(ep) = load_trace(&path) else { continue };
        let scene = match (&cfg, r.scenario.parse::<ScenarioName>()) {
            (Some(c), Ok(s)) => build_scenario(&s.spec(r.scenario_seed), c.suite.camera_resolution)
                .ok()
                .map(|s| s.scene),
            _ => None,
        };
        let name = format!("path_{}_{}_seed{}.svg", r.scenario, r.ablation, r.scenario_seed).replace('+', "-");
        std::fs::write(dir.join(name), trajectory_view(&ep, scene.as_ref()))?;
        written += 1;
    }
    println!("wrote {written} figures to {}", dir.display());
    Ok(0)
}

fn validate(path: &Path) -> Result<u8> {
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        let cfg = Config::load(path)?;
        println!("config ok (hash {})", cfg.hash());
    } else {
        let file = SceneFile::load(path).map_err(|e| HarnessError::Config(e.to_string()))?;
        let scene = file.to_scene().map_err(|e| HarnessError::Config(e.to_string()))?;
        println!(
            "scene ok: {} objects, target \"{}\"",
            scene.objects.len(),
            scene.target().label
        );
    }
    Ok(0)
}
