// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uniedit::bench::{
    ablate_alpha, ablate_window, ablation_inputs, default_suite, run_bench, BenchSuite, WindowMode,
};
use uniedit::config::RunConfig;
use uniedit::dse::ScheduleKind;
use uniedit::instruction_parser::TaskType;
use uniedit::run_dir::{write_atomic, write_json, write_plan, write_run_dir};
use uniedit::scene_graph::SceneGraph;
use uniedit::semantic_space::{default_axes, ConceptVocabulary, DEFAULT_DIMENSION};
use uniedit::uev::{initial_plan, run_uev_from, LoopConfig};
use uniedit::velocity_model::ExactGaussianVelocity;
use uniedit::{Error, Result};

macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "uniedit",
    version,
    about = "Understand / edit / verify semantic editing"
)]
struct Cli {
    /// Key-value config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Vocabulary file produced by `gen-world`.
    #[arg(long, global = true)]
    world: Option<PathBuf>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    schedule: Option<ScheduleKind>,
    #[arg(long, global = true)]
    scale_src: Option<f64>,
    #[arg(long, global = true)]
    scale_tar: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    patience_window: Option<usize>,
    #[arg(long, global = true)]
    min_improvement: Option<f64>,
    #[arg(long, global = true)]
    max_rounds: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a vocabulary file.
    GenWorld {
        #[arg(long, default_value_t = DEFAULT_DIMENSION)]
        dimension: usize,
        /// JSON object mapping axis-group names to token lists.
        #[arg(long)]
        axes: Option<PathBuf>,
    },
    /// Run the full loop on one scene and write a run directory.
    Edit {
        #[command(flatten)]
        case: CaseArgs,
        /// Write plan.json before integration starts.
        #[arg(long)]
        emit_plan: bool,
    },
    /// Compare the uniform and decayed gain schedules.
    AblateAlpha {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Sweep the patience window.
    AblateWindow {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        windows: Vec<usize>,
        #[arg(long, default_value = "replay")]
        mode: WindowMode,
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Run a benchmark suite (the built-in suite when none is given).
    Bench {
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Args)]
struct CaseArgs {
    /// Scene graph JSON file.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    instruction: String,
    #[arg(long)]
    task: TaskType,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(p) = &cli.config {
        c.apply_file(p)?;
    }
    c.apply_env(std::env::vars())?;
    macro_rules! flag {
        ($($f:ident),*) => { $(if let Some(v) = cli.$f.clone() { c.$f = v; })* };
    }
    flag!(
        seed,
        out,
        steps,
        schedule,
        scale_src,
        scale_tar,
        sigma,
        patience_window,
        min_improvement,
        max_rounds
    );
    if cli.world.is_some() {
        c.world = cli.world.clone();
    }
    Ok(c)
}

fn load_case(case: &CaseArgs) -> Result<SceneGraph> {
    SceneGraph::load(&case.scene)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let rc = resolve_config(&cli)?;
    let model = ExactGaussianVelocity::default();
    match &cli.command {
        Command::GenWorld { dimension, axes } => {
            let axes = match axes {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str::<BTreeMap<String, Vec<String>>>(&text)
                        .map_err(|e| Error::json(p.display().to_string(), e))?
                }
                None => default_axes(),
            };
            let v = ConceptVocabulary::generate(*dimension, rc.seed, axes)?;
            let path = world_path(&rc.out);
            write_atomic(&path, v.to_json().as_bytes())?;
            say!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Edit { case, emit_plan } => {
            let vocab = rc.vocabulary()?;
            let cfg = rc.loop_config()?;
            let scene = load_case(case)?;
            let (plan, z0) = initial_plan(&vocab, &scene, &case.instruction, case.task, &cfg)?;
            if *emit_plan {
                write_plan(&rc.out, &plan)?;
            }
            let result = run_uev_from(&model, &vocab, plan, z0, &cfg, rc.seed)?;
            write_run_dir(&rc.out, &result)?;
            say!(
                "{} rounds={} score={:.4} out={}",
                if result.converged {
                    "converged"
                } else {
                    "not_converged"
                },
                result.rounds_used,
                result.final_score,
                rc.out.display()
            );
            Ok(if result.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::AblateAlpha { case, runs } => {
            let vocab = rc.vocabulary()?;
            let cfg = rc.loop_config()?;
            let scene = load_case(case)?;
            let (plan, z0) = ablation_inputs(&vocab, &scene, &case.instruction, case.task, &cfg)?;
            let a = ablate_alpha(&model, &vocab, &plan, &z0, &cfg.dse, rc.seed, *runs)?;
            write_atomic(&rc.out.join("alpha_curves.csv"), a.curves_csv().as_bytes())?;
            write_atomic(
                &rc.out.join("alpha_summary.csv"),
                a.summary_csv().as_bytes(),
            )?;
            write_json(&rc.out.join("alpha_report.json"), &a)?;
            say!(
                "decayed>=uniform cos-to-source in {}/{} runs; max final score gap {:.4}",
                a.decayed_wins,
                a.runs,
                a.max_final_score_gap
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::AblateWindow {
            case,
            windows,
            mode,
            runs,
        } => {
            let vocab = rc.vocabulary()?;
            let cfg = rc.loop_config()?;
            let scene = load_case(case)?;
            let (plan, z0) = ablation_inputs(&vocab, &scene, &case.instruction, case.task, &cfg)?;
            let a = ablate_window(
                &model, &vocab, &plan, &z0, &cfg, windows, *mode, rc.seed, *runs,
            )?;
            write_atomic(&rc.out.join("window.csv"), a.to_csv().as_bytes())?;
            write_atomic(&rc.out.join("peak_steps.csv"), a.peaks_csv().as_bytes())?;
            write_json(&rc.out.join("window_report.json"), &a)?;
            for (w, b) in a.mean_best() {
                say!("window={w} mean_best_score={b:.4}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { suite, threads } => {
            let vocab = rc.vocabulary()?;
            let cfg: LoopConfig = rc.loop_config()?;
            let suite = match suite {
                Some(p) => BenchSuite::load(p)?,
                None => default_suite(),
            };
            let report = run_bench(&model, &vocab, &suite, &cfg, rc.seed, *threads)?;
            write_atomic(
                &rc.out.join("bench_report.json"),
                report.to_json().as_bytes(),
            )?;
            write_atomic(&rc.out.join("bench_report.csv"), report.to_csv().as_bytes())?;
            say!("{}", report.to_csv().trim_end());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn world_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.to_path_buf()
    } else {
        out.join("world.json")
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}
