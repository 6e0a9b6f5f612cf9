// SPDX-License-Identifier: Apache-2.0

//! Synthetic benchmark suite and the two ablation drivers.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dse::{run_dse, DseConfig, NoObserver, ScheduleKind, Trajectory};
use crate::error::{Error, Result};
use crate::instruction_parser::{build_edit_plan, EditPlan, TaskType};
use crate::linalg;
use crate::run_dir::csv_table;
use crate::scene_graph::{Edge, ObjectNode, SceneGraph};
use crate::semantic_space::ConceptVocabulary;
use crate::uev::{initial_plan, run_uev, run_uev_from, LoopConfig};
use crate::velocity_model::VelocityModel;
use crate::verifier::{replay_stop, VerifierConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub task: TaskType,
    pub scene: SceneGraph,
    pub instruction: String,
    #[serde(default)]
    pub expect_unsupported: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchSuite {
    pub cases: Vec<BenchCase>,
}

impl BenchSuite {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite serializes");
        s.push('\n');
        s
    }

    pub fn category_counts(&self) -> BTreeMap<TaskType, usize> {
        let mut m = BTreeMap::new();
        for c in &self.cases {
            *m.entry(c.task).or_default() += 1;
        }
        m
    }

    /// Every case must parse; cases marked `expect_unsupported` must be rejected as such.
    pub fn validate(&self, vocab: &ConceptVocabulary) -> Result<()> {
        for (i, c) in self.cases.iter().enumerate() {
            let r = build_edit_plan(vocab, &c.scene, &c.instruction, c.task);
            match (c.expect_unsupported, r) {
                (false, Ok(_)) | (true, Err(Error::UnsupportedTask(_))) => {}
                (false, Err(e)) => {
                    return Err(Error::InvalidConfig(format!("suite case {i}: {e}")));
                }
                (true, _) => {
                    return Err(Error::InvalidConfig(format!(
                        "suite case {i} is marked unsupported but was not rejected"
                    )))
                }
            }
        }
        Ok(())
    }
}

const OBJECTS: [&str; 6] = ["dog", "cat", "hat", "ball", "bird", "car"];
const BACKGROUNDS: [&str; 4] = ["grass", "beach", "street", "forest"];
const COLORS: [&str; 4] = ["red", "blue", "brown", "white"];
const MATERIALS: [&str; 4] = ["wood", "metal", "glass", "fabric"];
const POSES: [&str; 3] = ["standing", "sitting", "running"];
const STYLES: [&str; 3] = ["photo", "sketch", "painting"];
const TONES: [&str; 3] = ["neutral", "warm", "cool"];

fn scene(subject: ObjectNode, background: Option<&str>) -> SceneGraph {
    match background {
        Some(b) => SceneGraph::new(
            vec![subject, ObjectNode::new(1, b)],
            vec![Edge(0, "on".into(), 1)],
        ),
        None => SceneGraph::new(vec![subject], vec![]),
    }
    .expect("fixture scene is valid")
}

/// Ten categories (every task except `text_change`), five cases each.
pub fn default_suite() -> BenchSuite {
    let mut cases = Vec::new();
    let mut push = |task, scene, instruction: String| {
        cases.push(BenchCase {
            task,
            scene,
            instruction,
            expect_unsupported: false,
        })
    };
    for i in 0..5 {
        let obj = OBJECTS[i % 6];
        let other = OBJECTS[(i + 1) % 6];
        let bg = BACKGROUNDS[i % 4];
        let with_bg = if i % 2 == 0 { Some(bg) } else { None };

        push(
            TaskType::SubjectReplace,
            scene(ObjectNode::new(0, obj), with_bg),
            format!("replace the {obj} with a {other}"),
        );
        push(
            TaskType::ColorAlter,
            scene(
                ObjectNode::new(0, obj).with("color", COLORS[i % 4]),
                with_bg,
            ),
            format!("make the {obj} {}", COLORS[(i + 1) % 4]),
        );
        push(
            TaskType::MaterialAlter,
            scene(
                ObjectNode::new(0, obj).with("material", MATERIALS[i % 4]),
                with_bg,
            ),
            format!("make the {obj} {}", MATERIALS[(i + 2) % 4]),
        );
        push(
            TaskType::MotionChange,
            scene(ObjectNode::new(0, obj).with("pose", POSES[i % 3]), with_bg),
            format!("change the pose of {obj} to {}", POSES[(i + 1) % 3]),
        );
        push(
            TaskType::StyleChange,
            scene(
                ObjectNode::new(0, obj).with("style", STYLES[i % 3]),
                with_bg,
            ),
            format!("change the style to {}", STYLES[(i + 1) % 3]),
        );
        push(
            TaskType::ToneTransfer,
            scene(ObjectNode::new(0, obj).with("tone", TONES[i % 3]), with_bg),
            format!("change the tone to {}", TONES[(i + 2) % 3]),
        );
        push(
            TaskType::BackgroundChange,
            scene(ObjectNode::new(0, obj), Some(bg)),
            format!("change background to {}", BACKGROUNDS[(i + 1) % 4]),
        );
        let (person, rank) = if i % 2 == 0 {
            ("man", "royal")
        } else {
            ("woman", "common")
        };
        let human = scene(ObjectNode::new(0, person).with("rank", rank), with_bg);
        let q = match i % 3 {
            0 => format!(
                "make it a {}",
                if person == "man" { "woman" } else { "man" }
            ),
            1 => format!(
                "make the {person} {}",
                if rank == "royal" { "common" } else { "royal" }
            ),
            _ => format!(
                "change the rank of {person} to {}",
                if rank == "royal" { "common" } else { "royal" }
            ),
        };
        push(TaskType::PsHuman, human, q);
        push(
            TaskType::SubjectAdd,
            scene(ObjectNode::new(0, obj), Some(bg)),
            format!("add a {other} beside the {obj}"),
        );
        let two = SceneGraph::new(
            vec![
                ObjectNode::new(0, obj),
                ObjectNode::new(1, other),
                ObjectNode::new(2, bg),
            ],
            vec![Edge(0, "on".into(), 2), Edge(1, "beside".into(), 0)],
        )
        .expect("fixture scene is valid");
        push(TaskType::SubjectRemove, two, format!("remove the {other}"));
    }
    cases.sort_by_key(|c| c.task);
    BenchSuite { cases }
}

/// Values quoted from published full-scale experiments. They are never asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub note: String,
    pub reference_values: Vec<ReferenceValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub label: String,
    pub value: f64,
    pub reproduced: bool,
}

fn provenance(values: &[(&str, f64)]) -> Provenance {
    Provenance {
        note: "Reference values come from a full-scale model judged by an external \
               vision-language model. They are not reproduced here; only the measured \
               desk-scale values in this report are checked."
            .into(),
        reference_values: values
            .iter()
            .map(|(l, v)| ReferenceValue {
                label: l.to_string(),
                value: *v,
                reproduced: false,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub index: usize,
    pub task: TaskType,
    pub instruction: String,
    pub seed: u64,
    pub converged: bool,
    pub rounds_used: usize,
    pub final_score: Option<f64>,
    pub unsupported: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub task: String,
    pub cases: usize,
    pub errors: usize,
    pub unsupported: usize,
    pub converged: usize,
    pub convergence_rate: Option<f64>,
    pub mean_final_score: Option<f64>,
    pub mean_rounds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub config: LoopConfig,
    pub provenance: Provenance,
    pub categories: Vec<CategoryRow>,
    pub average: CategoryRow,
    pub overall_convergence_rate: Option<f64>,
    pub cases: Vec<CaseOutcome>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        csv_table(
            &[
                "task",
                "cases",
                "errors",
                "unsupported",
                "converged",
                "convergence_rate",
                "mean_final_score",
                "mean_rounds",
            ],
            self.categories
                .iter()
                .chain(std::iter::once(&self.average))
                .map(|r| {
                    (
                        &r.task,
                        r.cases,
                        r.errors,
                        r.unsupported,
                        r.converged,
                        r.convergence_rate,
                        r.mean_final_score,
                        r.mean_rounds,
                    )
                }),
        )
    }
}

fn run_case(
    model: &dyn VelocityModel,
    vocab: &ConceptVocabulary,
    case: &BenchCase,
    index: usize,
    cfg: &LoopConfig,
    seed: u64,
) -> CaseOutcome {
    let seed = seed.wrapping_add(index as u64);
    let mut out = CaseOutcome {
        index,
        task: case.task,
        instruction: case.instruction.clone(),
        seed,
        converged: false,
        rounds_used: 0,
        final_score: None,
        unsupported: false,
        error: None,
    };
    match run_uev(
        model,
        vocab,
        &case.scene,
        &case.instruction,
        case.task,
        cfg,
        seed,
    ) {
        Ok(r) => {
            out.converged = r.converged;
            out.rounds_used = r.rounds_used;
            out.final_score = Some(r.final_score);
        }
        Err(Error::UnsupportedTask(t)) if case.expect_unsupported => {
            out.unsupported = true;
            out.error = Some(Error::UnsupportedTask(t).to_string());
        }
        Err(e) => out.error = Some(format!("{}: {e}", e.kind())),
    }
    out
}

fn category_row(task: String, outcomes: &[&CaseOutcome]) -> CategoryRow {
    let eligible: Vec<&&CaseOutcome> = outcomes.iter().filter(|o| !o.unsupported).collect();
    let ok: Vec<&&CaseOutcome> = eligible
        .iter()
        .copied()
        .filter(|o| o.error.is_none())
        .collect();
    let converged = eligible.iter().filter(|o| o.converged).count();
    CategoryRow {
        task,
        cases: outcomes.len(),
        errors: eligible.len() - ok.len(),
        unsupported: outcomes.len() - eligible.len(),
        converged,
        convergence_rate: (!eligible.is_empty()).then(|| converged as f64 / eligible.len() as f64),
        mean_final_score: mean(ok.iter().filter_map(|o| o.final_score)),
        mean_rounds: mean(ok.iter().map(|o| o.rounds_used as f64)),
    }
}

/// Runs every case on a pool of `threads` workers (0 = rayon default). Case `i` uses
/// seed `seed + i`, so the report does not depend on scheduling.
pub fn run_bench(
    model: &dyn VelocityModel,
    vocab: &ConceptVocabulary,
    suite: &BenchSuite,
    cfg: &LoopConfig,
    seed: u64,
    threads: usize,
) -> Result<BenchReport> {
    cfg.validate()?;
    suite.validate(vocab)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let cases: Vec<CaseOutcome> = pool.install(|| {
        suite
            .cases
            .par_iter()
            .enumerate()
            .map(|(i, c)| run_case(model, vocab, c, i, cfg, seed))
            .collect()
    });

    let mut by_task: BTreeMap<TaskType, Vec<&CaseOutcome>> = BTreeMap::new();
    for c in &cases {
        by_task.entry(c.task).or_default().push(c);
    }
    let categories: Vec<CategoryRow> = by_task
        .iter()
        .map(|(t, os)| category_row(t.to_string(), os))
        .collect();
    let average = CategoryRow {
        task: "average".into(),
        cases: categories.iter().map(|r| r.cases).sum(),
        errors: categories.iter().map(|r| r.errors).sum(),
        unsupported: categories.iter().map(|r| r.unsupported).sum(),
        converged: categories.iter().map(|r| r.converged).sum(),
        convergence_rate: mean(categories.iter().filter_map(|r| r.convergence_rate)),
        mean_final_score: mean(categories.iter().filter_map(|r| r.mean_final_score)),
        mean_rounds: mean(categories.iter().filter_map(|r| r.mean_rounds)),
    };
    let all: Vec<&CaseOutcome> = cases.iter().collect();
    let overall_convergence_rate = category_row(String::new(), &all).convergence_rate;
    Ok(BenchReport {
        seed,
        config: cfg.clone(),
        provenance: provenance(&[
            ("semantic consistency G_SC (external judge)", 6.91),
            ("perceptual quality G_PQ (external judge)", 6.80),
            ("overall G_O (external judge)", 6.64),
        ]),
        categories,
        average,
        overall_convergence_rate,
        cases,
    })
}

/// Index of the first maximum score.
pub fn peak_step(t: &Trajectory) -> usize {
    let mut best = 0;
    for (i, s) in t.steps.iter().enumerate() {
        if s.score > t.steps[best].score {
            best = i;
        }
    }
    t.steps[best].k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummaryRow {
    pub schedule: ScheduleKind,
    pub seed: u64,
    pub final_score: f64,
    pub final_cos_to_source: f64,
    pub peak_step: usize,
    pub peak_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaAblation {
    pub provenance: Provenance,
    pub runs: usize,
    /// Seeds where the decayed schedule ends at least as close to the source as uniform.
    pub decayed_wins: usize,
    pub max_final_score_gap: f64,
    pub summary: Vec<AlphaSummaryRow>,
    #[serde(skip)]
    pub trajectories: Vec<(ScheduleKind, Trajectory)>,
}

impl AlphaAblation {
    pub fn curves_csv(&self) -> String {
        csv_table(
            &["schedule", "seed", "k", "t", "score", "cos_to_source"],
            self.trajectories.iter().flat_map(|(kind, t)| {
                t.steps.iter().map(move |s| {
                    (
                        kind.as_str(),
                        t.seed,
                        s.k,
                        s.t,
                        s.score,
                        linalg::cosine(&s.z_edit, &t.z_src0).unwrap_or(0.0),
                    )
                })
            }),
        )
    }

    pub fn summary_csv(&self) -> String {
        csv_table(
            &[
                "schedule",
                "seed",
                "final_score",
                "final_cos_to_source",
                "peak_step",
                "peak_score",
            ],
            self.summary.iter().map(|r| {
                (
                    r.schedule.as_str(),
                    r.seed,
                    r.final_score,
                    r.final_cos_to_source,
                    r.peak_step,
                    r.peak_score,
                )
            }),
        )
    }
}

/// Full-length, verification-free runs of the uniform and decayed schedules on seeds
/// `seed..seed + runs`.
pub fn ablate_alpha(
    model: &dyn VelocityModel,
    vocab: &ConceptVocabulary,
    plan: &EditPlan,
    z0: &[f64],
    base: &DseConfig,
    seed: u64,
    runs: usize,
) -> Result<AlphaAblation> {
    let c_src = vocab.embed_prompt(&plan.caption_src)?;
    let c_tar = vocab.embed_prompt(&plan.caption_tar)?;
    let mut summary = Vec::new();
    let mut trajectories = Vec::new();
    let mut decayed_wins = 0;
    let mut gap: f64 = 0.0;
    for r in 0..runs {
        let s = seed.wrapping_add(r as u64);
        let mut finals = Vec::new();
        for kind in [ScheduleKind::Uniform, ScheduleKind::Decayed] {
            let mut cfg = base.clone().with_schedule(kind)?;
            cfg.seed = s;
            let t = run_dse(model, z0, &c_src, &c_tar, &cfg, &mut NoObserver)?;
            let last = t.steps.last().expect("step 0");
            let peak = peak_step(&t);
            let row = AlphaSummaryRow {
                schedule: kind,
                seed: s,
                final_score: last.score,
                final_cos_to_source: linalg::cosine(&last.z_edit, z0).unwrap_or(0.0),
                peak_step: peak,
                peak_score: t.steps[peak].score,
            };
            finals.push((row.final_cos_to_source, row.final_score));
            summary.push(row);
            trajectories.push((kind, t));
        }
        if finals[1].0 >= finals[0].0 {
            decayed_wins += 1;
        }
        gap = gap.max((finals[1].1 - finals[0].1).abs());
    }
    Ok(AlphaAblation {
        provenance: provenance(&[(
            "score curve of the uniform schedule declines after step",
            20.0,
        )]),
        runs,
        decayed_wins,
        max_final_score_gap: gap,
        summary,
        trajectories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Apply the stop rule to fixed, precomputed full-length trajectories.
    Replay,
    /// Run the full loop once per window.
    Live,
}

impl std::str::FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replay" => Ok(WindowMode::Replay),
            "live" => Ok(WindowMode::Live),
            other => Err(Error::InvalidConfig(format!(
                "unknown window mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window: usize,
    pub seed: u64,
    pub stop_step: usize,
    pub stopped_early: bool,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAblation {
    pub provenance: Provenance,
    pub mode: WindowMode,
    pub windows: Vec<usize>,
    pub rows: Vec<WindowRow>,
    /// step -> number of runs whose full trajectory peaks there.
    pub peak_steps: BTreeMap<usize, usize>,
}

impl WindowAblation {
    pub fn to_csv(&self) -> String {
        csv_table(
            &["window", "seed", "stop_step", "stopped_early", "best_score"],
            self.rows
                .iter()
                .map(|r| (r.window, r.seed, r.stop_step, r.stopped_early, r.best_score)),
        )
    }

    pub fn peaks_csv(&self) -> String {
        csv_table(&["step", "count"], self.peak_steps.iter())
    }

    /// Mean best score at stop per window, in window order.
    pub fn mean_best(&self) -> Vec<(usize, f64)> {
        self.windows
            .iter()
            .map(|w| {
                let v = mean(
                    self.rows
                        .iter()
                        .filter(|r| r.window == *w)
                        .map(|r| r.best_score),
                );
                (*w, v.unwrap_or(f64::NAN))
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ablate_window(
    model: &dyn VelocityModel,
    vocab: &ConceptVocabulary,
    plan: &EditPlan,
    z0: &[f64],
    cfg: &LoopConfig,
    windows: &[usize],
    mode: WindowMode,
    seed: u64,
    runs: usize,
) -> Result<WindowAblation> {
    if windows.is_empty() || windows.contains(&0) || windows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "windows must be positive and strictly ascending".into(),
        ));
    }
    let c_src = vocab.embed_prompt(&plan.caption_src)?;
    let c_tar = vocab.embed_prompt(&plan.caption_tar)?;
    let mut rows = Vec::new();
    let mut peak_steps = BTreeMap::new();
    for r in 0..runs {
        let s = seed.wrapping_add(r as u64);
        let mut dse = cfg.dse.clone();
        dse.seed = s;
        let full = run_dse(model, z0, &c_src, &c_tar, &dse, &mut NoObserver)?;
        *peak_steps.entry(peak_step(&full)).or_default() += 1;
        let scores = full.scores();
        for &w in windows {
            let vcfg = VerifierConfig {
                patience_window: w,
                ..cfg.verifier
            };
            let row = match mode {
                WindowMode::Replay => {
                    let (stop, best, early) = replay_stop(&scores, &vcfg);
                    WindowRow {
                        window: w,
                        seed: s,
                        stop_step: full.steps[stop].k,
                        stopped_early: early,
                        best_score: best,
                    }
                }
                WindowMode::Live => {
                    let lc = LoopConfig {
                        verifier: vcfg,
                        ..cfg.clone()
                    };
                    let res = run_uev_from(model, vocab, plan.clone(), z0.to_vec(), &lc, s)?;
                    let last = res.rounds.last().expect("one round");
                    WindowRow {
                        window: w,
                        seed: s,
                        stop_step: last.trajectory.num_steps(),
                        stopped_early: last.halt == crate::dse::HaltReason::EarlyStop,
                        best_score: res.final_score,
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(WindowAblation {
        provenance: provenance(&[
            ("CLIP score at the smallest window", 0.288),
            ("CLIP score at the largest window", 0.368),
        ]),
        mode,
        windows: windows.to_vec(),
        rows,
        peak_steps,
    })
}

/// Round-1 plan plus source latent for an ablation case.
pub fn ablation_inputs(
    vocab: &ConceptVocabulary,
    scene: &SceneGraph,
    instruction: &str,
    task: TaskType,
    cfg: &LoopConfig,
) -> Result<(EditPlan, Vec<f64>)> {
    initial_plan(vocab, scene, instruction, task, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity_model::ExactGaussianVelocity;

    #[test]
    fn default_suite_shape_and_validity() {
        let v = ConceptVocabulary::default_world(0);
        let s = default_suite();
        let counts = s.category_counts();
        assert_eq!(counts.len(), 10);
        assert!(counts.values().all(|c| *c == 5));
        assert!(!counts.contains_key(&TaskType::TextChange));
        s.validate(&v).unwrap();
    }

    #[test]
    fn identity_suite_converges_in_one_round() {
        let v = ConceptVocabulary::default_world(0);
        let m = ExactGaussianVelocity::default();
        let g =
            SceneGraph::new(vec![ObjectNode::new(0, "dog").with("color", "red")], vec![]).unwrap();
        let suite = BenchSuite {
            cases: vec![
                BenchCase {
                    task: TaskType::ColorAlter,
                    scene: g.clone(),
                    instruction: "make the dog red".into(),
                    expect_unsupported: false,
                },
                BenchCase {
                    task: TaskType::SubjectReplace,
                    scene: g,
                    instruction: "replace the dog with a dog".into(),
                    expect_unsupported: false,
                },
            ],
        };
        let r = run_bench(&m, &v, &suite, &LoopConfig::default(), 0, 2).unwrap();
        assert_eq!(r.overall_convergence_rate, Some(1.0));
        assert!(r.cases.iter().all(|c| c.rounds_used == 1));
    }

    #[test]
    fn unsupported_cases_are_reported_not_counted() {
        let v = ConceptVocabulary::default_world(0);
        let m = ExactGaussianVelocity::default();
        let g = SceneGraph::new(vec![ObjectNode::new(0, "car")], vec![]).unwrap();
        let suite = BenchSuite {
            cases: vec![BenchCase {
                task: TaskType::TextChange,
                scene: g,
                instruction: "change the text on the car to stop".into(),
                expect_unsupported: true,
            }],
        };
        let r = run_bench(&m, &v, &suite, &LoopConfig::default(), 0, 1).unwrap();
        assert_eq!(r.categories[0].unsupported, 1);
        assert_eq!(r.categories[0].convergence_rate, None);
    }

    #[test]
    fn window_larger_than_t_stops_at_end() {
        let v = ConceptVocabulary::default_world(0);
        let m = ExactGaussianVelocity::default();
        let cfg = LoopConfig::default();
        let g = SceneGraph::new(
            vec![ObjectNode::new(0, "man").with("rank", "royal")],
            vec![],
        )
        .unwrap();
        let (plan, z0) =
            ablation_inputs(&v, &g, "make it a woman", TaskType::PsHuman, &cfg).unwrap();
        let a = ablate_window(&m, &v, &plan, &z0, &cfg, &[40], WindowMode::Replay, 0, 2).unwrap();
        assert!(a.rows.iter().all(|r| r.stop_step == 30 && !r.stopped_early));
        assert!(
            ablate_window(&m, &v, &plan, &z0, &cfg, &[3, 2], WindowMode::Replay, 0, 1).is_err()
        );
    }
}
