// SPDX-License-Identifier: Apache-2.0

//! Understand, edit, verify: plan, integrate with the verifier attached, and re-plan from
//! the best latent until the score clears the threshold or the round budget runs out.

use serde::{Deserialize, Serialize};

use crate::dse::{run_dse_branches, Branch, DseConfig, HaltReason, Trajectory};
use crate::error::{Error, Result};
use crate::instruction_parser::{build_edit_plan, EditPlan, TaskType};
use crate::linalg;
use crate::scene_graph::{graph_caption, SceneGraph};
use crate::semantic_space::ConceptVocabulary;
use crate::velocity_model::{PromptTarget, VelocityModel};
use crate::verifier::{
    compute_feedback, corrective_instruction, decode_to_graph, FeedbackVector, Verifier,
    VerifierConfig, VerifierEvent,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub max_rounds: usize,
    pub dse: DseConfig,
    pub verifier: VerifierConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_rounds: 3,
            dse: DseConfig::default(),
            verifier: VerifierConfig::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::InvalidConfig("max_rounds must be >= 1".into()));
        }
        self.dse.validate()?;
        self.verifier.validate()
    }
}

/// Seed used by round `round` (1-based) of a run seeded with `seed`.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    seed.wrapping_add((round as u64 - 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub plan: EditPlan,
    pub trajectory: Trajectory,
    pub halt: HaltReason,
    pub best_score: f64,
    pub best_step: usize,
    pub feedback: Option<FeedbackVector>,
    pub corrective: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResult {
    pub seed: u64,
    pub task: TaskType,
    pub instruction: String,
    pub goal_graph: SceneGraph,
    pub final_latent: Vec<f64>,
    pub final_graph: SceneGraph,
    pub final_score: f64,
    pub rounds_used: usize,
    pub converged: bool,
    pub rounds: Vec<RoundRecord>,
    pub events: Vec<VerifierEvent>,
}

/// Compact summary written as `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub seed: u64,
    pub task: TaskType,
    pub instruction: String,
    pub converged: bool,
    pub rounds_used: usize,
    pub final_score: f64,
    pub final_graph: SceneGraph,
    pub final_latent: Vec<f64>,
    pub rounds: Vec<RoundSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub instruction: String,
    pub halt: HaltReason,
    pub steps: usize,
    pub best_score: f64,
    pub best_step: usize,
    pub corrective: Option<String>,
}

impl EditResult {
    pub fn summary(&self) -> ResultSummary {
        ResultSummary {
            seed: self.seed,
            task: self.task,
            instruction: self.instruction.clone(),
            converged: self.converged,
            rounds_used: self.rounds_used,
            final_score: self.final_score,
            final_graph: self.final_graph.clone(),
            final_latent: self.final_latent.clone(),
            rounds: self
                .rounds
                .iter()
                .map(|r| RoundSummary {
                    round: r.round,
                    instruction: r.plan.instruction.clone(),
                    halt: r.halt,
                    steps: r.trajectory.num_steps(),
                    best_score: r.best_score,
                    best_step: r.best_step,
                    corrective: r.corrective.clone(),
                })
                .collect(),
        }
    }
}

/// Round-1 plan and the source latent it starts from.
pub fn initial_plan(
    vocab: &ConceptVocabulary,
    scene: &SceneGraph,
    instruction: &str,
    task: TaskType,
    cfg: &LoopConfig,
) -> Result<(EditPlan, Vec<f64>)> {
    let plan = build_edit_plan(vocab, scene, instruction, task)?;
    let c_src = vocab.embed_prompt(&plan.caption_src)?;
    let z0 = linalg::scale(&c_src.values, cfg.dse.prompt.amplitude);
    Ok((plan, z0))
}

pub fn run_uev(
    model: &dyn VelocityModel,
    vocab: &ConceptVocabulary,
    scene: &SceneGraph,
    instruction: &str,
    task: TaskType,
    cfg: &LoopConfig,
    seed: u64,
) -> Result<EditResult> {
    cfg.validate()?;
    let (plan, z0) = initial_plan(vocab, scene, instruction, task, cfg)?;
    run_uev_from(model, vocab, plan, z0, cfg, seed)
}

/// Runs the loop from an already built round-1 plan.
pub fn run_uev_from(
    model: &dyn VelocityModel,
    vocab: &ConceptVocabulary,
    first: EditPlan,
    z0: Vec<f64>,
    cfg: &LoopConfig,
    seed: u64,
) -> Result<EditResult> {
    cfg.validate()?;
    let task = first.task;
    let instruction = first.instruction.clone();
    let goal = first.graph_tar.with_task_defaults(task);
    let c_goal = vocab.embed_prompt(&graph_caption(&goal))?;
    if c_goal.is_null() {
        return Err(Error::NullPrompt);
    }

    let mut plan = first;
    let mut z_src0 = z0;
    let mut rounds = Vec::new();
    let mut events = Vec::new();
    for round in 1..=cfg.max_rounds {
        let mut dse = cfg.dse.clone();
        dse.seed = round_seed(seed, round);
        let c_src = vocab.embed_prompt(&plan.caption_src)?;
        let c_tar = vocab.embed_prompt(&plan.caption_tar)?;
        let src = Branch {
            target: PromptTarget::from_prompt(&c_src, &dse.prompt),
            scale: dse.guidance.scale_src,
        };
        let tar = Branch {
            target: PromptTarget::from_prompt(&c_tar, &dse.prompt),
            scale: dse.guidance.scale_tar,
        };
        let mut verifier = Verifier::new(cfg.verifier, round);
        let trajectory = run_dse_branches(
            model,
            &z_src0,
            src,
            tar,
            c_goal.values.clone(),
            &dse,
            &mut verifier,
        )?;
        events.append(&mut verifier.events);
        let best = verifier.state;
        let converged = best.best_score >= cfg.verifier.threshold_sigma;
        events.push(VerifierEvent::RoundEnd {
            round,
            best_score: best.best_score,
            best_step: best.best_step,
            converged,
        });

        let mut record = RoundRecord {
            round,
            halt: trajectory.halt,
            plan: plan.clone(),
            trajectory,
            best_score: best.best_score,
            best_step: best.best_step,
            feedback: None,
            corrective: None,
        };
        if converged || round == cfg.max_rounds {
            rounds.push(record);
            let final_graph = decode_to_graph(&best.best_latent, vocab, &goal)?;
            return Ok(EditResult {
                seed,
                task,
                instruction,
                goal_graph: goal,
                final_latent: best.best_latent,
                final_graph,
                final_score: best.best_score,
                rounds_used: round,
                converged,
                rounds,
                events,
            });
        }

        let feedback = compute_feedback(&best.best_latent, &goal, vocab)?;
        let observed = decode_to_graph(&best.best_latent, vocab, &goal)?;
        let corrective = corrective_instruction(&feedback, &observed, task)?;
        let worst = feedback
            .worst_mismatch()
            .unwrap_or_else(|| feedback.worst_entry())
            .clone();
        events.push(VerifierEvent::Corrective {
            round,
            instruction: corrective.clone(),
            node: worst.node,
            key: worst.key,
            residual: worst.residual,
        });
        plan = build_edit_plan(vocab, &observed, &corrective, task)?;
        record.feedback = Some(feedback);
        record.corrective = Some(corrective);
        rounds.push(record);
        z_src0 = best.best_latent;
    }
    unreachable!("the last round always returns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::ObjectNode;
    use crate::velocity_model::ExactGaussianVelocity;

    fn king() -> SceneGraph {
        SceneGraph::new(
            vec![ObjectNode::new(0, "man").with("rank", "royal")],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn king_to_queen() {
        let v = ConceptVocabulary::default_world(0);
        let m = ExactGaussianVelocity::default();
        let r = run_uev(
            &m,
            &v,
            &king(),
            "make it a woman",
            TaskType::PsHuman,
            &LoopConfig::default(),
            3,
        )
        .unwrap();
        assert!(r.converged);
        let expected = SceneGraph::new(
            vec![ObjectNode::new(0, "woman").with("rank", "royal")],
            vec![],
        )
        .unwrap();
        assert!(r.final_graph.equivalent(&expected));
    }

    #[test]
    fn identity_converges_at_source() {
        let v = ConceptVocabulary::default_world(0);
        let m = ExactGaussianVelocity::default();
        let cfg = LoopConfig::default();
        let r = run_uev(&m, &v, &king(), "make it a man", TaskType::PsHuman, &cfg, 1).unwrap();
        assert!(r.converged);
        assert_eq!(r.rounds_used, 1);
        let (_, z0) = initial_plan(&v, &king(), "make it a man", TaskType::PsHuman, &cfg).unwrap();
        assert_eq!(r.final_latent, z0);
    }

    #[test]
    fn unreachable_threshold_uses_all_rounds() {
        let v = ConceptVocabulary::default_world(0);
        let m = ExactGaussianVelocity::default();
        let mut cfg = LoopConfig::default();
        cfg.verifier.threshold_sigma = 10.0 + 1e-9;
        let r = run_uev(
            &m,
            &v,
            &king(),
            "make it a woman",
            TaskType::PsHuman,
            &cfg,
            2,
        )
        .unwrap();
        assert_eq!(r.rounds_used, 3);
        assert!(!r.converged);
        for w in r.rounds.windows(2) {
            assert!(w[1].best_score >= w[0].best_score - cfg.verifier.min_improvement);
        }
    }
}
