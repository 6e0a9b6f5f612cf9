// SPDX-License-Identifier: Apache-2.0

//! Per-step scoring, early stopping, dense feedback and corrective instructions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dse::{Control, StepObserver, StepRecord};
use crate::error::{Error, Result};
use crate::instruction_parser::{TaskType, ORDINALS};
use crate::linalg;
use crate::scene_graph::{graph_caption, NodeId, ObjectNode, SceneGraph};
use crate::semantic_space::{similarity_score, ConceptVocabulary, PromptEmbedding};

const TIE_EPS: f64 = 1e-12;
/// Share of a group's largest projection a token needs to count as present.
const PRESENCE: f64 = 0.125;

/// Which step wins when several share the best score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BestTie {
    #[default]
    First,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    pub threshold_sigma: f64,
    pub patience_window: usize,
    pub min_improvement: f64,
    #[serde(default)]
    pub best_tie: BestTie,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            threshold_sigma: 9.0,
            patience_window: 8,
            min_improvement: 1e-3,
            best_tie: BestTie::First,
        }
    }
}

impl VerifierConfig {
    /// Thresholds above 10 are allowed and simply never met.
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_sigma.is_finite() && self.threshold_sigma >= 0.0) {
            return Err(Error::InvalidConfig("threshold_sigma must be >= 0".into()));
        }
        if self.patience_window == 0 {
            return Err(Error::InvalidConfig("patience_window must be >= 1".into()));
        }
        if !(self.min_improvement.is_finite() && self.min_improvement >= 0.0) {
            return Err(Error::InvalidConfig("min_improvement must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifierState {
    pub history: Vec<f64>,
    pub best_score: f64,
    pub best_step: usize,
    pub best_latent: Vec<f64>,
}

impl VerifierState {
    pub fn new() -> Self {
        Self {
            best_score: f64::NEG_INFINITY,
            ..Self::default()
        }
    }

    pub fn record(&mut self, step: usize, score: f64, latent: &[f64], tie: BestTie) {
        let better = match tie {
            BestTie::First => score > self.best_score,
            BestTie::Last => score >= self.best_score,
        };
        if self.history.is_empty() || better {
            self.best_score = score;
            self.best_step = step;
            self.best_latent = latent.to_vec();
        }
        self.history.push(score);
    }
}

/// Scores `z_edit` against the target prompt.
pub fn score_step(
    state: &mut VerifierState,
    step: usize,
    z_edit: &[f64],
    c_tar: &PromptEmbedding,
) -> Result<f64> {
    let s = similarity_score(z_edit, c_tar)?;
    state.record(step, s, z_edit, BestTie::First);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopDecision {
    Continue,
    StopEarly,
}

/// Stops once the best score has reached the threshold and none of the last
/// `patience_window` scores beat the best seen before them by `min_improvement`.
pub fn should_stop_history(history: &[f64], cfg: &VerifierConfig) -> StopDecision {
    let n = history.len();
    let w = cfg.patience_window;
    if n <= w {
        return StopDecision::Continue;
    }
    let best = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if best < cfg.threshold_sigma {
        return StopDecision::Continue;
    }
    let prior = history[..n - w]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if history[n - w..]
        .iter()
        .all(|s| *s <= prior + cfg.min_improvement)
    {
        StopDecision::StopEarly
    } else {
        StopDecision::Continue
    }
}

pub fn should_stop(state: &VerifierState, cfg: &VerifierConfig) -> StopDecision {
    should_stop_history(&state.history, cfg)
}

/// Replays a fixed score sequence: the index at which the stop rule first fires (or the last
/// index) and the best score observed up to it.
pub fn replay_stop(scores: &[f64], cfg: &VerifierConfig) -> (usize, f64, bool) {
    for n in 1..=scores.len() {
        if should_stop_history(&scores[..n], cfg) == StopDecision::StopEarly {
            let best = scores[..n]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            return (n - 1, best, true);
        }
    }
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (scores.len().saturating_sub(1), best, false)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "slot", rename_all = "snake_case")]
pub enum FeedbackKey {
    Name,
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub node: NodeId,
    pub key: FeedbackKey,
    pub expected: String,
    pub observed: String,
    pub residual: f64,
}

impl FeedbackEntry {
    pub fn is_mismatch(&self) -> bool {
        self.expected != self.observed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackVector {
    pub entries: Vec<FeedbackEntry>,
    pub worst: usize,
}

impl FeedbackVector {
    pub fn residuals(&self) -> BTreeMap<(NodeId, FeedbackKey), f64> {
        self.entries
            .iter()
            .map(|e| ((e.node, e.key.clone()), e.residual))
            .collect()
    }

    pub fn worst_entry(&self) -> &FeedbackEntry {
        &self.entries[self.worst]
    }

    /// Largest-magnitude entry whose decoded token disagrees with the target, if any.
    pub fn worst_mismatch(&self) -> Option<&FeedbackEntry> {
        let mut best: Option<&FeedbackEntry> = None;
        for e in self.entries.iter().filter(|e| e.is_mismatch()) {
            if best.is_none_or(|b| e.residual.abs() > b.residual.abs()) {
                best = Some(e);
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.residual.abs())
            .fold(0.0, f64::max)
    }
}

/// Embedding of the graph's own caption.
pub fn scene_embedding(vocab: &ConceptVocabulary, g: &SceneGraph) -> Result<PromptEmbedding> {
    vocab.embed_prompt(&graph_caption(g))
}

/// Per (node, name | slot) residual `1 - cos(z, c) / cos(s, c)` where `c` is the expected
/// concept and `s` the embedding of `graph_tar` itself, so every residual is 0 at `s`.
pub fn compute_feedback(
    z: &[f64],
    graph_tar: &SceneGraph,
    vocab: &ConceptVocabulary,
) -> Result<FeedbackVector> {
    if graph_tar.nodes().is_empty() {
        return Err(Error::InvalidGraph(
            "feedback needs a non-empty target graph".into(),
        ));
    }
    let scene = scene_embedding(vocab, graph_tar)?;
    let decoded = decode_to_graph(z, vocab, graph_tar)?;
    let mut entries = Vec::new();
    for n in graph_tar.nodes() {
        let seen = decoded.node(n.id).expect("decoding keeps ids");
        let mut push = |key: FeedbackKey, expected: &str, observed: &str| -> Result<()> {
            let c = vocab.embed_concept(expected)?;
            let reference = linalg::cosine(&scene.values, c)?;
            let here = linalg::cosine(z, c).unwrap_or(0.0);
            entries.push(FeedbackEntry {
                node: n.id,
                key,
                expected: expected.to_string(),
                observed: observed.to_string(),
                residual: 1.0 - here / reference,
            });
            Ok(())
        };
        push(FeedbackKey::Name, &n.name, &seen.name)?;
        for (slot, token) in n.ordered_attributes() {
            push(
                FeedbackKey::Slot(slot.to_string()),
                token,
                &seen.attributes[slot],
            )?;
        }
    }
    let mut worst = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.residual.abs() > entries[worst].residual.abs() {
            worst = i;
        }
    }
    Ok(FeedbackVector { entries, worst })
}

/// Re-reads a latent as a scene graph with the template's structure.
///
/// Each template position (node name or attribute) is filled from the axis group of its
/// template token. Groups used once take the token with the largest cosine to `z`; groups
/// used `m` times split `m` seats: every token whose projection reaches 1/8 of the group's
/// largest gets one seat first, then remaining seats follow Sainte-Lague apportionment of the
/// positive projections, so a latent that mentions a concept twice can decode it twice. Ties within 1e-12 go to the
/// lexicographically smaller token. Positions keep their template token when it was decoded.
pub fn decode_to_graph(
    z: &[f64],
    vocab: &ConceptVocabulary,
    template: &SceneGraph,
) -> Result<SceneGraph> {
    linalg::check_dim(vocab.dimension(), z.len())?;
    // group -> positions (node index, None for name or Some(slot)), template token
    let mut positions: BTreeMap<String, Vec<(usize, Option<String>, String)>> = BTreeMap::new();
    for (i, n) in template.nodes().iter().enumerate() {
        let mut add = |slot: Option<String>, token: &str| -> Result<()> {
            let group = vocab
                .group_of(token)
                .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
            positions
                .entry(group.to_string())
                .or_default()
                .push((i, slot, token.to_string()));
            Ok(())
        };
        add(None, &n.name)?;
        for (slot, token) in &n.attributes {
            add(Some(slot.clone()), token)?;
        }
    }

    let mut nodes: Vec<ObjectNode> = template.nodes().to_vec();
    for (group, slots) in positions {
        let members = vocab.group_members(&group).expect("group exists");
        let proj: Vec<(String, f64)> = members
            .iter()
            .map(|t| {
                let e = vocab.embed_concept(t).expect("member embeds");
                (t.clone(), linalg::dot(z, e))
            })
            .collect();
        let seats = apportion(&proj, slots.len());
        let mut remaining: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &seats {
            *remaining.entry(t.as_str()).or_default() += 1;
        }
        let mut chosen: Vec<Option<String>> = vec![None; slots.len()];
        for (j, (_, _, token)) in slots.iter().enumerate() {
            if let Some(c) = remaining.get_mut(token.as_str()) {
                if *c > 0 {
                    *c -= 1;
                    chosen[j] = Some(token.clone());
                }
            }
        }
        let mut leftovers = seats
            .iter()
            .filter(|t| {
                let c = remaining.get_mut(t.as_str()).expect("seat counted");
                if *c > 0 {
                    *c -= 1;
                    true
                } else {
                    false
                }
            })
            .cloned()
            .collect::<Vec<_>>()
            .into_iter();
        for (j, (node, slot, _)) in slots.iter().enumerate() {
            let token = match chosen[j].take() {
                Some(t) => t,
                None => leftovers.next().expect("one seat per position"),
            };
            match slot {
                None => nodes[*node].name = token,
                Some(s) => {
                    nodes[*node].attributes.insert(s.clone(), token);
                }
            }
        }
    }
    SceneGraph::new(nodes, template.edges().to_vec())
}

/// `seats` picks in award order: present tokens first, then quotient `p / (2a + 1)` for a
/// token holding `a` seats.
fn apportion(proj: &[(String, f64)], seats: usize) -> Vec<String> {
    let top = proj.iter().map(|(_, p)| *p).fold(0.0, f64::max);
    let mut held = vec![0usize; proj.len()];
    let mut out = Vec::with_capacity(seats);
    while out.len() < seats {
        let unseated =
            (0..proj.len()).any(|i| held[i] == 0 && top > 0.0 && proj[i].1 >= PRESENCE * top);
        let mut best: Option<(usize, f64)> = None;
        for (i, (tok, p)) in proj.iter().enumerate() {
            let q = if unseated {
                if held[i] > 0 || top <= 0.0 || *p < PRESENCE * top {
                    continue;
                }
                *p
            } else {
                p.max(0.0) / (2 * held[i] + 1) as f64
            };
            best = match best {
                None => Some((i, q)),
                Some((b, bq)) => {
                    if q > bq + TIE_EPS || ((q - bq).abs() <= TIE_EPS && *tok < proj[b].0) {
                        Some((i, q))
                    } else {
                        Some((b, bq))
                    }
                }
            };
        }
        let (i, _) = best.expect("group is non-empty");
        held[i] += 1;
        out.push(proj[i].0.clone());
    }
    out
}

/// Shortest `modifier* name` phrase that resolves to `id` in `g` under `task`.
fn referent(g: &SceneGraph, id: NodeId, task: TaskType) -> String {
    let g = g.with_task_defaults(task);
    let node = g.node(id).expect("referent exists");
    let same_name: Vec<&ObjectNode> = g.nodes().iter().filter(|n| n.name == node.name).collect();
    if same_name.first().map(|n| n.id) == Some(id) {
        return node.name.clone();
    }
    let first_described = same_name.iter().find(|n| {
        node.attributes
            .iter()
            .all(|(k, v)| n.attributes.get(k) == Some(v))
    });
    if first_described.map(|n| n.id) == Some(id) {
        let mut words: Vec<&str> = node
            .ordered_attributes()
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        words.push(&node.name);
        return words.join(" ");
    }
    let nth = same_name
        .iter()
        .position(|n| n.id == id)
        .expect("node is in its own name group");
    match ORDINALS.get(nth) {
        Some(o) => format!("{o} {}", node.name),
        None => node.name.clone(),
    }
}

/// Canonical instruction addressing the worst mismatched entry (or the worst entry when the
/// decoded graph already agrees with the target). `observed` is the graph the instruction
/// will be parsed against.
pub fn corrective_instruction(
    f: &FeedbackVector,
    observed: &SceneGraph,
    task: TaskType,
) -> Result<String> {
    let e = f
        .worst_mismatch()
        .or_else(|| f.entries.get(f.worst))
        .ok_or_else(|| Error::InvalidGraph("empty feedback".into()))?;
    let node = observed
        .node(e.node)
        .ok_or_else(|| Error::UnresolvedReferent(format!("node {}", e.node)))?;
    let who = referent(observed, node.id, task);
    Ok(match &e.key {
        FeedbackKey::Name => format!("replace the {who} with a {}", e.expected),
        FeedbackKey::Slot(slot) => format!("change the {slot} of {who} to {}", e.expected),
    })
}

/// One line of the verifier event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum VerifierEvent {
    Score {
        round: usize,
        k: usize,
        score: f64,
        best_score: f64,
        best_step: usize,
    },
    Stop {
        round: usize,
        k: usize,
        best_score: f64,
        best_step: usize,
    },
    Corrective {
        round: usize,
        instruction: String,
        node: NodeId,
        key: FeedbackKey,
        residual: f64,
    },
    RoundEnd {
        round: usize,
        best_score: f64,
        best_step: usize,
        converged: bool,
    },
}

/// Step observer that scores every record and halts on the stop rule.
pub struct Verifier {
    pub config: VerifierConfig,
    pub state: VerifierState,
    pub round: usize,
    pub events: Vec<VerifierEvent>,
}

impl Verifier {
    pub fn new(config: VerifierConfig, round: usize) -> Self {
        Self {
            config,
            state: VerifierState::new(),
            round,
            events: Vec::new(),
        }
    }
}

impl StepObserver for Verifier {
    fn observe(&mut self, record: &StepRecord) -> Control {
        self.state
            .record(record.k, record.score, &record.z_edit, self.config.best_tie);
        self.events.push(VerifierEvent::Score {
            round: self.round,
            k: record.k,
            score: record.score,
            best_score: self.state.best_score,
            best_step: self.state.best_step,
        });
        match should_stop(&self.state, &self.config) {
            StopDecision::Continue => Control::Continue,
            StopDecision::StopEarly => {
                self.events.push(VerifierEvent::Stop {
                    round: self.round,
                    k: record.k,
                    best_score: self.state.best_score,
                    best_step: self.state.best_step,
                });
                Control::Halt
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction_parser::parse_instruction;
    use crate::scene_graph::{apply_patch, Edge, PatchOp};

    fn vocab() -> ConceptVocabulary {
        ConceptVocabulary::default_world(0)
    }

    fn cfg() -> VerifierConfig {
        VerifierConfig::default()
    }

    #[test]
    fn stop_rule_examples() {
        let h = [8.0, 9.2, 9.2, 9.2, 9.2, 9.2, 9.2, 9.2, 9.2, 9.2];
        assert_eq!(should_stop_history(&h, &cfg()), StopDecision::StopEarly);
        let rising: Vec<f64> = (0..20).map(|i| 5.0 + 0.1 * i as f64).collect();
        assert_eq!(should_stop_history(&rising, &cfg()), StopDecision::Continue);
        let h = [9.5, 9.5, 9.5, 9.5, 9.5, 9.5, 9.5, 9.5];
        assert_eq!(should_stop_history(&h, &cfg()), StopDecision::Continue);
    }

    #[test]
    fn stop_rule_needs_threshold() {
        let flat = vec![8.9; 40];
        assert_eq!(should_stop_history(&flat, &cfg()), StopDecision::Continue);
    }

    #[test]
    fn best_tracking_ties() {
        let mut s = VerifierState::new();
        for (i, v) in [1.0, 3.0, 2.0, 3.0].iter().enumerate() {
            s.record(i, *v, &[i as f64], BestTie::First);
        }
        assert_eq!((s.best_step, s.best_score), (1, 3.0));
        let mut s = VerifierState::new();
        for (i, v) in [1.0, 3.0, 2.0, 3.0].iter().enumerate() {
            s.record(i, *v, &[i as f64], BestTie::Last);
        }
        assert_eq!(s.best_step, 3);
        assert_eq!(s.best_latent, vec![3.0]);
    }

    #[test]
    fn score_step_parallel_is_ten() {
        let v = vocab();
        let c = v.embed_prompt(&["dog"]).unwrap();
        let mut s = VerifierState::new();
        let z = linalg::scale(&c.values, 3.0);
        assert!((score_step(&mut s, 0, &z, &c).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(s.history.len(), 1);
    }

    fn dog_scene() -> SceneGraph {
        SceneGraph::new(
            vec![
                ObjectNode::new(0, "dog").with("color", "brown"),
                ObjectNode::new(1, "grass"),
            ],
            vec![Edge(0, "on".into(), 1)],
        )
        .unwrap()
    }

    #[test]
    fn decode_exact_scene_embedding() {
        let v = vocab();
        let g = dog_scene();
        let z = scene_embedding(&v, &g).unwrap().values;
        assert_eq!(decode_to_graph(&z, &v, &g).unwrap(), g);
    }

    #[test]
    fn decode_handles_repeated_group_members() {
        let v = vocab();
        let g = SceneGraph::new(
            vec![
                ObjectNode::new(0, "dog").with("color", "white"),
                ObjectNode::new(1, "hat").with("color", "white"),
                ObjectNode::new(2, "cat").with("color", "red"),
            ],
            vec![],
        )
        .unwrap();
        let z = scene_embedding(&v, &g).unwrap().values;
        assert_eq!(decode_to_graph(&z, &v, &g).unwrap(), g);
    }

    #[test]
    fn decode_midpoint_tie_prefers_smaller_token() {
        let v = vocab();
        let g = SceneGraph::new(vec![ObjectNode::new(0, "dog")], vec![]).unwrap();
        let z = linalg::add(
            v.embed_concept("dog").unwrap(),
            v.embed_concept("cat").unwrap(),
        );
        let z = linalg::scale(&z, 0.5);
        assert_eq!(decode_to_graph(&z, &v, &g).unwrap().nodes()[0].name, "cat");
    }

    #[test]
    fn feedback_single_node_scale_invariant() {
        let v = vocab();
        let g = SceneGraph::new(vec![ObjectNode::new(0, "cat")], vec![]).unwrap();
        let z = linalg::scale(v.embed_concept("cat").unwrap(), 7.5);
        let f = compute_feedback(&z, &g, &v).unwrap();
        assert_eq!(f.entries.len(), 1);
        assert_eq!(f.worst, 0);
        assert!(f.entries[0].residual.abs() < 1e-12);
    }

    #[test]
    fn feedback_flags_wrong_attribute() {
        let v = vocab();
        let src = dog_scene();
        let tar = apply_patch(
            &src,
            &crate::scene_graph::GraphPatch::new(vec![PatchOp::SetAttribute {
                id: 0,
                slot: "color".into(),
                token: "blue".into(),
            }]),
        )
        .unwrap();
        let z = scene_embedding(&v, &src).unwrap().values;
        let f = compute_feedback(&z, &tar, &v).unwrap();
        let e = f.worst_entry();
        assert_eq!((e.node, &e.key), (0, &FeedbackKey::Slot("color".into())));
        assert_eq!(
            (e.expected.as_str(), e.observed.as_str()),
            ("blue", "brown")
        );
        let decoded = decode_to_graph(&z, &v, &tar).unwrap();
        let q = corrective_instruction(&f, &decoded, TaskType::ColorAlter).unwrap();
        assert_eq!(q, "change the color of dog to blue");
        let p = parse_instruction(&v, &q, TaskType::ColorAlter, &decoded).unwrap();
        assert_eq!(apply_patch(&decoded, &p).unwrap(), tar);
    }

    #[test]
    fn corrective_relabel() {
        let v = vocab();
        let src = SceneGraph::new(vec![ObjectNode::new(0, "dog")], vec![]).unwrap();
        let tar = SceneGraph::new(vec![ObjectNode::new(0, "cat")], vec![]).unwrap();
        let z = scene_embedding(&v, &src).unwrap().values;
        let f = compute_feedback(&z, &tar, &v).unwrap();
        let decoded = decode_to_graph(&z, &v, &tar).unwrap();
        assert_eq!(
            corrective_instruction(&f, &decoded, TaskType::SubjectReplace).unwrap(),
            "replace the dog with a cat"
        );
    }

    #[test]
    fn replay_truncation() {
        let scores = [5.0, 9.1, 9.3, 9.3, 9.2, 9.4, 9.4, 9.4, 9.4, 9.4, 9.4, 9.4];
        let mut last_best = f64::NEG_INFINITY;
        let mut last_stop = 0;
        for w in 1..=10 {
            let c = VerifierConfig {
                patience_window: w,
                ..cfg()
            };
            let (stop, best, _) = replay_stop(&scores, &c);
            assert!(best >= last_best);
            assert!(stop >= last_stop);
            last_best = best;
            last_stop = stop;
        }
        let c = VerifierConfig {
            patience_window: 40,
            ..cfg()
        };
        assert_eq!(replay_stop(&scores, &c), (11, 9.4, false));
    }
}
