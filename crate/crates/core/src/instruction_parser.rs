// SPDX-License-Identifier: Apache-2.0

//! Instruction understanding: a small per-task grammar that turns an edit instruction
//! into a [`GraphPatch`], and [`build_edit_plan`] which derives both captions and the
//! token-level replacement list from it. The grammar is documented in `docs/grammar.md`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene_graph::{
    apply_patch, caption_from_graph, Edge, GraphPatch, NodeId, ObjectNode, PatchOp, SceneGraph,
};
use crate::semantic_space::ConceptVocabulary;

/// The eleven edit categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    BackgroundChange,
    ColorAlter,
    MaterialAlter,
    MotionChange,
    PsHuman,
    StyleChange,
    SubjectAdd,
    SubjectRemove,
    SubjectReplace,
    TextChange,
    ToneTransfer,
}

impl TaskType {
    pub const ALL: [TaskType; 11] = [
        TaskType::BackgroundChange,
        TaskType::ColorAlter,
        TaskType::MaterialAlter,
        TaskType::MotionChange,
        TaskType::PsHuman,
        TaskType::StyleChange,
        TaskType::SubjectAdd,
        TaskType::SubjectRemove,
        TaskType::SubjectReplace,
        TaskType::TextChange,
        TaskType::ToneTransfer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::BackgroundChange => "background_change",
            TaskType::ColorAlter => "color_alter",
            TaskType::MaterialAlter => "material_alter",
            TaskType::MotionChange => "motion_change",
            TaskType::PsHuman => "ps_human",
            TaskType::StyleChange => "style_change",
            TaskType::SubjectAdd => "subject_add",
            TaskType::SubjectRemove => "subject_remove",
            TaskType::SubjectReplace => "subject_replace",
            TaskType::TextChange => "text_change",
            TaskType::ToneTransfer => "tone_transfer",
        }
    }

    /// Slots the source caption must always mention for this task.
    pub fn required_slots(self) -> &'static [&'static str] {
        match self {
            TaskType::ColorAlter => &["color"],
            TaskType::MaterialAlter => &["material"],
            TaskType::MotionChange => &["pose"],
            TaskType::StyleChange => &["style"],
            TaskType::ToneTransfer => &["tone"],
            _ => &[],
        }
    }

    /// Attribute slot edited by the task's own `make`/`change` forms.
    fn edit_slots(self) -> &'static [&'static str] {
        match self {
            TaskType::ColorAlter => &["color"],
            TaskType::MaterialAlter => &["material"],
            TaskType::MotionChange => &["pose"],
            TaskType::StyleChange => &["style"],
            TaskType::ToneTransfer => &["tone"],
            TaskType::BackgroundChange => &["background"],
            TaskType::PsHuman => &["gender", "rank"],
            _ => &[],
        }
    }

    fn expected_forms(self) -> &'static str {
        match self {
            TaskType::SubjectReplace => "`replace (the)? X with (a)? Y`",
            TaskType::ColorAlter | TaskType::MaterialAlter => {
                "`make (the)? X Y` or `change the <slot> of X to Y`"
            }
            TaskType::MotionChange | TaskType::StyleChange | TaskType::ToneTransfer => {
                "`change (the)? <slot> (of X)? to Y` or `make (the)? X Y`"
            }
            TaskType::BackgroundChange => "`change (the)? background to Y`",
            TaskType::PsHuman => {
                "`make (the)? X a Y`, `make it a Y` or `change (the)? <slot> (of X)? to Y`"
            }
            TaskType::SubjectAdd => "`add (a)? Y ((on|under|beside|behind|next to) (the)? X)?`",
            TaskType::SubjectRemove => "`remove (the)? X`",
            TaskType::TextChange => "`change (the)? text ((on|of) (the)? X)? to Y`",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown task type `{s}`")))
    }
}

pub const RELATIONS: &[&str] = &["on", "under", "beside", "behind", "next to"];

fn tokenize(q: &str) -> Vec<String> {
    q.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| c == ',' || c == '.' || c == '!' || c == '"')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

fn grammar_error(clause: &[String], task: TaskType) -> Error {
    Error::Grammar {
        input: clause.join(" "),
        expected: task.expected_forms().to_string(),
    }
}

/// Parses `q` under `task` against `g`. Clauses joined by `and` are applied in order, each
/// resolved against the graph produced by the clauses before it.
pub fn parse_instruction(
    vocab: &ConceptVocabulary,
    q: &str,
    task: TaskType,
    g: &SceneGraph,
) -> Result<GraphPatch> {
    let tokens = tokenize(q);
    if tokens.is_empty() {
        return Err(Error::Grammar {
            input: q.to_string(),
            expected: task.expected_forms().to_string(),
        });
    }
    let mut ops = Vec::new();
    let mut current = g.clone();
    for clause in tokens.split(|t| t == "and") {
        if clause.is_empty() {
            return Err(grammar_error(&tokens, task));
        }
        let clause_ops: Vec<PatchOp> = parse_clause(vocab, clause, task, &current)?
            .into_iter()
            .filter(|op| !is_noop(op, &current))
            .collect();
        current = apply_patch(&current, &GraphPatch::new(clause_ops.clone()))?;
        ops.extend(clause_ops);
    }
    Ok(GraphPatch::new(ops))
}

fn is_noop(op: &PatchOp, g: &SceneGraph) -> bool {
    match op {
        PatchOp::Relabel { id, name } => g.node(*id).is_some_and(|n| n.name == *name),
        PatchOp::SetAttribute { id, slot, token } => g
            .node(*id)
            .is_some_and(|n| n.attributes.get(slot) == Some(token)),
        _ => false,
    }
}

fn parse_clause(
    vocab: &ConceptVocabulary,
    c: &[String],
    task: TaskType,
    g: &SceneGraph,
) -> Result<Vec<PatchOp>> {
    let head = c[0].as_str();
    if task == TaskType::TextChange {
        return parse_text_change(c, task);
    }

    // Canonical forms, accepted under every supported task.
    if head == "replace" {
        return parse_replace(vocab, c, task, g);
    }
    if head == "change" && c.len() >= 6 && c[1] == "the" && c.iter().any(|t| t == "of") {
        if let Some(op) = parse_change(vocab, c, task, g, true)? {
            return Ok(vec![op]);
        }
    }

    match (task, head) {
        (TaskType::SubjectAdd, "add") => parse_add(vocab, c, task, g),
        (TaskType::SubjectRemove, "remove") => {
            let node = resolve(vocab, &c[1..], task, g)?;
            Ok(vec![PatchOp::RemoveNode { id: node }])
        }
        (
            TaskType::ColorAlter
            | TaskType::MaterialAlter
            | TaskType::MotionChange
            | TaskType::StyleChange
            | TaskType::ToneTransfer
            | TaskType::PsHuman,
            "make",
        ) => parse_make(vocab, c, task, g),
        (
            TaskType::MotionChange
            | TaskType::StyleChange
            | TaskType::ToneTransfer
            | TaskType::BackgroundChange
            | TaskType::PsHuman
            | TaskType::ColorAlter
            | TaskType::MaterialAlter,
            "change",
        ) => parse_change(vocab, c, task, g, false)?
            .map(|op| vec![op])
            .ok_or_else(|| grammar_error(c, task)),
        _ => Err(grammar_error(c, task)),
    }
}

fn concept<'a>(vocab: &ConceptVocabulary, token: &'a str) -> Result<&'a str> {
    if vocab.contains(token) {
        Ok(token)
    } else {
        Err(Error::UnknownToken(token.to_string()))
    }
}

fn strip_article(words: &[String]) -> &[String] {
    match words.first().map(String::as_str) {
        Some("the" | "a" | "an") => &words[1..],
        _ => words,
    }
}

/// Resolves `(the)? modifier* name` or `it` to a node id. Modifiers must match the node's
/// attributes (task defaults included).
fn resolve(
    vocab: &ConceptVocabulary,
    phrase: &[String],
    task: TaskType,
    g: &SceneGraph,
) -> Result<NodeId> {
    let phrase = strip_article(phrase);
    if phrase.is_empty() {
        return Err(Error::Grammar {
            input: String::new(),
            expected: "an object reference".into(),
        });
    }
    if phrase.len() == 1 && phrase[0] == "it" {
        return g
            .nodes()
            .first()
            .map(|n| n.id)
            .ok_or_else(|| Error::UnresolvedReferent("it".into()));
    }
    let (nth, rest) = match phrase.first().and_then(|w| ordinal_index(w)) {
        Some(i) if phrase.len() > 1 => (i, &phrase[1..]),
        _ => (0, phrase),
    };
    let (name, modifiers) = rest.split_last().expect("non-empty");
    concept(vocab, name)?;
    for m in modifiers {
        concept(vocab, m)?;
    }
    let materialized = g.with_task_defaults(task);
    materialized
        .nodes()
        .iter()
        .filter(|n| {
            n.name == *name
                && modifiers.iter().all(|m| {
                    vocab
                        .group_of(m)
                        .is_some_and(|slot| n.attributes.get(slot) == Some(m))
                })
        })
        .nth(nth)
        .map(|n| n.id)
        .ok_or_else(|| Error::UnresolvedReferent(phrase.join(" ")))
}

pub const ORDINALS: [&str; 10] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

fn ordinal_index(word: &str) -> Option<usize> {
    ORDINALS.iter().position(|o| *o == word)
}

/// `replace (the)? X with (a)? Y`
fn parse_replace(
    vocab: &ConceptVocabulary,
    c: &[String],
    task: TaskType,
    g: &SceneGraph,
) -> Result<Vec<PatchOp>> {
    let with = c
        .iter()
        .position(|t| t == "with")
        .ok_or_else(|| grammar_error(c, task))?;
    let target = strip_article(&c[with + 1..]);
    if with < 2 || target.len() != 1 {
        return Err(grammar_error(c, task));
    }
    let new_name = concept(vocab, &target[0])?;
    let id = resolve(vocab, &c[1..with], task, g)?;
    Ok(vec![PatchOp::Relabel {
        id,
        name: new_name.to_string(),
    }])
}

/// `make NP Y` (attribute tasks) or `make NP a Y` (relabel, ps_human).
fn parse_make(
    vocab: &ConceptVocabulary,
    c: &[String],
    task: TaskType,
    g: &SceneGraph,
) -> Result<Vec<PatchOp>> {
    if c.len() < 3 {
        return Err(grammar_error(c, task));
    }
    let value = concept(vocab, &c[c.len() - 1])?;
    let group = vocab.group_of(value).expect("known token");
    let relabel = matches!(c[c.len() - 2].as_str(), "a" | "an");
    let np_end = if relabel { c.len() - 2 } else { c.len() - 1 };
    if np_end < 2 {
        return Err(grammar_error(c, task));
    }
    let id = resolve(vocab, &c[1..np_end], task, g)?;
    let node = g.node(id).expect("resolved");
    let slots = task.edit_slots();
    if !slots.contains(&group) {
        return Err(Error::Grammar {
            input: c.join(" "),
            expected: format!("a token from {:?} for {task}", slots),
        });
    }
    if relabel || vocab.group_of(&node.name) == Some(group) {
        Ok(vec![PatchOp::Relabel {
            id,
            name: value.to_string(),
        }])
    } else {
        Ok(vec![PatchOp::SetAttribute {
            id,
            slot: group.to_string(),
            token: value.to_string(),
        }])
    }
}

/// `change (the)? SLOT (of NP)? to (a)? Y`. With `canonical`, only the
/// `change the SLOT of NP to Y` form is accepted, for any slot; returns `None` when the
/// clause is not in that form.
fn parse_change(
    vocab: &ConceptVocabulary,
    c: &[String],
    task: TaskType,
    g: &SceneGraph,
    canonical: bool,
) -> Result<Option<PatchOp>> {
    let Some(to) = c.iter().rposition(|t| t == "to") else {
        return if canonical {
            Ok(None)
        } else {
            Err(grammar_error(c, task))
        };
    };
    let value_words = strip_article(&c[to + 1..]);
    let mut i = 1;
    if c.get(i).map(String::as_str) == Some("the") {
        i += 1;
    }
    let Some(slot) = c.get(i).filter(|_| i < to).cloned() else {
        return if canonical {
            Ok(None)
        } else {
            Err(grammar_error(c, task))
        };
    };
    let of_np = if c.get(i + 1).map(String::as_str) == Some("of") {
        Some(&c[i + 2..to])
    } else if i + 1 == to {
        None
    } else {
        return if canonical {
            Ok(None)
        } else {
            Err(grammar_error(c, task))
        };
    };
    if canonical && (of_np.is_none() || i != 2) {
        return Ok(None);
    }
    if value_words.len() != 1 {
        return Err(grammar_error(c, task));
    }
    if !canonical && !task.edit_slots().contains(&slot.as_str()) {
        return Err(grammar_error(c, task));
    }
    if vocab.group_members(&slot).is_none() {
        return Err(Error::Grammar {
            input: c.join(" "),
            expected: format!("a known slot, got `{slot}`"),
        });
    }
    let value = concept(vocab, &value_words[0])?;
    if vocab.group_of(value) != Some(slot.as_str()) {
        return Err(Error::Grammar {
            input: c.join(" "),
            expected: format!("a `{slot}` token, got `{value}`"),
        });
    }

    let id = match of_np {
        Some(np) if !np.is_empty() => resolve(vocab, np, task, g)?,
        Some(_) => return Err(grammar_error(c, task)),
        None if slot == "background" => g
            .nodes()
            .iter()
            .find(|n| vocab.group_of(&n.name) == Some("background"))
            .map(|n| n.id)
            .ok_or_else(|| Error::UnresolvedReferent("background".into()))?,
        None => g
            .nodes()
            .first()
            .map(|n| n.id)
            .ok_or_else(|| Error::UnresolvedReferent("subject".into()))?,
    };
    let node = g.node(id).expect("resolved");
    if vocab.group_of(&node.name) == Some(slot.as_str()) {
        Ok(Some(PatchOp::Relabel {
            id,
            name: value.to_string(),
        }))
    } else {
        Ok(Some(PatchOp::SetAttribute {
            id,
            slot,
            token: value.to_string(),
        }))
    }
}

/// `add (a)? Y (REL (the)? X)?`
fn parse_add(
    vocab: &ConceptVocabulary,
    c: &[String],
    task: TaskType,
    g: &SceneGraph,
) -> Result<Vec<PatchOp>> {
    let rest = strip_article(&c[1..]);
    let Some((name, tail)) = rest.split_first() else {
        return Err(grammar_error(c, task));
    };
    let name = concept(vocab, name)?;
    let id = g.next_id();
    let mut ops = vec![PatchOp::AddNode {
        node: ObjectNode::new(id, name),
    }];
    if !tail.is_empty() {
        let (rel, np) = if tail.len() >= 2 && tail[0] == "next" && tail[1] == "to" {
            ("next to", &tail[2..])
        } else if RELATIONS.contains(&tail[0].as_str()) && tail[0] != "next" {
            (tail[0].as_str(), &tail[1..])
        } else {
            return Err(grammar_error(c, task));
        };
        let anchor = resolve(vocab, np, task, g)?;
        ops.push(PatchOp::SetRelation {
            edge: Edge(id, rel.to_string(), anchor),
        });
    }
    Ok(ops)
}

/// `change (the)? text ((on|of) (the)? X)? to Y` is recognised and then rejected.
fn parse_text_change(c: &[String], task: TaskType) -> Result<Vec<PatchOp>> {
    let mut i = 1;
    if c.get(i).map(String::as_str) == Some("the") {
        i += 1;
    }
    let well_formed = c[0] == "change"
        && c.get(i).map(String::as_str) == Some("text")
        && c.iter()
            .rposition(|t| t == "to")
            .is_some_and(|to| to > i && to + 1 < c.len());
    if well_formed {
        Err(Error::UnsupportedTask(task))
    } else {
        Err(grammar_error(c, task))
    }
}

/// One positional edit against the source caption. `old` is `None` for an insertion before
/// `position`; `new` is `None` for a deletion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub position: usize,
    pub old: Option<String>,
    pub new: Option<String>,
}

/// Aligns the captions by longest common subsequence and reports each unaligned gap as
/// substitutions followed by pure insertions or deletions.
pub fn token_replacements(src: &[String], tar: &[String]) -> Vec<Replacement> {
    let (n, m) = (src.len(), tar.len());
    // lcs[i][j] = LCS length of src[i..], tar[j..]
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if src[i] == tar[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut gap_del: Vec<usize> = Vec::new();
    let mut gap_ins: Vec<usize> = Vec::new();
    let flush =
        |out: &mut Vec<Replacement>, del: &mut Vec<usize>, ins: &mut Vec<usize>, at: usize| {
            let common = del.len().min(ins.len());
            for k in 0..common {
                out.push(Replacement {
                    position: del[k],
                    old: Some(src[del[k]].clone()),
                    new: Some(tar[ins[k]].clone()),
                });
            }
            for &d in &del[common..] {
                out.push(Replacement {
                    position: d,
                    old: Some(src[d].clone()),
                    new: None,
                });
            }
            for &t in &ins[common..] {
                out.push(Replacement {
                    position: at,
                    old: None,
                    new: Some(tar[t].clone()),
                });
            }
            del.clear();
            ins.clear();
        };
    while i < n || j < m {
        if i < n && j < m && src[i] == tar[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1 {
            flush(&mut out, &mut gap_del, &mut gap_ins, i);
            i += 1;
            j += 1;
        } else if j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j]) {
            gap_ins.push(j);
            j += 1;
        } else {
            gap_del.push(i);
            i += 1;
        }
    }
    flush(&mut out, &mut gap_del, &mut gap_ins, n);
    out
}

/// Applies a replacement list produced by [`token_replacements`] to the source caption.
pub fn apply_replacements(src: &[String], reps: &[Replacement]) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(src.len());
    let mut reps = reps.iter().peekable();
    for pos in 0..=src.len() {
        while let Some(r) = reps.peek().filter(|r| r.position == pos && r.old.is_none()) {
            out.push(
                r.new.clone().ok_or_else(|| {
                    Error::InvalidReplacement(format!("empty replacement at {pos}"))
                })?,
            );
            reps.next();
        }
        if pos == src.len() {
            break;
        }
        match reps.peek() {
            Some(r) if r.position == pos => {
                if r.old.as_deref() != Some(src[pos].as_str()) {
                    return Err(Error::InvalidReplacement(format!(
                        "expected `{}` at {pos}, found {:?}",
                        src[pos], r.old
                    )));
                }
                if let Some(new) = &r.new {
                    out.push(new.clone());
                }
                reps.next();
            }
            _ => out.push(src[pos].clone()),
        }
    }
    if let Some(r) = reps.next() {
        return Err(Error::InvalidReplacement(format!(
            "replacement {r:?} is out of order or out of range"
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditPlan {
    pub task: TaskType,
    pub instruction: String,
    pub graph_src: SceneGraph,
    pub graph_tar: SceneGraph,
    pub caption_src: Vec<String>,
    pub caption_tar: Vec<String>,
    pub replacements: Vec<Replacement>,
    pub patch: GraphPatch,
}

impl EditPlan {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }
}

/// Visual analysis (caption the scene), semantic decomposition and instruction mapping
/// (parse to a patch), then target construction (apply the patch, re-caption, diff).
pub fn build_edit_plan(
    vocab: &ConceptVocabulary,
    g: &SceneGraph,
    q: &str,
    task: TaskType,
) -> Result<EditPlan> {
    let caption_src = caption_from_graph(g, task);
    let patch = parse_instruction(vocab, q, task, g)?;
    let graph_tar = apply_patch(g, &patch)?;
    let caption_tar = caption_from_graph(&graph_tar, task);
    let replacements = token_replacements(&caption_src, &caption_tar);
    debug_assert_eq!(
        apply_replacements(&caption_src, &replacements)
            .ok()
            .as_ref(),
        Some(&caption_tar)
    );
    Ok(EditPlan {
        task,
        instruction: q.to_string(),
        graph_src: g.clone(),
        graph_tar,
        caption_src,
        caption_tar,
        replacements,
        patch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::graph_diff;

    fn vocab() -> ConceptVocabulary {
        ConceptVocabulary::default_world(0)
    }

    fn dog_on_grass() -> SceneGraph {
        SceneGraph::new(
            vec![ObjectNode::new(0, "dog"), ObjectNode::new(1, "grass")],
            vec![Edge(0, "on".into(), 1)],
        )
        .unwrap()
    }

    fn king() -> SceneGraph {
        SceneGraph::new(
            vec![ObjectNode::new(0, "man").with("rank", "royal")],
            vec![],
        )
        .unwrap()
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn replace_subject() {
        let v = vocab();
        let g = dog_on_grass();
        let p = parse_instruction(
            &v,
            "replace the dog with a cat",
            TaskType::SubjectReplace,
            &g,
        )
        .unwrap();
        assert_eq!(
            p.ops,
            vec![PatchOp::Relabel {
                id: 0,
                name: "cat".into()
            }]
        );
        let tar = apply_patch(&g, &p).unwrap();
        assert_eq!(graph_diff(&g, &tar), p);
    }

    #[test]
    fn make_color() {
        let v = vocab();
        let g = SceneGraph::new(
            vec![ObjectNode::new(0, "dog").with("color", "brown")],
            vec![],
        )
        .unwrap();
        let p = parse_instruction(&v, "make the dog blue", TaskType::ColorAlter, &g).unwrap();
        assert_eq!(
            p.ops,
            vec![PatchOp::SetAttribute {
                id: 0,
                slot: "color".into(),
                token: "blue".into()
            }]
        );
        let tar = apply_patch(&g, &p).unwrap();
        assert_eq!(graph_diff(&g, &tar), p);
    }

    #[test]
    fn missing_referent() {
        let v = vocab();
        assert!(matches!(
            parse_instruction(
                &v,
                "replace the cat with a dog",
                TaskType::SubjectReplace,
                &dog_on_grass()
            ),
            Err(Error::UnresolvedReferent(_))
        ));
    }

    #[test]
    fn grammar_and_vocabulary_errors() {
        let v = vocab();
        let g = dog_on_grass();
        assert!(matches!(
            parse_instruction(&v, "paint everything", TaskType::ColorAlter, &g),
            Err(Error::Grammar { .. })
        ));
        assert!(matches!(
            parse_instruction(
                &v,
                "replace the dog with a unicorn",
                TaskType::SubjectReplace,
                &g
            ),
            Err(Error::UnknownToken(_))
        ));
        // color token where a material is required
        assert!(matches!(
            parse_instruction(&v, "make the dog blue", TaskType::MaterialAlter, &g),
            Err(Error::Grammar { .. })
        ));
        assert!(matches!(
            parse_instruction(&v, "change the style to sketch", TaskType::ColorAlter, &g),
            Err(Error::Grammar { .. })
        ));
    }

    #[test]
    fn text_change_is_rejected_as_unsupported() {
        let v = vocab();
        let g = dog_on_grass();
        assert!(matches!(
            parse_instruction(&v, "change the text to hello", TaskType::TextChange, &g),
            Err(Error::UnsupportedTask(TaskType::TextChange))
        ));
        assert!(matches!(
            parse_instruction(&v, "scribble", TaskType::TextChange, &g),
            Err(Error::Grammar { .. })
        ));
    }

    #[test]
    fn king_to_queen_plan() {
        let v = vocab();
        let plan = build_edit_plan(&v, &king(), "make it a woman", TaskType::PsHuman).unwrap();
        assert_eq!(plan.caption_src, words("a royal man"));
        assert_eq!(plan.caption_tar, words("a royal woman"));
        assert_eq!(
            plan.replacements,
            vec![Replacement {
                position: 2,
                old: Some("man".into()),
                new: Some("woman".into())
            }]
        );
    }

    #[test]
    fn identity_edit_plan() {
        let v = vocab();
        let g = SceneGraph::new(
            vec![ObjectNode::new(0, "dog").with("color", "brown")],
            vec![],
        )
        .unwrap();
        let plan =
            build_edit_plan(&v, &g, "make the brown dog brown", TaskType::ColorAlter).unwrap();
        assert!(plan.patch.is_empty());
        assert!(graph_diff(&plan.graph_src, &plan.graph_tar).is_empty());
        assert_eq!(plan.caption_src, plan.caption_tar);
        assert!(plan.replacements.is_empty());
    }

    #[test]
    fn subject_add_is_pure_insertion() {
        let v = vocab();
        let g = dog_on_grass();
        let plan = build_edit_plan(&v, &g, "add a hat on the dog", TaskType::SubjectAdd).unwrap();
        assert_eq!(plan.patch.ops.len(), 2);
        assert!(matches!(&plan.patch.ops[0], PatchOp::AddNode { node } if node.name == "hat"));
        assert!(plan.replacements.iter().all(|r| r.old.is_none()));
        assert_eq!(
            plan.replacements.len(),
            plan.caption_tar.len() - plan.caption_src.len()
        );
        assert_eq!(
            apply_replacements(&plan.caption_src, &plan.replacements).unwrap(),
            plan.caption_tar
        );
        let plan = build_edit_plan(&v, &g, "add a ball", TaskType::SubjectAdd).unwrap();
        assert_eq!(
            plan.caption_tar,
            words("a dog . a grass . a ball . dog on grass")
        );
    }

    #[test]
    fn composite_instruction() {
        let v = vocab();
        let g = dog_on_grass();
        let p = parse_instruction(
            &v,
            "replace the dog with a cat and change the color of cat to red",
            TaskType::SubjectReplace,
            &g,
        )
        .unwrap();
        assert_eq!(p.ops.len(), 2);
        let out = apply_patch(&g, &p).unwrap();
        assert_eq!(out.node(0).unwrap().attributes["color"], "red");
    }

    #[test]
    fn background_and_style_forms() {
        let v = vocab();
        let g = dog_on_grass();
        let p = parse_instruction(
            &v,
            "change the background to beach",
            TaskType::BackgroundChange,
            &g,
        )
        .unwrap();
        assert_eq!(
            p.ops,
            vec![PatchOp::Relabel {
                id: 1,
                name: "beach".into()
            }]
        );
        let p = parse_instruction(&v, "change style to sketch", TaskType::StyleChange, &g).unwrap();
        assert_eq!(
            p.ops,
            vec![PatchOp::SetAttribute {
                id: 0,
                slot: "style".into(),
                token: "sketch".into()
            }]
        );
        let p = parse_instruction(
            &v,
            "change the pose of dog to running",
            TaskType::MotionChange,
            &g,
        )
        .unwrap();
        assert_eq!(p.ops.len(), 1);
    }

    #[test]
    fn remove_subject() {
        let v = vocab();
        let g = dog_on_grass();
        let plan = build_edit_plan(&v, &g, "remove the dog", TaskType::SubjectRemove).unwrap();
        assert_eq!(plan.caption_tar, words("a grass"));
        assert!(plan.replacements.iter().all(|r| r.new.is_none()));
    }

    #[test]
    fn replacements_round_trip_on_mixed_edit() {
        let a = words("a red dog . a grass . dog on grass");
        let b = words("a blue cat . a grass . cat on grass . a hat");
        let reps = token_replacements(&a, &b);
        assert_eq!(apply_replacements(&a, &reps).unwrap(), b);
    }
}
