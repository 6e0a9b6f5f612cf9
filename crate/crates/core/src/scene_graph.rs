// SPDX-License-Identifier: Apache-2.0

//! Scene graphs, caption templating and graph patches.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instruction_parser::TaskType;

pub type NodeId = u32;

/// Canonical slot order: color < material < pose < style < everything else (alphabetical).
pub fn slot_order_key(slot: &str) -> (u8, &str) {
    let rank = match slot {
        "color" => 0,
        "material" => 1,
        "pose" => 2,
        "style" => 3,
        _ => 4,
    };
    (rank, slot)
}

/// Token used for a task-required slot the scene leaves unset.
pub fn default_slot_token(slot: &str) -> Option<&'static str> {
    match slot {
        "color" => Some("white"),
        "material" => Some("fabric"),
        "pose" => Some("standing"),
        "style" => Some("photo"),
        "tone" => Some("neutral"),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: NodeId,
    pub name: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl ObjectNode {
    pub fn new(id: NodeId, name: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with(mut self, slot: impl Into<String>, token: impl Into<String>) -> Self {
        self.attributes.insert(slot.into(), token.into());
        self
    }

    /// Attribute values in canonical slot order.
    pub fn ordered_attributes(&self) -> Vec<(&str, &str)> {
        let mut attrs: Vec<(&str, &str)> = self
            .attributes
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        attrs.sort_by(|a, b| slot_order_key(a.0).cmp(&slot_order_key(b.0)));
        attrs
    }
}

/// `(subject, relation, object)`; serialized as a three-element array.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(pub NodeId, pub String, pub NodeId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSceneGraph", into = "RawSceneGraph")]
pub struct SceneGraph {
    nodes: Vec<ObjectNode>,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct RawSceneGraph {
    nodes: Vec<ObjectNode>,
    #[serde(default)]
    edges: Vec<Edge>,
}

impl TryFrom<RawSceneGraph> for SceneGraph {
    type Error = Error;

    fn try_from(raw: RawSceneGraph) -> Result<Self> {
        SceneGraph::new(raw.nodes, raw.edges)
    }
}

impl From<SceneGraph> for RawSceneGraph {
    fn from(g: SceneGraph) -> Self {
        RawSceneGraph {
            nodes: g.nodes,
            edges: g.edges,
        }
    }
}

impl SceneGraph {
    pub fn new(nodes: Vec<ObjectNode>, edges: Vec<Edge>) -> Result<Self> {
        let g = Self { nodes, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(Error::InvalidGraph(format!("duplicate node id {}", n.id)));
            }
            if n.name.is_empty() || n.name.contains(char::is_whitespace) {
                return Err(Error::InvalidGraph(format!(
                    "node {} has an invalid name `{}`",
                    n.id, n.name
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if !ids.contains(&e.0) || !ids.contains(&e.2) {
                return Err(Error::InvalidGraph(format!(
                    "edge {e:?} references a missing node"
                )));
            }
            if e.0 == e.2 {
                return Err(Error::InvalidGraph(format!("self-loop edge {e:?}")));
            }
            if e.1.trim().is_empty() {
                return Err(Error::InvalidGraph(format!(
                    "edge {e:?} has an empty relation"
                )));
            }
            if !seen.insert(e) {
                return Err(Error::InvalidGraph(format!("duplicate edge {e:?}")));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[ObjectNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Option<&ObjectNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    fn node_mut(&mut self, id: NodeId) -> Option<&mut ObjectNode> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn next_id(&self) -> NodeId {
        self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0)
    }

    /// Copy with every slot the task requires filled by its default token when unset.
    pub fn with_task_defaults(&self, task: TaskType) -> SceneGraph {
        let mut g = self.clone();
        for slot in task.required_slots() {
            let Some(token) = default_slot_token(slot) else {
                continue;
            };
            for n in &mut g.nodes {
                n.attributes
                    .entry(slot.to_string())
                    .or_insert_with(|| token.to_string());
            }
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("scene graph", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// Structural equality up to node-id renaming (node order is ignored).
    pub fn equivalent(&self, other: &SceneGraph) -> bool {
        if self.nodes.len() != other.nodes.len() || self.edges.len() != other.edges.len() {
            return false;
        }
        let mut mapping: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut used = BTreeSet::new();
        self.match_from(other, 0, &mut mapping, &mut used)
    }

    fn match_from(
        &self,
        other: &SceneGraph,
        i: usize,
        mapping: &mut BTreeMap<NodeId, NodeId>,
        used: &mut BTreeSet<NodeId>,
    ) -> bool {
        if i == self.nodes.len() {
            let mapped: BTreeSet<Edge> = self
                .edges
                .iter()
                .map(|e| Edge(mapping[&e.0], e.1.clone(), mapping[&e.2]))
                .collect();
            let theirs: BTreeSet<Edge> = other.edges.iter().cloned().collect();
            return mapped == theirs;
        }
        let a = &self.nodes[i];
        for b in &other.nodes {
            if used.contains(&b.id) || a.name != b.name || a.attributes != b.attributes {
                continue;
            }
            mapping.insert(a.id, b.id);
            used.insert(b.id);
            if self.match_from(other, i + 1, mapping, used) {
                return true;
            }
            mapping.remove(&a.id);
            used.remove(&b.id);
        }
        false
    }
}

/// Per-node phrase `a [attrs..] name` in node order, then `subj relation obj`, joined by `.`.
/// Task-required slots are emitted with their default token when the node leaves them unset.
pub fn caption_from_graph(g: &SceneGraph, task: TaskType) -> Vec<String> {
    graph_caption(&g.with_task_defaults(task))
}

/// Caption of `g` exactly as it stands, without task defaults.
pub fn graph_caption(g: &SceneGraph) -> Vec<String> {
    let mut phrases: Vec<Vec<String>> = Vec::new();
    for n in &g.nodes {
        let mut p = vec!["a".to_string()];
        p.extend(
            n.ordered_attributes()
                .into_iter()
                .map(|(_, v)| v.to_string()),
        );
        p.push(n.name.clone());
        phrases.push(p);
    }
    for e in &g.edges {
        let subj = g.node(e.0).expect("validated edge");
        let obj = g.node(e.2).expect("validated edge");
        let mut p = vec![subj.name.clone()];
        p.extend(e.1.split_whitespace().map(str::to_string));
        p.push(obj.name.clone());
        phrases.push(p);
    }
    let mut out = Vec::new();
    for (i, p) in phrases.into_iter().enumerate() {
        if i > 0 {
            out.push(".".to_string());
        }
        out.extend(p);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PatchOp {
    AddNode {
        node: ObjectNode,
    },
    RemoveNode {
        id: NodeId,
    },
    Relabel {
        id: NodeId,
        name: String,
    },
    SetAttribute {
        id: NodeId,
        slot: String,
        token: String,
    },
    ClearAttribute {
        id: NodeId,
        slot: String,
    },
    SetRelation {
        edge: Edge,
    },
    RemoveRelation {
        edge: Edge,
    },
}

impl PatchOp {
    /// Node ids this op touches.
    pub fn touched(&self) -> Vec<NodeId> {
        match self {
            PatchOp::AddNode { node } => vec![node.id],
            PatchOp::RemoveNode { id }
            | PatchOp::Relabel { id, .. }
            | PatchOp::SetAttribute { id, .. }
            | PatchOp::ClearAttribute { id, .. } => vec![*id],
            PatchOp::SetRelation { edge } | PatchOp::RemoveRelation { edge } => {
                vec![edge.0, edge.2]
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphPatch {
    pub ops: Vec<PatchOp>,
}

impl GraphPatch {
    pub fn new(ops: Vec<PatchOp>) -> Self {
        Self { ops }
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }
}

/// Applies `patch` to a copy of `g`. Removing a node drops its incident edges.
pub fn apply_patch(g: &SceneGraph, patch: &GraphPatch) -> Result<SceneGraph> {
    let mut out = g.clone();
    for (index, op) in patch.ops.iter().enumerate() {
        apply_op(&mut out, op).map_err(|reason| Error::InapplicableOp { index, reason })?;
    }
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

fn apply_op(g: &mut SceneGraph, op: &PatchOp) -> std::result::Result<(), String> {
    let missing = |id: NodeId| format!("node {id} does not exist");
    match op {
        PatchOp::AddNode { node } => {
            if g.node(node.id).is_some() {
                return Err(format!("node {} already exists", node.id));
            }
            if node.name.is_empty() || node.name.contains(char::is_whitespace) {
                return Err(format!("invalid node name `{}`", node.name));
            }
            g.nodes.push(node.clone());
        }
        PatchOp::RemoveNode { id } => {
            let pos = g
                .nodes
                .iter()
                .position(|n| n.id == *id)
                .ok_or_else(|| missing(*id))?;
            g.nodes.remove(pos);
            g.edges.retain(|e| e.0 != *id && e.2 != *id);
        }
        PatchOp::Relabel { id, name } => {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(format!("invalid node name `{name}`"));
            }
            g.node_mut(*id).ok_or_else(|| missing(*id))?.name = name.clone();
        }
        PatchOp::SetAttribute { id, slot, token } => {
            g.node_mut(*id)
                .ok_or_else(|| missing(*id))?
                .attributes
                .insert(slot.clone(), token.clone());
        }
        PatchOp::ClearAttribute { id, slot } => {
            let n = g.node_mut(*id).ok_or_else(|| missing(*id))?;
            if n.attributes.remove(slot).is_none() {
                return Err(format!("node {id} has no `{slot}` attribute"));
            }
        }
        PatchOp::SetRelation { edge } => {
            if g.node(edge.0).is_none() {
                return Err(missing(edge.0));
            }
            if g.node(edge.2).is_none() {
                return Err(missing(edge.2));
            }
            if edge.0 == edge.2 {
                return Err("self-loop edge".into());
            }
            if edge.1.trim().is_empty() {
                return Err("empty relation".into());
            }
            if g.edges.contains(edge) {
                return Err(format!("edge {edge:?} already exists"));
            }
            g.edges.push(edge.clone());
        }
        PatchOp::RemoveRelation { edge } => {
            let pos = g
                .edges
                .iter()
                .position(|e| e == edge)
                .ok_or_else(|| format!("edge {edge:?} does not exist"))?;
            g.edges.remove(pos);
        }
    }
    Ok(())
}

fn attribute_ops(id: NodeId, from: &ObjectNode, to: &ObjectNode) -> Vec<PatchOp> {
    let mut slots: Vec<&String> = from.attributes.keys().chain(to.attributes.keys()).collect();
    slots.sort_by(|a, b| slot_order_key(a).cmp(&slot_order_key(b)));
    slots.dedup();
    let mut ops = Vec::new();
    for slot in slots {
        match (from.attributes.get(slot), to.attributes.get(slot)) {
            (Some(a), Some(b)) if a == b => {}
            (_, Some(b)) => ops.push(PatchOp::SetAttribute {
                id,
                slot: slot.clone(),
                token: b.clone(),
            }),
            (Some(_), None) => ops.push(PatchOp::ClearAttribute {
                id,
                slot: slot.clone(),
            }),
            (None, None) => {}
        }
    }
    ops
}

fn attribute_overlap(a: &ObjectNode, b: &ObjectNode) -> usize {
    a.attributes
        .iter()
        .filter(|(k, v)| b.attributes.get(*k) == Some(*v))
        .count()
}

fn attribute_distance(a: &ObjectNode, b: &ObjectNode) -> usize {
    attribute_ops(a.id, a, b).len()
}

/// Patch turning `src` into a graph equivalent to `tar`.
///
/// Target nodes are matched greedily to source nodes of the same name (most shared
/// attributes first, ties by node order); leftovers are paired by relabeling when that
/// is cheaper than remove + add.
pub fn graph_diff(src: &SceneGraph, tar: &SceneGraph) -> GraphPatch {
    // tar index -> src index
    let mut matched: Vec<Option<usize>> = vec![None; tar.nodes.len()];
    let mut src_used = vec![false; src.nodes.len()];

    for (ti, t) in tar.nodes.iter().enumerate() {
        let best = src
            .nodes
            .iter()
            .enumerate()
            .filter(|(si, s)| !src_used[*si] && s.name == t.name)
            .max_by(|(ai, a), (bi, b)| {
                attribute_overlap(a, t)
                    .cmp(&attribute_overlap(b, t))
                    .then(bi.cmp(ai))
            })
            .map(|(si, _)| si);
        if let Some(si) = best {
            matched[ti] = Some(si);
            src_used[si] = true;
        }
    }

    let tar_edges: BTreeSet<(usize, &str, usize)> = tar
        .edges
        .iter()
        .map(|e| (index_of(tar, e.0), e.1.as_str(), index_of(tar, e.2)))
        .collect();
    let src_edges: Vec<(usize, &str, usize)> = src
        .edges
        .iter()
        .map(|e| (index_of(src, e.0), e.1.as_str(), index_of(src, e.2)))
        .collect();

    for ti in 0..tar.nodes.len() {
        if matched[ti].is_some() {
            continue;
        }
        let t = &tar.nodes[ti];
        let tar_incident = tar_edges.iter().filter(|e| e.0 == ti || e.2 == ti).count();
        let separate_cost = 2 + tar_incident;
        let mut best: Option<(usize, usize)> = None;
        for (si, s) in src.nodes.iter().enumerate() {
            if src_used[si] {
                continue;
            }
            // edges of s that survive under the current matching if s -> ti
            let mut trial = matched.clone();
            trial[ti] = Some(si);
            let src_to_tar = invert(&trial, src.nodes.len());
            let kept = src_edges
                .iter()
                .filter(|e| e.0 == si || e.2 == si)
                .filter(|e| match (src_to_tar[e.0], src_to_tar[e.2]) {
                    (Some(a), Some(b)) => tar_edges.contains(&(a, e.1, b)),
                    _ => false,
                })
                .count();
            let src_incident = src_edges.iter().filter(|e| e.0 == si || e.2 == si).count();
            let cost = 1 + attribute_distance(s, t) + (src_incident - kept) + (tar_incident - kept);
            if best.is_none_or(|(_, c)| cost < c) {
                best = Some((si, cost));
            }
        }
        if let Some((si, cost)) = best {
            if cost < separate_cost {
                matched[ti] = Some(si);
                src_used[si] = true;
            }
        }
    }

    let src_to_tar = invert(&matched, src.nodes.len());
    let mut ops = Vec::new();

    // relations between surviving nodes that the target lacks
    for (e, idx) in src.edges.iter().zip(&src_edges) {
        if let (Some(a), Some(b)) = (src_to_tar[idx.0], src_to_tar[idx.2]) {
            if !tar_edges.contains(&(a, idx.1, b)) {
                ops.push(PatchOp::RemoveRelation { edge: e.clone() });
            }
        }
    }
    for (si, s) in src.nodes.iter().enumerate() {
        if src_to_tar[si].is_none() {
            ops.push(PatchOp::RemoveNode { id: s.id });
        }
    }
    for (ti, t) in tar.nodes.iter().enumerate() {
        if let Some(si) = matched[ti] {
            let s = &src.nodes[si];
            if s.name != t.name {
                ops.push(PatchOp::Relabel {
                    id: s.id,
                    name: t.name.clone(),
                });
            }
            ops.extend(attribute_ops(s.id, s, t));
        }
    }

    // ids for added nodes: keep the target id when it is free
    let mut taken: BTreeSet<NodeId> = src.nodes.iter().map(|n| n.id).collect();
    let mut fresh = src.next_id().max(tar.next_id());
    let mut final_id: Vec<NodeId> = vec![0; tar.nodes.len()];
    for (ti, t) in tar.nodes.iter().enumerate() {
        match matched[ti] {
            Some(si) => final_id[ti] = src.nodes[si].id,
            None => {
                let id = if taken.contains(&t.id) {
                    while taken.contains(&fresh) {
                        fresh += 1;
                    }
                    fresh
                } else {
                    t.id
                };
                taken.insert(id);
                final_id[ti] = id;
                ops.push(PatchOp::AddNode {
                    node: ObjectNode {
                        id,
                        name: t.name.clone(),
                        attributes: t.attributes.clone(),
                    },
                });
            }
        }
    }

    let src_present: BTreeSet<(usize, &str, usize)> = src_edges
        .iter()
        .filter_map(|e| match (src_to_tar[e.0], src_to_tar[e.2]) {
            (Some(a), Some(b)) => Some((a, e.1, b)),
            _ => None,
        })
        .collect();
    for e in &tar.edges {
        let key = (index_of(tar, e.0), e.1.as_str(), index_of(tar, e.2));
        if !src_present.contains(&key) {
            ops.push(PatchOp::SetRelation {
                edge: Edge(final_id[key.0], e.1.clone(), final_id[key.2]),
            });
        }
    }

    GraphPatch { ops }
}

fn index_of(g: &SceneGraph, id: NodeId) -> usize {
    g.nodes
        .iter()
        .position(|n| n.id == id)
        .expect("validated edge endpoint")
}

fn invert(matched: &[Option<usize>], src_len: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; src_len];
    for (ti, m) in matched.iter().enumerate() {
        if let Some(si) = m {
            out[*si] = Some(ti);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dog_on_grass() -> SceneGraph {
        SceneGraph::new(
            vec![ObjectNode::new(0, "dog"), ObjectNode::new(1, "grass")],
            vec![Edge(0, "on".into(), 1)],
        )
        .unwrap()
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn caption_templates() {
        let g = SceneGraph::new(
            vec![ObjectNode::new(0, "dog").with("color", "brown")],
            vec![],
        )
        .unwrap();
        assert_eq!(
            caption_from_graph(&g, TaskType::ColorAlter),
            words("a brown dog")
        );

        let g = dog_on_grass();
        assert_eq!(
            caption_from_graph(&g, TaskType::SubjectReplace),
            words("a dog . a grass . dog on grass")
        );
        assert_eq!(
            caption_from_graph(&g, TaskType::SubjectReplace),
            caption_from_graph(&g, TaskType::SubjectReplace)
        );
    }

    #[test]
    fn caption_orders_slots_and_fills_required_defaults() {
        let g = SceneGraph::new(
            vec![ObjectNode::new(0, "man")
                .with("rank", "royal")
                .with("pose", "sitting")
                .with("color", "red")],
            vec![],
        )
        .unwrap();
        assert_eq!(
            caption_from_graph(&g, TaskType::PsHuman),
            words("a red sitting royal man")
        );
        let plain = SceneGraph::new(vec![ObjectNode::new(0, "dog")], vec![]).unwrap();
        assert_eq!(
            caption_from_graph(&plain, TaskType::ColorAlter),
            words("a white dog")
        );
        assert_eq!(
            caption_from_graph(&plain, TaskType::SubjectAdd),
            words("a dog")
        );
    }

    #[test]
    fn relabel_preserves_edges() {
        let g = dog_on_grass();
        let p = GraphPatch::new(vec![PatchOp::Relabel {
            id: 0,
            name: "cat".into(),
        }]);
        let out = apply_patch(&g, &p).unwrap();
        assert_eq!(out.node(0).unwrap().name, "cat");
        assert_eq!(out.edges(), g.edges());
        assert_eq!(g.node(0).unwrap().name, "dog");
    }

    #[test]
    fn empty_patch_is_identity() {
        let g = dog_on_grass();
        assert_eq!(apply_patch(&g, &GraphPatch::default()).unwrap(), g);
    }

    #[test]
    fn inapplicable_op_reports_index() {
        let g = dog_on_grass();
        let p = GraphPatch::new(vec![
            PatchOp::Relabel {
                id: 0,
                name: "cat".into(),
            },
            PatchOp::RemoveNode { id: 9 },
        ]);
        match apply_patch(&g, &p) {
            Err(Error::InapplicableOp { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn remove_node_drops_incident_edges() {
        let g = dog_on_grass();
        let out = apply_patch(&g, &GraphPatch::new(vec![PatchOp::RemoveNode { id: 1 }])).unwrap();
        assert!(out.edges().is_empty());
        assert_eq!(out.nodes().len(), 1);
    }

    #[test]
    fn invalid_graphs_are_rejected() {
        assert!(SceneGraph::new(
            vec![ObjectNode::new(0, "dog"), ObjectNode::new(0, "cat")],
            vec![]
        )
        .is_err());
        assert!(SceneGraph::new(
            vec![ObjectNode::new(0, "dog")],
            vec![Edge(0, "on".into(), 0)]
        )
        .is_err());
        assert!(SceneGraph::new(
            vec![ObjectNode::new(0, "dog")],
            vec![Edge(0, "on".into(), 3)]
        )
        .is_err());
        assert!(
            SceneGraph::from_json(r#"{"nodes":[{"id":0,"name":"dog"}],"edges":[[0,"on",1]]}"#)
                .is_err()
        );
    }

    #[test]
    fn diff_examples() {
        let g = dog_on_grass();
        assert!(graph_diff(&g, &g).is_empty());

        let brown = SceneGraph::new(
            vec![
                ObjectNode::new(0, "dog").with("color", "brown"),
                ObjectNode::new(1, "grass"),
            ],
            g.edges().to_vec(),
        )
        .unwrap();
        let blue = SceneGraph::new(
            vec![
                ObjectNode::new(0, "dog").with("color", "blue"),
                ObjectNode::new(1, "grass"),
            ],
            g.edges().to_vec(),
        )
        .unwrap();
        assert_eq!(
            graph_diff(&brown, &blue).ops,
            vec![PatchOp::SetAttribute {
                id: 0,
                slot: "color".into(),
                token: "blue".into()
            }]
        );

        let mut nodes = g.nodes().to_vec();
        nodes.push(ObjectNode::new(2, "hat"));
        let bigger = SceneGraph::new(
            nodes,
            vec![Edge(0, "on".into(), 1), Edge(2, "on".into(), 0)],
        )
        .unwrap();
        assert_eq!(
            graph_diff(&bigger, &g).ops,
            vec![PatchOp::RemoveNode { id: 2 }]
        );
    }

    #[test]
    fn diff_round_trip_with_renamed_ids() {
        let src = dog_on_grass();
        let tar = SceneGraph::new(
            vec![
                ObjectNode::new(5, "cat"),
                ObjectNode::new(7, "grass"),
                ObjectNode::new(0, "hat"),
            ],
            vec![Edge(5, "on".into(), 7), Edge(0, "on".into(), 5)],
        )
        .unwrap();
        let p = graph_diff(&src, &tar);
        assert!(apply_patch(&src, &p).unwrap().equivalent(&tar));
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn json_round_trip() {
        let g = dog_on_grass();
        let text = g.to_json();
        assert!(text.contains(r#""on""#));
        assert_eq!(SceneGraph::from_json(&text).unwrap(), g);
    }
}
