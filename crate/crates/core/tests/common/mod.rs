// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use uniedit::instruction_parser::TaskType;
use uniedit::scene_graph::{Edge, ObjectNode, SceneGraph};

pub const OBJECTS: &[&str] = &["dog", "cat", "hat", "ball", "bird", "car"];
pub const BACKGROUNDS: &[&str] = &["grass", "beach", "street", "forest"];
pub const PEOPLE: &[&str] = &["man", "woman"];
pub const RELATIONS: &[&str] = &["on", "under", "beside", "behind", "next to"];

pub fn slot_tokens(slot: &str) -> &'static [&'static str] {
    match slot {
        "color" => &["red", "blue", "brown", "white"],
        "material" => &["wood", "metal", "glass", "fabric"],
        "pose" => &["standing", "sitting", "running"],
        "style" => &["photo", "sketch", "painting"],
        "tone" => &["neutral", "warm", "cool"],
        "rank" => &["royal", "common"],
        _ => panic!("no slot {slot}"),
    }
}

pub const TASKS: [TaskType; 10] = [
    TaskType::SubjectReplace,
    TaskType::ColorAlter,
    TaskType::MaterialAlter,
    TaskType::MotionChange,
    TaskType::StyleChange,
    TaskType::ToneTransfer,
    TaskType::BackgroundChange,
    TaskType::PsHuman,
    TaskType::SubjectAdd,
    TaskType::SubjectRemove,
];

fn default_token(slot: &str) -> &'static str {
    match slot {
        "color" => "white",
        "material" => "fabric",
        "pose" => "standing",
        "style" => "photo",
        "tone" => "neutral",
        _ => panic!("no default for {slot}"),
    }
}

/// Random scene with distinct node names. A person leads when `person` is set and a
/// background node is present when `background` is set.
pub fn random_scene(rng: &mut ChaCha8Rng, person: bool, background: bool) -> SceneGraph {
    let mut names: Vec<&str> = Vec::new();
    if person {
        names.push(PEOPLE.choose(rng).unwrap());
    }
    let mut objs = OBJECTS.to_vec();
    objs.shuffle(rng);
    let n_obj = rng.random_range(if person { 0..=2 } else { 1..=3 });
    names.extend(objs.into_iter().take(n_obj));
    let mut nodes = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let mut n = ObjectNode::new(i as u32, *name);
        for slot in ["color", "material", "pose", "style", "tone"] {
            if rng.random_bool(0.4) {
                n = n.with(slot, *slot_tokens(slot).choose(rng).unwrap());
            }
        }
        if PEOPLE.contains(name) {
            n = n.with("rank", *slot_tokens("rank").choose(rng).unwrap());
        }
        nodes.push(n);
    }
    let mut edges = Vec::new();
    let k = nodes.len() as u32;
    if background {
        nodes.push(ObjectNode::new(k, *BACKGROUNDS.choose(rng).unwrap()));
        for i in 0..k {
            if rng.random_bool(0.6) {
                edges.push(Edge(i, "on".into(), k));
            }
        }
    }
    if k >= 2 && rng.random_bool(0.5) {
        edges.push(Edge(1, RELATIONS.choose(rng).unwrap().to_string(), 0));
    }
    SceneGraph::new(nodes, edges).unwrap()
}

fn effective(n: &ObjectNode, slot: &str) -> String {
    n.attributes
        .get(slot)
        .cloned()
        .unwrap_or_else(|| default_token(slot).to_string())
}

fn other_than<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], current: &str) -> &'a str {
    let rest: Vec<&str> = pool.iter().copied().filter(|t| *t != current).collect();
    rest.choose(rng).unwrap()
}

fn attribute_clause(
    rng: &mut ChaCha8Rng,
    g: &SceneGraph,
    node: usize,
    slot: &str,
    make_form: bool,
) -> String {
    let n = &g.nodes()[node];
    let new = other_than(rng, slot_tokens(slot), &effective(n, slot));
    if make_form {
        format!("make the {} {new}", n.name)
    } else {
        format!("change the {slot} of {} to {new}", n.name)
    }
}

/// A random scene plus an instruction that parses under `task`.
/// `composite` allows a second clause joined with `and`.
pub fn random_case(rng: &mut ChaCha8Rng, task: TaskType, composite: bool) -> (SceneGraph, String) {
    let person = task == TaskType::PsHuman;
    let background = matches!(task, TaskType::BackgroundChange | TaskType::SubjectRemove)
        || rng.random_bool(0.5);
    let g = random_scene(rng, person, background);
    let objects: Vec<usize> = g
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| !BACKGROUNDS.contains(&n.name.as_str()))
        .map(|(i, _)| i)
        .collect();
    let pick = |rng: &mut ChaCha8Rng| *objects.choose(rng).unwrap();
    let names: Vec<&str> = g.nodes().iter().map(|n| n.name.as_str()).collect();
    let q = match task {
        TaskType::SubjectReplace => {
            let i = pick(rng);
            let cur = &g.nodes()[i].name;
            let pool: Vec<&str> = if PEOPLE.contains(&cur.as_str()) {
                PEOPLE
            } else {
                OBJECTS
            }
            .iter()
            .copied()
            .filter(|t| !names.contains(t))
            .collect();
            format!("replace the {cur} with a {}", pool.choose(rng).unwrap())
        }
        TaskType::ColorAlter | TaskType::MaterialAlter | TaskType::MotionChange => {
            let slot = match task {
                TaskType::ColorAlter => "color",
                TaskType::MaterialAlter => "material",
                _ => "pose",
            };
            let i = pick(rng);
            let make_form = rng.random_bool(0.5);
            let first = attribute_clause(rng, &g, i, slot, make_form);
            let second: Vec<usize> = objects.iter().copied().filter(|j| *j != i).collect();
            if composite && !second.is_empty() && rng.random_bool(0.3) {
                let j = *second.choose(rng).unwrap();
                format!("{first} and {}", attribute_clause(rng, &g, j, slot, false))
            } else {
                first
            }
        }
        TaskType::StyleChange | TaskType::ToneTransfer => {
            let slot = if task == TaskType::StyleChange {
                "style"
            } else {
                "tone"
            };
            if rng.random_bool(0.5) {
                let new = other_than(rng, slot_tokens(slot), &effective(&g.nodes()[0], slot));
                format!("change the {slot} to {new}")
            } else {
                let i = pick(rng);
                attribute_clause(rng, &g, i, slot, false)
            }
        }
        TaskType::BackgroundChange => {
            let bg = g
                .nodes()
                .iter()
                .find(|n| BACKGROUNDS.contains(&n.name.as_str()))
                .unwrap();
            format!(
                "change background to {}",
                other_than(rng, BACKGROUNDS, &bg.name)
            )
        }
        TaskType::PsHuman => {
            let p = &g.nodes()[0];
            let other_person = if p.name == "man" { "woman" } else { "man" };
            let other_rank = if p.attributes["rank"] == "royal" {
                "common"
            } else {
                "royal"
            };
            match rng.random_range(0..4) {
                0 => format!("make it a {other_person}"),
                1 => format!("make the {} a {other_person}", p.name),
                2 => format!("make the {} {other_rank}", p.name),
                _ => format!("change the rank of {} to {other_rank}", p.name),
            }
        }
        TaskType::SubjectAdd => {
            let pool: Vec<&str> = OBJECTS
                .iter()
                .copied()
                .filter(|t| !names.contains(t))
                .collect();
            let new = pool.choose(rng).unwrap();
            if rng.random_bool(0.5) {
                let anchor = &g.nodes()[pick(rng)].name;
                format!(
                    "add a {new} {} the {anchor}",
                    RELATIONS.choose(rng).unwrap()
                )
            } else {
                format!("add a {new}")
            }
        }
        TaskType::SubjectRemove => {
            let i = rng.random_range(0..g.nodes().len());
            format!("remove the {}", g.nodes()[i].name)
        }
        TaskType::TextChange => unreachable!("text_change has no editable form"),
    };
    (g, q)
}

/// Levenshtein distance over tokens.
pub fn levenshtein(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}
