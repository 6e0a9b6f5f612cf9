// SPDX-License-Identifier: Apache-2.0

//! The shared vision-language latent space.
//!
//! Every concept belongs to exactly one axis group ("gender", "rank", "color", ...).
//! Each group owns a disjoint block of coordinates, and members of a group are
//! orthonormalised inside that block, so different groups are exactly orthogonal
//! and members of one group are orthogonal as long as the block is wide enough.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_DIMENSION: usize = 32;

/// Filler words skipped when embedding a caption.
pub const STOP_WORDS: &[&str] = &[
    ".", "a", "an", "the", "of", "on", "in", "under", "next", "to", "beside", "behind", "with",
    "and", "it", "portrait", "picture", "image", "scene",
];

pub fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.contains(&token)
}

/// Axis groups of the default world.
pub fn default_axes() -> BTreeMap<String, Vec<String>> {
    let groups: &[(&str, &[&str])] = &[
        ("background", &["grass", "beach", "street", "forest"]),
        ("color", &["red", "blue", "brown", "white"]),
        ("gender", &["man", "woman"]),
        ("material", &["wood", "metal", "glass", "fabric"]),
        ("objects", &["dog", "cat", "hat", "ball", "bird", "car"]),
        ("pose", &["standing", "sitting", "running"]),
        ("rank", &["royal", "common"]),
        ("style", &["photo", "sketch", "painting"]),
        ("tone", &["neutral", "warm", "cool"]),
    ];
    groups
        .iter()
        .map(|(name, tokens)| {
            (
                name.to_string(),
                tokens.iter().map(|t| t.to_string()).collect(),
            )
        })
        .collect()
}

/// Named semantic axes with unit embedding vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptVocabulary {
    dimension: usize,
    seed: u64,
    axes: BTreeMap<String, Vec<String>>,
    embeddings: BTreeMap<String, Vec<f64>>,
    group_of: BTreeMap<String, String>,
    blocks: BTreeMap<String, Range<usize>>,
}

/// On-disk form of a vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub dimension: usize,
    pub seed: u64,
    pub axes: BTreeMap<String, Vec<String>>,
    pub embeddings: BTreeMap<String, Vec<f64>>,
}

impl ConceptVocabulary {
    /// Builds the vocabulary deterministically from `(dimension, seed, axes)`.
    pub fn generate(
        dimension: usize,
        seed: u64,
        axes: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidVocabulary("no axis groups".into()));
        }
        if dimension < axes.len() {
            return Err(Error::InvalidVocabulary(format!(
                "dimension {dimension} is smaller than the number of axis groups ({})",
                axes.len()
            )));
        }
        let mut group_of = BTreeMap::new();
        for (group, tokens) in &axes {
            if tokens.is_empty() {
                return Err(Error::InvalidVocabulary(format!("axis `{group}` is empty")));
            }
            for token in tokens {
                if token.is_empty() || token.chars().any(char::is_whitespace) {
                    return Err(Error::InvalidVocabulary(format!(
                        "token `{token}` must be a single non-empty word"
                    )));
                }
                if is_stop_word(token) {
                    return Err(Error::InvalidVocabulary(format!(
                        "token `{token}` is a filler word"
                    )));
                }
                if let Some(other) = group_of.insert(token.clone(), group.clone()) {
                    return Err(Error::InvalidVocabulary(format!(
                        "token `{token}` appears in both `{other}` and `{group}`"
                    )));
                }
            }
        }

        let blocks = allocate_blocks(dimension, &axes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut embeddings = BTreeMap::new();
        for (group, tokens) in &axes {
            let block = blocks[group].clone();
            let width = block.len();
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for token in tokens {
                let local = loop {
                    let mut v: Vec<f64> = (0..width)
                        .map(|_| StandardNormal.sample(&mut rng))
                        .collect();
                    // Orthogonalise against earlier members while the block has room.
                    if basis.len() < width {
                        for b in &basis {
                            let p = linalg::dot(&v, b);
                            linalg::axpy(&mut v, -p, b);
                        }
                    }
                    let n = linalg::norm(&v);
                    if n > 1e-6 {
                        break linalg::scale(&v, 1.0 / n);
                    }
                };
                if basis.len() < width {
                    basis.push(local.clone());
                }
                let mut full = vec![0.0; dimension];
                full[block.clone()].copy_from_slice(&local);
                embeddings.insert(token.clone(), full);
            }
        }

        Ok(Self {
            dimension,
            seed,
            axes,
            embeddings,
            group_of,
            blocks,
        })
    }

    pub fn default_world(seed: u64) -> Self {
        Self::generate(DEFAULT_DIMENSION, seed, default_axes())
            .expect("default axes fit the default dimension")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn axes(&self) -> &BTreeMap<String, Vec<String>> {
        &self.axes
    }

    pub fn contains(&self, token: &str) -> bool {
        self.embeddings.contains_key(token)
    }

    /// Axis group a token belongs to.
    pub fn group_of(&self, token: &str) -> Option<&str> {
        self.group_of.get(token).map(String::as_str)
    }

    pub fn group_members(&self, group: &str) -> Option<&[String]> {
        self.axes.get(group).map(Vec::as_slice)
    }

    /// Coordinate block reserved for an axis group.
    pub fn block(&self, group: &str) -> Option<Range<usize>> {
        self.blocks.get(group).cloned()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.embeddings.keys().map(String::as_str)
    }

    pub fn embed_concept(&self, token: &str) -> Result<&[f64]> {
        self.embeddings
            .get(token)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }

    /// Mean of the content-token embeddings, renormalised; the zero vector when the
    /// caption has no content tokens.
    pub fn embed_prompt<S: AsRef<str>>(&self, caption: &[S]) -> Result<PromptEmbedding> {
        let mut sum = vec![0.0; self.dimension];
        let mut count = 0usize;
        for token in caption.iter().map(AsRef::as_ref) {
            if is_stop_word(token) {
                continue;
            }
            linalg::axpy(&mut sum, 1.0, self.embed_concept(token)?);
            count += 1;
        }
        let values = if count == 0 {
            sum
        } else {
            let mean = linalg::scale(&sum, 1.0 / count as f64);
            let n = linalg::norm(&mean);
            if n == 0.0 {
                mean
            } else {
                linalg::scale(&mean, 1.0 / n)
            }
        };
        Ok(PromptEmbedding {
            values,
            tokens: caption.iter().map(|t| t.as_ref().to_string()).collect(),
        })
    }

    /// `embed(add) - embed(remove)`.
    pub fn semantic_offset(&self, add: &str, remove: &str) -> Result<Vec<f64>> {
        Ok(linalg::sub(
            self.embed_concept(add)?,
            self.embed_concept(remove)?,
        ))
    }

    pub fn to_file(&self) -> VocabularyFile {
        VocabularyFile {
            dimension: self.dimension,
            seed: self.seed,
            axes: self.axes.clone(),
            embeddings: self.embeddings.clone(),
        }
    }

    /// Regenerates from `(dimension, seed, axes)` and checks every stored float bit for bit.
    pub fn from_file(file: VocabularyFile) -> Result<Self> {
        let vocab = Self::generate(file.dimension, file.seed, file.axes)?;
        if file.embeddings.len() != vocab.embeddings.len() {
            return Err(Error::InvalidVocabulary(format!(
                "file stores {} embeddings, axes define {}",
                file.embeddings.len(),
                vocab.embeddings.len()
            )));
        }
        for (token, stored) in &file.embeddings {
            let fresh = vocab
                .embeddings
                .get(token)
                .ok_or_else(|| Error::UnknownToken(token.clone()))?;
            let same = stored.len() == fresh.len()
                && stored
                    .iter()
                    .zip(fresh)
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return Err(Error::EmbeddingMismatch {
                    token: token.clone(),
                });
            }
        }
        Ok(vocab)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("vocabulary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabularyFile =
            serde_json::from_str(text).map_err(|e| Error::json("vocabulary", e))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One block per group, at least one coordinate each; spare coordinates go round-robin
/// to groups whose block is still narrower than their member count.
fn allocate_blocks(
    dimension: usize,
    axes: &BTreeMap<String, Vec<String>>,
) -> BTreeMap<String, Range<usize>> {
    let names: Vec<&String> = axes.keys().collect();
    let mut widths = vec![1usize; names.len()];
    let mut spare = dimension - names.len();
    loop {
        let mut grew = false;
        for (i, name) in names.iter().enumerate() {
            if spare == 0 {
                break;
            }
            if widths[i] < axes[*name].len() {
                widths[i] += 1;
                spare -= 1;
                grew = true;
            }
        }
        if !grew || spare == 0 {
            break;
        }
    }
    let mut start = 0;
    names
        .into_iter()
        .zip(widths)
        .map(|(name, w)| {
            let r = start..start + w;
            start += w;
            (name.clone(), r)
        })
        .collect()
}

/// A latent vector tagged with its normalized diffusion time (1 = noise, 0 = data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub values: Vec<f64>,
    pub time: f64,
}

impl Latent {
    pub fn new(values: Vec<f64>, time: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&time) {
            return Err(Error::TimeOutOfRange(time));
        }
        Ok(Self { values, time })
    }
}

/// Embedding of a caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEmbedding {
    pub values: Vec<f64>,
    pub tokens: Vec<String>,
}

impl PromptEmbedding {
    /// The unconditional prompt used for classifier-free guidance.
    pub fn null(dimension: usize) -> Self {
        Self {
            values: vec![0.0; dimension],
            tokens: Vec::new(),
        }
    }

    pub fn is_null(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Maps cosine to a 0..10 score: `5 * (cos + 1)`.
pub fn similarity_score(z: &[f64], prompt: &PromptEmbedding) -> Result<f64> {
    linalg::check_dim(prompt.values.len(), z.len())?;
    if prompt.is_null() {
        return Err(Error::NullPrompt);
    }
    let c = linalg::cosine(z, &prompt.values)?;
    Ok(5.0 * (c + 1.0))
}
