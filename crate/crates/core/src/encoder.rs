//! Contextual and semantic-role embeddings and their per-structure join.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::data::PaddedSentence;
use crate::error::{Result, SainError, TensorError};
use crate::nn::BiLstm;
use crate::tensor::{Real, Tensor};

/// Source of the contextual part of the joint embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    /// Trainable token embedding followed by one biLSTM layer.
    Toy,
    /// Rows read from a sidecar vector file.
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_s: usize,
    pub d_w: usize,
    pub mode: ContextMode,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_s: 64,
            d_w: 30,
            mode: ContextMode::Toy,
        }
    }
}

impl EncoderConfig {
    /// Joint width `d_s + d_w`.
    pub fn joint_width(&self) -> usize {
        self.d_s + self.d_w
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_s == 0 {
            return Err(SainError::Config("d_s must be positive".into()));
        }
        if self.mode == ContextMode::Toy && self.d_s % 2 == 1 {
            return Err(SainError::Config(format!("toy encoder needs an even d_s, got {}", self.d_s)));
        }
        Ok(())
    }
}

/// The M joint matrices of one sentence with their shared validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSequence {
    pub structures: Vec<Var>,
    pub mask: Vec<bool>,
}

impl JointSequence {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn num_structures(&self) -> usize {
        self.structures.len()
    }
}

/// Column concatenation, contextual block first.
pub fn join<T: Real>(g: &mut Graph<T>, contextual: Var, semantic: Var) -> Result<Var, TensorError> {
    let (rc, rs) = (g.shape(contextual)[0], g.shape(semantic)[0]);
    if rc != rs {
        return Err(TensorError::Dimension {
            op: "join",
            detail: format!("{rc} contextual rows vs {rs} semantic rows"),
        });
    }
    g.concat(&[contextual, semantic], 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub token_embedding: Option<ParamId>,
    pub context: Option<BiLstm>,
    /// Absent when semantic embeddings are switched off.
    pub label_embedding: Option<ParamId>,
}

impl Encoder {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        config: EncoderConfig,
        num_tokens: usize,
        num_labels: usize,
        semantic: bool,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let (token_embedding, context) = match config.mode {
            ContextMode::Toy => {
                let bound = 1.0 / (config.d_s as f64).sqrt();
                let emb = store.insert_uniform("encoder.tokens", vec![num_tokens, config.d_s], bound, rng);
                let lstm = BiLstm::new(store, "encoder.context", config.d_s, config.d_s / 2, rng);
                (Some(emb), Some(lstm))
            }
            ContextMode::Precomputed => (None, None),
        };
        let label_embedding = (semantic && config.d_w > 0).then(|| {
            let bound = 1.0 / (config.d_w as f64).sqrt();
            store.insert_uniform("encoder.labels", vec![num_labels, config.d_w], bound, rng)
        });
        Ok(Encoder {
            config,
            token_embedding,
            context,
            label_embedding,
        })
    }

    /// `n × d_s` contextual rows; masked rows are zero. In precomputed mode
    /// `vectors` must hold one row per valid position.
    pub fn contextual_encode<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        token_ids: &[usize],
        mask: &[bool],
        vectors: Option<&Tensor<T>>,
    ) -> Result<Var> {
        if token_ids.len() != mask.len() {
            return Err(TensorError::Dimension {
                op: "contextual_encode",
                detail: format!("{} ids vs {} mask entries", token_ids.len(), mask.len()),
            }
            .into());
        }
        match (self.config.mode, self.token_embedding, self.context) {
            (ContextMode::Toy, Some(emb), Some(lstm)) => {
                let table = g.param(store, emb);
                let x = g.gather_rows(table, token_ids)?;
                Ok(lstm.sequence(g, store, x, mask)?)
            }
            (ContextMode::Precomputed, _, _) => {
                let rows = vectors.ok_or_else(|| SainError::Config("precomputed mode needs context vectors".into()))?;
                let d_s = self.config.d_s;
                let valid = mask.iter().filter(|&&m| m).count();
                if rows.shape() != [valid, d_s] {
                    return Err(SainError::Incompatible(format!(
                        "context vectors have shape {:?}, expected [{valid}, {d_s}]",
                        rows.shape()
                    )));
                }
                let mut data = vec![T::zero(); mask.len() * d_s];
                let mut k = 0;
                for (p, &m) in mask.iter().enumerate() {
                    if m {
                        data[p * d_s..(p + 1) * d_s].copy_from_slice(&rows.data()[k * d_s..(k + 1) * d_s]);
                        k += 1;
                    }
                }
                Ok(g.constant(Tensor::new(vec![mask.len(), d_s], data)?)?)
            }
            _ => Err(SainError::Config("toy encoder parameters missing".into())),
        }
    }

    /// One `n × d_w` label-embedding matrix per structure.
    pub fn embed_semantic<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        labels: &[Vec<usize>],
    ) -> Result<Vec<Var>, TensorError> {
        let emb = self.label_embedding.ok_or_else(|| TensorError::Dimension {
            op: "embed_semantic",
            detail: "semantic embeddings are disabled".into(),
        })?;
        let table = g.param(store, emb);
        labels.iter().map(|seq| g.gather_rows(table, seq)).collect()
    }

    /// Joint matrices for every structure of `sentence`; contextual rows only
    /// when semantic embeddings are disabled.
    pub fn encode<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        sentence: &PaddedSentence,
        vectors: Option<&Tensor<T>>,
    ) -> Result<JointSequence> {
        let ctx = self.contextual_encode(g, store, &sentence.token_ids, &sentence.mask, vectors)?;
        let structures = if self.label_embedding.is_some() {
            let sem = self.embed_semantic(g, store, &sentence.labels)?;
            sem.into_iter().map(|s| join(g, ctx, s)).collect::<Result<Vec<_>, _>>()?
        } else {
            vec![ctx; sentence.labels.len()]
        };
        Ok(JointSequence {
            structures,
            mask: sentence.mask.clone(),
        })
    }
}

/// Which sentence of an example a block of vectors belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceRole {
    Passage,
    Question,
}

impl fmt::Display for SentenceRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentenceRole::Passage => "passage",
            SentenceRole::Question => "question",
        })
    }
}

pub const VECTORS_MAGIC: &[u8; 8] = b"SAINVECS";
pub const VECTORS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub id: String,
    pub role: SentenceRole,
    pub rows: usize,
    /// Byte offset relative to the payload start.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorManifest {
    pub format_version: u32,
    pub d_s: usize,
    pub entries: Vec<VectorEntry>,
}

/// Precomputed contextual vectors keyed by example id and sentence role.
///
/// File layout: the magic `SAINVECS`, a little-endian `u32` version, a
/// little-endian `u64` manifest length, the JSON manifest, then `f32` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVectors {
    d_s: usize,
    blocks: BTreeMap<(String, SentenceRole), Tensor<f32>>,
}

impl ContextVectors {
    pub fn new(d_s: usize) -> Self {
        ContextVectors {
            d_s,
            blocks: BTreeMap::new(),
        }
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, role: SentenceRole, rows: Tensor<f32>) -> Result<()> {
        let (_, w) = rows.dims2();
        if w != self.d_s {
            return Err(SainError::Config(format!("vector width {w}, file width {}", self.d_s)));
        }
        self.blocks.insert((id.into(), role), rows);
        Ok(())
    }

    pub fn get(&self, id: &str, role: SentenceRole) -> Result<&Tensor<f32>> {
        self.blocks
            .get(&(id.to_string(), role))
            .ok_or_else(|| SainError::MissingVectors {
                id: id.to_string(),
                role: role.to_string(),
            })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let mut entries = Vec::with_capacity(self.blocks.len());
        for ((id, role), t) in &self.blocks {
            entries.push(VectorEntry {
                id: id.clone(),
                role: *role,
                rows: t.dims2().0,
                offset: payload.len() as u64,
            });
            for &v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = VectorManifest {
            format_version: VECTORS_VERSION,
            d_s: self.d_s,
            entries,
        };
        let json = serde_json::to_vec(&manifest).map_err(|e| SainError::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + json.len() + payload.len());
        out.extend_from_slice(VECTORS_MAGIC);
        out.extend_from_slice(&VECTORS_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| SainError::Checkpoint(format!("vector file: {m}"));
        if bytes.len() < 20 || &bytes[..8] != VECTORS_MAGIC {
            return Err(bad("missing magic header".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VECTORS_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let json = bytes.get(20..20 + mlen).ok_or_else(|| bad("truncated manifest".into()))?;
        let manifest: VectorManifest = serde_json::from_slice(json).map_err(|e| bad(e.to_string()))?;
        let payload = &bytes[20 + mlen..];
        let mut out = ContextVectors::new(manifest.d_s);
        for e in manifest.entries {
            let start = e.offset as usize;
            let end = start + e.rows * manifest.d_s * 4;
            let raw = payload
                .get(start..end)
                .ok_or_else(|| bad(format!("{} {} exceeds payload", e.id, e.role)))?;
            let data = raw.chunks(4).map(f32::read_le).collect();
            out.insert(e.id, e.role, Tensor::new(vec![e.rows, manifest.d_s], data)?)?;
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| SainError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| SainError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
