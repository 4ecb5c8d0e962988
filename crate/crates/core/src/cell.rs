//! Control, read and write units applied over M semantic structures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::encoder::JointSequence;
use crate::error::{Result, SainError, TensorError};
use crate::nn::{BiLstm, Linear};
use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AblationMode {
    #[default]
    Full,
    /// No reasoning cell: a pooled passage row stands in for every memory.
    NoIm,
    /// Contextual embeddings only.
    NoSi,
    /// Every step sees the mean of the M structures.
    NoIr,
}

impl AblationMode {
    pub fn uses_semantics(self) -> bool {
        self != AblationMode::NoSi
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoIm => "no-im",
            AblationMode::NoSi => "no-si",
            AblationMode::NoIr => "no-ir",
        }
    }
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Weights of one cell application.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub d: usize,
    pub summarizer: BiLstm,
    /// `[c_{i-1}, bq_i] → w_i`, `2d → d`.
    pub control_in: Linear,
    /// `w_i ⊙ q_{i,j} → a_{i,j}`, `d → 1`.
    pub control_score: Linear,
    /// `m_{i-1}` projection, `d → d`.
    pub read_memory: Linear,
    /// `p_{i,p}` projection, `d → d`.
    pub read_passage: Linear,
    /// `[I_{i,p}, p_{i,p}] → Î_{i,p}`, `2d → d`.
    pub read_combine: Linear,
    /// `c_i ⊙ Î_{i,p} → ra_{i,p}`, `d → 1`.
    pub read_score: Linear,
    /// `[r_i, m_{i-1}] → m_i^r`, `2d → d`.
    pub write_memory: Linear,
    /// `c_i → ĉ_i`, `d → 1`.
    pub write_gate: Linear,
}

/// Result of a write step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteOutput {
    pub memory: Var,
    pub candidate: Var,
    pub gate: Var,
}

impl CellParams {
    pub fn new<T: Real, R: Rng>(store: &mut ParamStore<T>, prefix: &str, d: usize, rng: &mut R) -> Result<Self> {
        if d == 0 || d % 2 == 1 {
            return Err(SainError::Config(format!("cell width must be even and positive, got {d}")));
        }
        let mut lin = |name: &str, i: usize, o: usize| Linear::new(store, &format!("{prefix}.{name}"), i, o, true, rng);
        let control_in = lin("control_in", 2 * d, d);
        let control_score = lin("control_score", d, 1);
        let read_memory = lin("read_memory", d, d);
        let read_passage = lin("read_passage", d, d);
        let read_combine = lin("read_combine", 2 * d, d);
        let read_score = lin("read_score", d, 1);
        let write_memory = lin("write_memory", 2 * d, d);
        let write_gate = lin("write_gate", d, 1);
        let summarizer = BiLstm::new(store, &format!("{prefix}.summarizer"), d, d / 2, rng);
        Ok(CellParams {
            d,
            summarizer,
            control_in,
            control_score,
            read_memory,
            read_passage,
            read_combine,
            read_score,
            write_memory,
            write_gate,
        })
    }

    /// `bq_i`: forward state at the last valid token joined with the backward
    /// state at the first.
    pub fn question_summary<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        question: Var,
        mask: &[bool],
    ) -> Result<Var, TensorError> {
        self.summarizer.summary(g, store, question, mask)
    }

    /// Returns `(c_i, v_i)`; `v_i` is an `|Q| × 1` column.
    pub fn control_step<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        c_prev: Var,
        bq: Var,
        question: Var,
        mask: &[bool],
    ) -> Result<(Var, Var), TensorError> {
        let joined = g.concat(&[c_prev, bq], 1)?;
        let w = self.control_in.forward(g, store, joined)?;
        let interact = g.mul_row(question, w)?;
        let scores = self.control_score.forward(g, store, interact)?;
        let v = g.softmax_masked(scores, mask)?;
        let n = mask.len();
        let v_row = g.reshape(v, vec![1, n])?;
        let c = g.matmul(v_row, question)?;
        Ok((c, v))
    }

    /// Returns `(r_i, rv_i)`; `rv_i` is a `|P| × 1` column.
    pub fn read_step<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        m_prev: Var,
        c: Var,
        passage: Var,
        mask: &[bool],
    ) -> Result<(Var, Var), TensorError> {
        let mem = self.read_memory.forward(g, store, m_prev)?;
        let pas = self.read_passage.forward(g, store, passage)?;
        let inter = g.mul_row(pas, mem)?;
        let joined = g.concat(&[inter, passage], 1)?;
        let combined = self.read_combine.forward(g, store, joined)?;
        let gated = g.mul_row(combined, c)?;
        let scores = self.read_score.forward(g, store, gated)?;
        let rv = g.softmax_masked(scores, mask)?;
        let n = mask.len();
        let rv_row = g.reshape(rv, vec![1, n])?;
        let r = g.matmul(rv_row, passage)?;
        Ok((r, rv))
    }

    pub fn write_step<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        m_prev: Var,
        r: Var,
        c: Var,
    ) -> Result<WriteOutput, TensorError> {
        let joined = g.concat(&[r, m_prev], 1)?;
        let candidate = self.write_memory.forward(g, store, joined)?;
        let logit = self.write_gate.forward(g, store, c)?;
        let gate = g.sigmoid(logit)?;
        let keep = g.scale(m_prev, gate)?;
        let rest = g.one_minus(gate)?;
        let fresh = g.scale(candidate, rest)?;
        let memory = g.add(keep, fresh)?;
        Ok(WriteOutput {
            memory,
            candidate,
            gate,
        })
    }
}

/// Hidden states and recorded attention after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningState<T> {
    pub control: Var,
    pub memory: Var,
    pub question_attention: Vec<T>,
    pub passage_attention: Vec<T>,
    pub gate: T,
}

/// Output of [`ReasoningCell::run_inference`].
#[derive(Debug, Clone, PartialEq)]
pub struct Inference<T> {
    /// One memory per step (`M` entries, each `1 × d`).
    pub memories: Vec<Var>,
    /// Per-step states; empty when the cell is bypassed.
    pub states: Vec<ReasoningState<T>>,
    /// Passage structures the cell consumed, one per step; the fused
    /// rows under `NoIr`.
    pub passage: Vec<Var>,
}

/// M recurrent applications of the control/read/write cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningCell {
    pub d: usize,
    pub steps: usize,
    /// A single entry when parameters are shared across steps.
    pub params: Vec<CellParams>,
    pub c0: ParamId,
    pub m0: ParamId,
}

impl ReasoningCell {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        d: usize,
        steps: usize,
        shared: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(SainError::Config("M must be at least 1".into()));
        }
        let copies = if shared { 1 } else { steps };
        let params = (0..copies)
            .map(|k| {
                let prefix = if shared { "cell".to_string() } else { format!("cell{k}") };
                CellParams::new(store, &prefix, d, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let c0 = store.insert_zeros("cell.c0", vec![1, d]);
        let m0 = store.insert_zeros("cell.m0", vec![1, d]);
        Ok(ReasoningCell {
            d,
            steps,
            params,
            c0,
            m0,
        })
    }

    pub fn step_params(&self, i: usize) -> &CellParams {
        &self.params[i.min(self.params.len() - 1)]
    }

    fn check(&self, g: &Graph<impl Real>, name: &str, seq: &JointSequence) -> Result<()> {
        if seq.num_structures() != self.steps {
            return Err(SainError::Config(format!(
                "{name} has {} structures, cell expects M = {}",
                seq.num_structures(),
                self.steps
            )));
        }
        for &s in &seq.structures {
            if g.shape(s) != [seq.len(), self.d] {
                return Err(TensorError::Dimension {
                    op: "run_inference",
                    detail: format!("{name} structure shape {:?}, expected [{}, {}]", g.shape(s), seq.len(), self.d),
                }
                .into());
            }
        }
        Ok(())
    }

    fn fused(g: &mut Graph<impl Real>, seq: &JointSequence) -> Result<JointSequence, TensorError> {
        let m = seq.num_structures();
        let sum = g.add_n(&seq.structures)?;
        let mean = g.scale_const(sum, Real::from_f64_lossy(1.0 / m as f64))?;
        Ok(JointSequence {
            structures: vec![mean; m],
            mask: seq.mask.clone(),
        })
    }

    /// Runs the cell over the structures of `passage` and `question`.
    pub fn run_inference<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        passage: &JointSequence,
        question: &JointSequence,
        mode: AblationMode,
    ) -> Result<Inference<T>> {
        self.check(g, "passage", passage)?;
        self.check(g, "question", question)?;
        match mode {
            AblationMode::NoIm => {
                let sum = g.add_n(&passage.structures)?;
                let mean = g.scale_const(sum, T::from_f64_lossy(1.0 / self.steps as f64))?;
                let pooled = g.mean_rows_masked(mean, &passage.mask)?;
                Ok(Inference {
                    memories: vec![pooled; self.steps],
                    states: Vec::new(),
                    passage: passage.structures.clone(),
                })
            }
            AblationMode::NoIr => {
                let p = Self::fused(g, passage)?;
                let q = Self::fused(g, question)?;
                self.recur(g, store, &p, &q)
            }
            AblationMode::Full | AblationMode::NoSi => self.recur(g, store, passage, question),
        }
    }

    fn recur<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        passage: &JointSequence,
        question: &JointSequence,
    ) -> Result<Inference<T>> {
        let mut c = g.param(store, self.c0);
        let mut m = g.param(store, self.m0);
        let mut memories = Vec::with_capacity(self.steps);
        let mut states = Vec::with_capacity(self.steps);
        for i in 0..self.steps {
            let cell = self.step_params(i);
            let q = question.structures[i];
            let p = passage.structures[i];
            let bq = cell.question_summary(g, store, q, &question.mask)?;
            let (c_i, v) = cell.control_step(g, store, c, bq, q, &question.mask)?;
            let (r, rv) = cell.read_step(g, store, m, c_i, p, &passage.mask)?;
            let w = cell.write_step(g, store, m, r, c_i)?;
            states.push(ReasoningState {
                control: c_i,
                memory: w.memory,
                question_attention: g.value(v).data().to_vec(),
                passage_attention: g.value(rv).data().to_vec(),
                gate: g.value(w.gate).data()[0],
            });
            memories.push(w.memory);
            c = c_i;
            m = w.memory;
        }
        Ok(Inference {
            memories,
            states,
            passage: passage.structures.clone(),
        })
    }
}
