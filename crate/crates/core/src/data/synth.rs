//! Synthetic multi-hop reading tasks with gold SRL tags.
//!
//! Each passage is a list of three-word clauses `X verb Y .`, one
//! predicate-argument structure per clause. The surface order of the two
//! arguments is random, so which of them is `ARG0` is only recorded in the
//! tags. A question such as `baka likes who owns what` asks to follow a chain
//! of relations from a start entity; each hop has a direction (start entity as
//! `ARG0` or as `ARG1`) that the question tags carry.
//!
//! With decoys enabled the passage also contains a second chain leaving the
//! start entity through the first verb in the opposite direction and then
//! continuing through the same verbs, so both chains reach an entity after
//! `chain_len` hops and only the role tags tell them apart.
//!
//! With companions enabled every clause reads `X verb other Y .`: a second
//! predicate over the same two arguments with their roles swapped. Each
//! entity is then `ARG0` in one structure and `ARG1` in the other, so the
//! direction of a relation is only visible structure by structure.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::example::{Answer, RawExample};
use crate::error::{Result, SainError};

pub const VERBS: &[&str] = &[
    "likes", "owns", "sees", "helps", "calls", "knows", "meets", "pays", "trusts", "visits",
];
const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// Order in which the clauses appear in the passage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseOrder {
    /// Clauses grouped by hop; chain and decoy order random within a hop.
    HopMajor,
    /// Fully shuffled.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Size of the entity-name pool.
    pub vocab: usize,
    pub chain_len: usize,
    pub count: usize,
    pub seed: u64,
    pub decoys: bool,
    pub clause_order: ClauseOrder,
    pub companions: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab: 40,
            chain_len: 2,
            count: 32,
            seed: 0,
            decoys: true,
            clause_order: ClauseOrder::HopMajor,
            companions: false,
        }
    }
}

impl SynthConfig {
    /// Entities needed per example.
    fn entities_per_example(&self) -> usize {
        1 + self.chain_len * if self.decoys { 2 } else { 1 }
    }

    pub fn clauses_per_example(&self) -> usize {
        self.chain_len * if self.decoys { 2 } else { 1 }
    }

    /// Number of passage structures per example.
    pub fn structures_per_example(&self) -> usize {
        self.clauses_per_example() * if self.companions { 2 } else { 1 }
    }
}

/// Deterministic pronounceable name for entity `i`.
pub fn entity_name(i: usize) -> String {
    let o = ONSETS.len();
    let v = VOWELS.len();
    let a = i % o;
    let b = (i / o) % v;
    let c = (i / (o * v)) % o;
    let d = (i / (o * v * o)) % v;
    format!("{}{}{}{}", ONSETS[a], VOWELS[b], ONSETS[c], VOWELS[d])
}

struct Clause {
    verb: &'static str,
    arg0: usize,
    arg1: usize,
    /// Surface order: `true` prints `arg0 verb arg1`.
    agent_first: bool,
    hop: usize,
    companion: Option<&'static str>,
}

/// Generates `config.count` examples. Identical configs give identical output.
pub fn gen_synthetic_chain(config: &SynthConfig) -> Result<Vec<RawExample>> {
    if config.chain_len == 0 {
        return Err(SainError::Config("chain length must be at least 1".into()));
    }
    let spare = usize::from(config.companions);
    if config.chain_len + spare > VERBS.len() {
        return Err(SainError::Config(format!("chain length above {}", VERBS.len() - spare)));
    }
    let need = config.entities_per_example();
    if config.vocab < need {
        return Err(SainError::Config(format!(
            "entity vocabulary {} smaller than the {need} entities each example needs",
            config.vocab
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names: Vec<String> = (0..config.vocab).map(entity_name).collect();
    let pool: Vec<usize> = (0..config.vocab).collect();
    let mut out = Vec::with_capacity(config.count);
    for n in 0..config.count {
        let ents: Vec<usize> = pool.choose_multiple(&mut rng, need).copied().collect();
        let verbs: Vec<&'static str> = VERBS.choose_multiple(&mut rng, config.chain_len).copied().collect();
        let forward: Vec<bool> = (0..config.chain_len).map(|_| rng.gen_bool(0.5)).collect();
        let chain = &ents[..=config.chain_len];
        let others: Vec<&'static str> = VERBS.iter().copied().filter(|v| !verbs.contains(v)).collect();
        let companion =
            |rng: &mut ChaCha8Rng| config.companions.then(|| *others.choose(rng).expect("spare verb"));

        let mut clauses = Vec::new();
        for k in 0..config.chain_len {
            let (src, dst) = (chain[k], chain[k + 1]);
            let (arg0, arg1) = if forward[k] { (src, dst) } else { (dst, src) };
            let agent_first = rng.gen_bool(0.5);
            clauses.push(Clause { verb: verbs[k], arg0, arg1, agent_first, hop: k, companion: companion(&mut rng) });
        }
        if config.decoys {
            let mut decoy = vec![chain[0]];
            decoy.extend_from_slice(&ents[config.chain_len + 1..]);
            for k in 0..config.chain_len {
                let (src, dst) = (decoy[k], decoy[k + 1]);
                let fwd = if k == 0 { !forward[0] } else { forward[k] };
                let (arg0, arg1) = if fwd { (src, dst) } else { (dst, src) };
                let agent_first = rng.gen_bool(0.5);
                clauses.push(Clause { verb: verbs[k], arg0, arg1, agent_first, hop: k, companion: companion(&mut rng) });
            }
        }
        match config.clause_order {
            ClauseOrder::Shuffled => clauses.shuffle(&mut rng),
            ClauseOrder::HopMajor => {
                clauses.shuffle(&mut rng);
                clauses.sort_by_key(|c| c.hop);
            }
        }

        let mut passage = Vec::new();
        let mut spans = Vec::new();
        for c in &clauses {
            let start = passage.len();
            let (first, second) = if c.agent_first { (c.arg0, c.arg1) } else { (c.arg1, c.arg0) };
            passage.push(names[first].clone());
            passage.push(c.verb.to_string());
            if let Some(other) = c.companion {
                passage.push(other.to_string());
            }
            passage.push(names[second].clone());
            passage.push(".".to_string());
            spans.push(start);
        }
        let mut srl_passage: Vec<Vec<String>> = Vec::new();
        for (c, &start) in clauses.iter().zip(&spans) {
            let (first, second) = if c.agent_first { ("ARG0", "ARG1") } else { ("ARG1", "ARG0") };
            let last = start + if c.companion.is_some() { 3 } else { 2 };
            let mut seq = vec!["O".to_string(); passage.len()];
            seq[start] = first.into();
            seq[start + 1] = "V".into();
            seq[last] = second.into();
            srl_passage.push(seq);
            if c.companion.is_some() {
                let mut seq = vec!["O".to_string(); passage.len()];
                seq[start] = second.into();
                seq[start + 2] = "V".into();
                seq[last] = first.into();
                srl_passage.push(seq);
            }
        }

        let answer_entity = chain[config.chain_len];
        let last_clause = clauses
            .iter()
            .zip(&spans)
            .find(|(c, _)| c.hop == config.chain_len - 1 && (c.arg0 == answer_entity || c.arg1 == answer_entity))
            .map(|(c, &s)| (c, s))
            .expect("final chain clause present");
        let (c, s) = last_clause;
        let answer_pos = if (c.agent_first && c.arg0 == answer_entity) || (!c.agent_first && c.arg1 == answer_entity) {
            s
        } else if c.companion.is_some() {
            s + 3
        } else {
            s + 2
        };

        // Question: start verb1 who verb2 who ... verbL what
        let mut question = vec![names[chain[0]].clone()];
        for (k, v) in verbs.iter().enumerate() {
            question.push(v.to_string());
            question.push(if k + 1 == config.chain_len { "what" } else { "who" }.to_string());
        }
        let srl_question: Vec<Vec<String>> = (0..config.chain_len)
            .map(|k| {
                let mut seq = vec!["O".to_string(); question.len()];
                let (src_role, dst_role) = if forward[k] { ("ARG0", "ARG1") } else { ("ARG1", "ARG0") };
                seq[2 * k] = src_role.into();
                seq[2 * k + 1] = "V".into();
                seq[2 * k + 2] = dst_role.into();
                seq
            })
            .collect();

        out.push(RawExample {
            id: format!("chain{}-s{}-{n:05}", config.chain_len, config.seed),
            passage,
            question,
            answer: Answer::Span { start: answer_pos, end: answer_pos },
            srl_passage,
            srl_question,
        });
    }
    Ok(out)
}

/// Breadth-first hop count from the question's start entity to the answer
/// over the argument links of the passage structures. `None` if unreachable.
pub fn bfs_hops(ex: &RawExample) -> Option<usize> {
    let Answer::Span { start, .. } = ex.answer else { return None };
    let target = ex.passage.get(start)?.clone();
    let source = ex.question.first()?.clone();
    let mut adj: HashMap<&str, HashSet<&str>> = HashMap::new();
    for seq in &ex.srl_passage {
        let args: Vec<&str> = seq
            .iter()
            .zip(&ex.passage)
            .filter(|(l, _)| l.starts_with("ARG"))
            .map(|(_, w)| w.as_str())
            .collect();
        for &a in &args {
            for &b in &args {
                if a != b {
                    adj.entry(a).or_default().insert(b);
                }
            }
        }
    }
    let mut dist: HashMap<&str, usize> = HashMap::from([(source.as_str(), 0)]);
    let mut queue = VecDeque::from([source.as_str()]);
    while let Some(u) = queue.pop_front() {
        if u == target {
            return dist.get(u).copied();
        }
        let du = dist[u];
        if let Some(ns) = adj.get(u) {
            let mut ns: Vec<&str> = ns.iter().copied().collect();
            ns.sort_unstable();
            for v in ns {
                if !dist.contains_key(v) {
                    dist.insert(v, du + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    None
}

/// Follows the question's typed relation chain through the passage tags and
/// returns the passage position of the final entity.
pub fn follow_roles(ex: &RawExample) -> Option<usize> {
    let hops = ex.srl_question.len();
    let mut current = ex.question.first()?.clone();
    let mut position = None;
    for k in 0..hops {
        let q = &ex.srl_question[k];
        let vpos = q.iter().position(|l| l == "V")?;
        let verb = &ex.question[vpos];
        let src_role = &q[vpos - 1];
        let dst_role = &q[vpos + 1];
        let mut next = None;
        for seq in &ex.srl_passage {
            let Some(pv) = seq.iter().position(|l| l == "V") else { continue };
            if &ex.passage[pv] != verb {
                continue;
            }
            let src = seq.iter().zip(&ex.passage).position(|(l, w)| l == src_role && *w == current);
            if src.is_some() {
                next = seq.iter().position(|l| l == dst_role);
                break;
            }
        }
        let p = next?;
        current = ex.passage[p].clone();
        position = Some(p);
    }
    position
}
