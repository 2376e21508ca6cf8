//! Agents, samples, albums and chat histories.
//!
//! Albums and histories are bounded FIFO queues. The query context an agent
//! retrieves under is derived purely from the records still inside its
//! history window.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Strain index of a virus (and of the cure that neutralises it).
pub type Strain = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub u64);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Label of the malicious output a virus is built to elicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PayloadTag(Arc<str>);

impl PayloadTag {
    pub fn new(label: &str) -> Result<Self> {
        if label.is_empty() {
            return Err(SimError::config("payload", "payload tag must be non-empty"));
        }
        Ok(PayloadTag(Arc::from(label)))
    }

    /// Default tag for `strain`: `T0`, `T1`, ...
    pub fn for_strain(strain: Strain) -> Self {
        PayloadTag(Arc::from(format!("T{strain}")))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PayloadTag {
    type Error = SimError;
    fn try_from(s: String) -> Result<Self> {
        PayloadTag::new(&s)
    }
}

impl From<PayloadTag> for String {
    fn from(t: PayloadTag) -> String {
        t.0.to_string()
    }
}

impl fmt::Display for PayloadTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SampleKind {
    Benign,
    Virus { strain: Strain, payload: PayloadTag },
    Cure { targets_strain: Strain },
}

/// Kind without payload, used in event records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KindTag {
    Benign,
    Virus,
    Cure,
}

impl SampleKind {
    pub fn tag(&self) -> KindTag {
        match self {
            SampleKind::Benign => KindTag::Benign,
            SampleKind::Virus { .. } => KindTag::Virus,
            SampleKind::Cure { .. } => KindTag::Cure,
        }
    }
}

/// A retrievable item. Scores stand in for the retriever's similarity
/// under a benign and under a malicious query context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    pub kind: SampleKind,
    pub benign_score: f64,
    pub malicious_score: f64,
    pub origin_benign_score: Option<f64>,
}

fn check_score(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(SimError::config(field, format!("score must be finite and >= 0, got {v}")))
    }
}

impl Sample {
    pub fn benign(id: SampleId, score: f64) -> Result<Self> {
        check_score("benign_score", score)?;
        Ok(Sample {
            id,
            kind: SampleKind::Benign,
            benign_score: score,
            malicious_score: score,
            origin_benign_score: None,
        })
    }

    pub fn virus(
        id: SampleId,
        strain: Strain,
        payload: PayloadTag,
        benign_score: f64,
        malicious_score: f64,
        origin_benign_score: f64,
    ) -> Result<Self> {
        check_score("benign_score", benign_score)?;
        check_score("malicious_score", malicious_score)?;
        check_score("origin_benign_score", origin_benign_score)?;
        Ok(Sample {
            id,
            kind: SampleKind::Virus { strain, payload },
            benign_score,
            malicious_score,
            origin_benign_score: Some(origin_benign_score),
        })
    }

    pub fn cure(id: SampleId, targets_strain: Strain, benign_score: f64, malicious_score: f64) -> Result<Self> {
        check_score("benign_score", benign_score)?;
        check_score("malicious_score", malicious_score)?;
        Ok(Sample {
            id,
            kind: SampleKind::Cure { targets_strain },
            benign_score,
            malicious_score,
            origin_benign_score: Some(benign_score),
        })
    }

    pub fn is_virus(&self) -> bool {
        matches!(self.kind, SampleKind::Virus { .. })
    }

    pub fn is_cure(&self) -> bool {
        matches!(self.kind, SampleKind::Cure { .. })
    }

    pub fn is_benign(&self) -> bool {
        matches!(self.kind, SampleKind::Benign)
    }

    pub fn virus_strain(&self) -> Option<Strain> {
        match self.kind {
            SampleKind::Virus { strain, .. } => Some(strain),
            _ => None,
        }
    }

    pub fn cure_strain(&self) -> Option<Strain> {
        match self.kind {
            SampleKind::Cure { targets_strain } => Some(targets_strain),
            _ => None,
        }
    }
}

/// Bounded album with FIFO eviction, oldest item first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Album {
    capacity: usize,
    items: VecDeque<Sample>,
}

/// Result of [`Album::replace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplaceOutcome {
    /// Number of slots rewritten (copies of the same sample share an id).
    Replaced(usize),
    Absent,
}

impl Album {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(SimError::config("album_size", "must be positive"));
        }
        Ok(Album { capacity, items: VecDeque::with_capacity(capacity + 1) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items, oldest first.
    pub fn items(&self) -> impl DoubleEndedIterator<Item = &Sample> + ExactSizeIterator {
        self.items.iter()
    }

    pub fn contains(&self, id: SampleId) -> bool {
        self.items.iter().any(|s| s.id == id)
    }

    /// Appends `s`, evicting and returning the oldest item when full.
    pub fn insert(&mut self, s: Sample) -> Option<Sample> {
        self.items.push_back(s);
        if self.items.len() > self.capacity {
            self.items.pop_front()
        } else {
            None
        }
    }

    /// Puts `new` in every slot currently holding `old`.
    pub fn replace(&mut self, old: SampleId, new: &Sample) -> ReplaceOutcome {
        let mut n = 0;
        for slot in self.items.iter_mut().filter(|s| s.id == old) {
            *slot = new.clone();
            n += 1;
        }
        if n == 0 {
            log::warn!("album replace: sample {old} not present, leaving album unchanged");
            ReplaceOutcome::Absent
        } else {
            ReplaceOutcome::Replaced(n)
        }
    }

    pub fn holds_virus(&self) -> bool {
        self.items.iter().any(Sample::is_virus)
    }

    pub fn holds_cure(&self) -> bool {
        self.items.iter().any(Sample::is_cure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuestionClass {
    BenignQ,
    MaliciousQ(Strain),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnswerClass {
    BenignA,
    MaliciousA(Strain),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    AsQuestioner,
    AsResponder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub round: u32,
    pub partner: AgentId,
    pub direction: Direction,
    pub question: QuestionClass,
    pub sample: SampleId,
    pub answer: AnswerClass,
}

impl ChatRecord {
    /// Strain of the malicious content carried by this record, if any.
    /// The question is checked after the answer so a record carrying both
    /// reports the question's strain.
    pub fn malicious_strain(&self) -> Option<Strain> {
        let mut found = None;
        if let AnswerClass::MaliciousA(s) = self.answer {
            found = Some(s);
        }
        if let QuestionClass::MaliciousQ(s) = self.question {
            found = Some(s);
        }
        found
    }
}

/// Bounded chat history. Oldest records are discarded first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    capacity: usize,
    records: VecDeque<ChatRecord>,
}

impl History {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(SimError::config("history_len", "must be positive"));
        }
        Ok(History { capacity, records: VecDeque::with_capacity(capacity + 1) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl DoubleEndedIterator<Item = &ChatRecord> + ExactSizeIterator {
        self.records.iter()
    }

    pub fn latest(&self) -> Option<&ChatRecord> {
        self.records.back()
    }

    /// Appends a record, discarding the oldest when over capacity.
    ///
    /// Rounds must not decrease along a history.
    pub fn push(&mut self, rec: ChatRecord) -> Option<ChatRecord> {
        debug_assert!(
            self.records.back().is_none_or(|last| last.round <= rec.round),
            "history rounds must not decrease"
        );
        self.records.push_back(rec);
        if self.records.len() > self.capacity {
            self.records.pop_front()
        } else {
            None
        }
    }

    /// True when some in-window record carries malicious content of `strain`.
    pub fn has_malicious(&self, strain: Strain) -> bool {
        self.records.iter().any(|r| {
            matches!(r.question, QuestionClass::MaliciousQ(s) if s == strain)
                || matches!(r.answer, AnswerClass::MaliciousA(s) if s == strain)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentRole {
    Normal,
    Cowpox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryContext {
    BenignCtx,
    MaliciousCtx(Strain),
}

/// Context from the history window: the most recent malicious record wins.
pub fn derive_context(history: &History) -> QueryContext {
    history
        .records()
        .rev()
        .find_map(ChatRecord::malicious_strain)
        .map_or(QueryContext::BenignCtx, QueryContext::MaliciousCtx)
}

/// A cure waiting out its generation delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingCure {
    pub due_round: u32,
    pub replaces: SampleId,
    pub cure: Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub role: AgentRole,
    pub album: Album,
    pub history: History,
    /// Benign samples seen by a Cowpox agent; empty for normal agents.
    pub benign_bank: VecDeque<Sample>,
    pub bank_capacity: usize,
    pub once_infected: bool,
    pub pending_cures: Vec<PendingCure>,
}

impl Agent {
    pub fn new(id: AgentId, role: AgentRole, album_capacity: usize, history_capacity: usize) -> Result<Self> {
        Ok(Agent {
            id,
            role,
            album: Album::new(album_capacity)?,
            history: History::new(history_capacity)?,
            benign_bank: VecDeque::new(),
            bank_capacity: 0,
            once_infected: false,
            pending_cures: Vec::new(),
        })
    }

    pub fn is_cowpox(&self) -> bool {
        self.role == AgentRole::Cowpox
    }

    /// Records a benign sample in the bank (Cowpox agents only).
    pub fn bank_benign(&mut self, s: &Sample) {
        if !self.is_cowpox() || !s.is_benign() || self.bank_capacity == 0 {
            return;
        }
        self.benign_bank.push_back(s.clone());
        while self.benign_bank.len() > self.bank_capacity {
            self.benign_bank.pop_front();
        }
    }

    pub fn mark_infected(&mut self) {
        self.once_infected = true;
    }
}
