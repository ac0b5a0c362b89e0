//! Shared vocabulary: attributes, relation values, node identities and the
//! canonical orientation of object pairs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("unknown relation token `{0}`")]
    UnknownRelation(String),
    #[error("unregistered frame type `{0}`")]
    UnknownFrameType(String),
    #[error("identity pair `{0}` carries no information")]
    IdentityPair(String),
    #[error("malformed frame key `{0}`")]
    MalformedFrameKey(String),
}

/// A physical dimension along which two things are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attribute {
    Size,
    Weight,
    Strength,
    Rigidness,
    Speed,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Size,
        Attribute::Weight,
        Attribute::Strength,
        Attribute::Rigidness,
        Attribute::Speed,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Size => "size",
            Attribute::Weight => "weight",
            Attribute::Strength => "strength",
            Attribute::Rigidness => "rigidness",
            Attribute::Speed => "speed",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "size" => Ok(Attribute::Size),
            "weight" => Ok(Attribute::Weight),
            "strength" => Ok(Attribute::Strength),
            "rigidness" => Ok(Attribute::Rigidness),
            "speed" => Ok(Attribute::Speed),
            _ => Err(DomainError::UnknownAttribute(s.to_string())),
        }
    }
}

/// The three-way relation every random variable ranges over.
///
/// The discriminants fix the index order used by every potential table and
/// belief in the crate: `Gt = 0`, `Eq = 1`, `Lt = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationValue {
    Gt = 0,
    Eq = 1,
    Lt = 2,
}

impl RelationValue {
    pub const ALL: [RelationValue; 3] = [RelationValue::Gt, RelationValue::Eq, RelationValue::Lt];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Swaps the argument order: `x > y` is `y < x`.
    pub fn flip(self) -> Self {
        match self {
            RelationValue::Gt => RelationValue::Lt,
            RelationValue::Eq => RelationValue::Eq,
            RelationValue::Lt => RelationValue::Gt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelationValue::Gt => ">",
            RelationValue::Eq => "=",
            RelationValue::Lt => "<",
        }
    }
}

pub fn flip(r: RelationValue) -> RelationValue {
    r.flip()
}

impl fmt::Display for RelationValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for RelationValue {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            ">" | "gt" | "GT" => Ok(RelationValue::Gt),
            "=" | "~" | "eq" | "EQ" => Ok(RelationValue::Eq),
            "<" | "lt" | "LT" => Ok(RelationValue::Lt),
            _ => Err(DomainError::UnknownRelation(s.to_string())),
        }
    }
}

/// Semantic role of a frame argument, as mapped from its syntactic slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArgumentRole {
    Agent,
    Theme,
    Goal,
}

/// Which pair of syntactic slots a frame relates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FrameType {
    /// subject vs. direct object ("x threw y")
    Dobj,
    /// subject vs. prepositional object ("x walked into y")
    Pobj,
    /// direct object vs. prepositional object ("threw x into y")
    DobjPobj,
}

impl FrameType {
    pub const ALL: [FrameType; 3] = [FrameType::Dobj, FrameType::Pobj, FrameType::DobjPobj];

    pub fn tag(self) -> &'static str {
        match self {
            FrameType::Dobj => "dobj",
            FrameType::Pobj => "pobj",
            FrameType::DobjPobj => "dobj_pobj",
        }
    }

    /// Roles of the (x, y) arguments the frame relates.
    pub fn roles(self) -> (ArgumentRole, ArgumentRole) {
        match self {
            FrameType::Dobj => (ArgumentRole::Agent, ArgumentRole::Theme),
            FrameType::Pobj => (ArgumentRole::Agent, ArgumentRole::Goal),
            FrameType::DobjPobj => (ArgumentRole::Theme, ArgumentRole::Goal),
        }
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FrameType {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FrameType::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| DomainError::UnknownFrameType(s.to_string()))
    }
}

/// A verb used in one frame relation, optionally specialised to a preposition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frame {
    pub verb: String,
    pub frame_type: FrameType,
    pub preposition: Option<String>,
}

impl Frame {
    pub fn new(verb: impl Into<String>, frame_type: FrameType, preposition: Option<&str>) -> Self {
        Frame {
            verb: verb.into(),
            frame_type,
            preposition: preposition.map(str::to_string),
        }
    }

    /// `verb:type:prep`, with `-` for a missing preposition.
    pub fn key(&self) -> String {
        format!(
            "{}:{}:{}",
            self.verb,
            self.frame_type,
            self.preposition.as_deref().unwrap_or("-")
        )
    }

    pub fn parse_key(key: &str) -> Result<Self, DomainError> {
        let parts: Vec<&str> = key.split(':').collect();
        let [verb, ty, prep] = parts[..] else {
            return Err(DomainError::MalformedFrameKey(key.to_string()));
        };
        if verb.is_empty() || prep.is_empty() {
            return Err(DomainError::MalformedFrameKey(key.to_string()));
        }
        let preposition = (prep != "-").then_some(prep);
        Ok(Frame::new(verb, ty.parse()?, preposition))
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// An unordered pair of distinct objects, stored in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectPair {
    x: String,
    y: String,
}

impl ObjectPair {
    /// Orders the pair; the flag is true when the input order was swapped.
    pub fn new(x: &str, y: &str) -> Result<(Self, bool), DomainError> {
        if x == y {
            return Err(DomainError::IdentityPair(x.to_string()));
        }
        let swapped = x > y;
        let (x, y) = if swapped { (y, x) } else { (x, y) };
        Ok((
            ObjectPair {
                x: x.to_string(),
                y: y.to_string(),
            },
            swapped,
        ))
    }

    pub fn x(&self) -> &str {
        &self.x
    }

    pub fn y(&self) -> &str {
        &self.y
    }

    pub fn key(&self) -> String {
        format!("{}|{}", self.x, self.y)
    }

    /// The partner of `obj` in this pair, with a flag telling whether `obj`
    /// sits on the left.
    pub fn other(&self, obj: &str) -> Option<(&str, bool)> {
        if self.x == obj {
            Some((&self.y, true))
        } else if self.y == obj {
            Some((&self.x, false))
        } else {
            None
        }
    }
}

impl fmt::Display for ObjectPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.x, self.y)
    }
}

/// Typed identity of one random variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    ObjectPair { pair: ObjectPair, attribute: Attribute },
    Frame { frame: Frame, attribute: Attribute },
}

/// Whether a node describes frames or object pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeClass {
    Frame,
    ObjectPair,
}

impl NodeClass {
    pub fn name(self) -> &'static str {
        match self {
            NodeClass::Frame => "frame",
            NodeClass::ObjectPair => "object",
        }
    }
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeClass {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frame" | "frames" => Ok(NodeClass::Frame),
            "object" | "objects" | "pair" | "pairs" => Ok(NodeClass::ObjectPair),
            _ => Err(DomainError::MalformedFrameKey(s.to_string())),
        }
    }
}

impl NodeRef {
    pub fn attribute(&self) -> Attribute {
        match self {
            NodeRef::ObjectPair { attribute, .. } | NodeRef::Frame { attribute, .. } => *attribute,
        }
    }

    pub fn class(&self) -> NodeClass {
        match self {
            NodeRef::ObjectPair { .. } => NodeClass::ObjectPair,
            NodeRef::Frame { .. } => NodeClass::Frame,
        }
    }

    pub fn frame(frame: Frame, attribute: Attribute) -> Self {
        NodeRef::Frame { frame, attribute }
    }

    pub fn pair(pair: ObjectPair, attribute: Attribute) -> Self {
        NodeRef::ObjectPair { pair, attribute }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::ObjectPair { pair, attribute } => write!(f, "O:{attribute}:{pair}"),
            NodeRef::Frame { frame, attribute } => write!(f, "F:{attribute}:{frame}"),
        }
    }
}

/// Stores `x r y` once per unordered pair; `r` is flipped iff the ids swap.
pub fn canonicalize(
    x: &str,
    y: &str,
    r: RelationValue,
    attribute: Attribute,
) -> Result<(NodeRef, RelationValue), DomainError> {
    let (pair, swapped) = ObjectPair::new(x, y)?;
    let r = if swapped { r.flip() } else { r };
    Ok((NodeRef::pair(pair, attribute), r))
}

/// A distribution over the three relation values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief([f64; 3]);

impl Belief {
    pub fn uniform() -> Self {
        Belief([1.0 / 3.0; 3])
    }

    /// Normalizes nonnegative weights. An all-zero or non-finite input
    /// becomes uniform.
    pub fn normalized(weights: [f64; 3]) -> Self {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Belief::uniform();
        }
        Belief(weights.map(|w| w / total))
    }

    /// Normalizes unnormalized log-weights with max subtraction.
    pub fn from_log(logs: [f64; 3]) -> Self {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Belief::uniform();
        }
        Belief::normalized(logs.map(|l| (l - max).exp()))
    }

    pub fn probs(&self) -> [f64; 3] {
        self.0
    }

    pub fn get(&self, r: RelationValue) -> f64 {
        self.0[r.index()]
    }

    /// The same belief seen from the reversed pair orientation.
    pub fn flipped(&self) -> Self {
        let [gt, eq, lt] = self.0;
        Belief([lt, eq, gt])
    }

    /// Most probable value; ties go to the lower index (GT first).
    pub fn argmax(&self) -> RelationValue {
        let mut best = 0;
        for i in 1..3 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        RelationValue::ALL[best]
    }

    pub fn max_abs_diff(&self, other: &Belief) -> f64 {
        (0..3)
            .map(|i| (self.0[i] - other.0[i]).abs())
            .fold(0.0, f64::max)
    }
}

impl Default for Belief {
    fn default() -> Self {
        Belief::uniform()
    }
}
