//! Log-linear three-class classifier over embedding features.
//!
//! Object pairs are featurized as `[g(x), g(y)]` and frames as
//! `[one-hot(type), g(verb), g(preposition)]`, where `g` is a word vector and
//! missing words (including an absent preposition) contribute zeros.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Mutex;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Attribute, Belief, Frame, FrameType, NodeClass, ObjectPair, RelationValue};
use crate::lexstats::EmbeddingStore;

#[derive(Debug, Error)]
pub enum MaxentError {
    #[error("feature length {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error("frame type `{0}` is not registered with the featurizer")]
    UnregisteredFrameType(FrameType),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Turns nodes into feature vectors using a verb store and an object store
/// (which also covers prepositions).
#[derive(Debug)]
pub struct Featurizer<'a> {
    verbs: &'a EmbeddingStore,
    objects: &'a EmbeddingStore,
    frame_types: Vec<FrameType>,
    warned: Mutex<BTreeSet<String>>,
}

impl<'a> Featurizer<'a> {
    pub fn new(verbs: &'a EmbeddingStore, objects: &'a EmbeddingStore) -> Self {
        Self::with_frame_types(verbs, objects, FrameType::ALL.to_vec())
    }

    pub fn with_frame_types(
        verbs: &'a EmbeddingStore,
        objects: &'a EmbeddingStore,
        frame_types: Vec<FrameType>,
    ) -> Self {
        Featurizer {
            verbs,
            objects,
            frame_types,
            warned: Mutex::new(BTreeSet::new()),
        }
    }

    pub fn dim(&self, class: NodeClass) -> usize {
        match class {
            NodeClass::ObjectPair => 2 * self.objects.dim(),
            NodeClass::Frame => self.frame_types.len() + self.verbs.dim() + self.objects.dim(),
        }
    }

    fn append(&self, store: &EmbeddingStore, word: &str, out: &mut Vec<f64>) {
        match store.get(word) {
            Some(v) => out.extend_from_slice(v),
            None => {
                if self.warned.lock().expect("poisoned").insert(word.to_string()) {
                    warn!("no embedding for `{word}`, using zeros");
                }
                out.extend(std::iter::repeat_n(0.0, store.dim()));
            }
        }
    }

    pub fn object_pair(&self, x: &str, y: &str) -> FeatureVector {
        let mut out = Vec::with_capacity(self.dim(NodeClass::ObjectPair));
        self.append(self.objects, x, &mut out);
        self.append(self.objects, y, &mut out);
        FeatureVector(out)
    }

    pub fn pair(&self, pair: &ObjectPair) -> FeatureVector {
        self.object_pair(pair.x(), pair.y())
    }

    pub fn frame_parts(
        &self,
        verb: &str,
        frame_type: FrameType,
        preposition: Option<&str>,
    ) -> Result<FeatureVector, MaxentError> {
        let slot = self
            .frame_types
            .iter()
            .position(|t| *t == frame_type)
            .ok_or(MaxentError::UnregisteredFrameType(frame_type))?;
        let mut out = vec![0.0; self.frame_types.len()];
        out[slot] = 1.0;
        self.append(self.verbs, verb, &mut out);
        match preposition {
            Some(p) => self.append(self.objects, p, &mut out),
            None => out.extend(std::iter::repeat_n(0.0, self.objects.dim())),
        }
        Ok(FeatureVector(out))
    }

    pub fn frame(&self, frame: &Frame) -> Result<FeatureVector, MaxentError> {
        self.frame_parts(&frame.verb, frame.frame_type, frame.preposition.as_deref())
    }
}

pub fn featurize_object_pair(p: &str, q: &str, featurizer: &Featurizer<'_>) -> FeatureVector {
    featurizer.object_pair(p, q)
}

pub fn featurize_frame(
    verb: &str,
    frame_type: FrameType,
    preposition: Option<&str>,
    featurizer: &Featurizer<'_>,
) -> Result<FeatureVector, MaxentError> {
    featurizer.frame_parts(verb, frame_type, preposition)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub rng_seed: u64,
    /// Adds a per-class intercept (not regularized).
    pub fit_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2_lambda: 1e-3,
            learning_rate: 0.1,
            epochs: 500,
            rng_seed: 0,
            fit_bias: true,
        }
    }
}

/// One model per (attribute, node class).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModelKey {
    pub attribute: Attribute,
    pub class: NodeClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxentModel {
    pub key: ModelKey,
    dim: usize,
    /// Row-major 3 x dim.
    weights: Vec<f64>,
    bias: [f64; 3],
    fit_bias: bool,
}

impl MaxentModel {
    pub fn zeros(key: ModelKey, dim: usize, fit_bias: bool) -> Self {
        MaxentModel {
            key,
            dim,
            weights: vec![0.0; 3 * dim],
            bias: [0.0; 3],
            fit_bias,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self, r: RelationValue) -> &[f64] {
        &self.weights[r.index() * self.dim..(r.index() + 1) * self.dim]
    }

    pub fn bias(&self) -> [f64; 3] {
        self.bias
    }

    /// Flat parameter vector: weights row-major, then the bias if fitted.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        if self.fit_bias {
            p.extend_from_slice(&self.bias);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let n = 3 * self.dim;
        self.weights.copy_from_slice(&params[..n]);
        if self.fit_bias {
            self.bias.copy_from_slice(&params[n..n + 3]);
        }
    }

    pub fn scores(&self, x: &[f64]) -> Result<[f64; 3], MaxentError> {
        if x.len() != self.dim {
            return Err(MaxentError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut s = self.bias;
        for (c, score) in s.iter_mut().enumerate() {
            let row = &self.weights[c * self.dim..(c + 1) * self.dim];
            *score += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        Ok(s)
    }

    /// L2-regularized mean negative log-likelihood and its gradient with
    /// respect to [`params`](Self::params).
    pub fn objective(
        &self,
        examples: &[(FeatureVector, RelationValue)],
        l2_lambda: f64,
    ) -> Result<(f64, Vec<f64>), MaxentError> {
        let n = examples.len() as f64;
        let d = self.dim;
        let mut grad = vec![0.0; self.params().len()];
        let mut loss = 0.0;
        for (x, y) in examples {
            let s = self.scores(x.as_slice())?;
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss -= s[y.index()] - log_z;
            for c in 0..3 {
                let resid = (s[c] - log_z).exp() - if c == y.index() { 1.0 } else { 0.0 };
                let row = &mut grad[c * d..(c + 1) * d];
                for (g, v) in row.iter_mut().zip(x.as_slice()) {
                    *g += resid * v / n;
                }
                if self.fit_bias {
                    grad[3 * d + c] += resid / n;
                }
            }
        }
        loss /= n;
        loss += 0.5 * l2_lambda * self.weights.iter().map(|w| w * w).sum::<f64>();
        for (g, w) in grad.iter_mut().zip(&self.weights) {
            *g += l2_lambda * w;
        }
        Ok((loss, grad))
    }

    /// Writes `attribute=.. class=.. dims=.. bias=..`, then one row per class:
    /// the relation symbol, its bias, and its weights.
    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "attribute={} class={} dims={} bias={}",
            self.key.attribute,
            self.key.class,
            self.dim,
            u8::from(self.fit_bias)
        )?;
        for r in RelationValue::ALL {
            let mut line = format!("{}\t{:?}", r.symbol(), self.bias[r.index()]);
            for w in self.weights(r) {
                write!(line, " {w:?}").expect("string write");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self, MaxentError> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, msg: String| MaxentError::Parse { line: line + 1, msg };
        let (i, header) = lines.next().ok_or_else(|| parse_err(0, "empty model file".into()))?;
        let header = header?;
        let mut attribute = None;
        let mut class = None;
        let mut dims = None;
        let mut fit_bias = true;
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| parse_err(i, format!("bad header field `{field}`")))?;
            match k {
                "attribute" => attribute = Some(v.parse::<Attribute>().map_err(|e| parse_err(i, e.to_string()))?),
                "class" => class = Some(v.parse::<NodeClass>().map_err(|e| parse_err(i, e.to_string()))?),
                "dims" => dims = Some(v.parse::<usize>().map_err(|e| parse_err(i, e.to_string()))?),
                "bias" => fit_bias = v == "1",
                _ => return Err(parse_err(i, format!("unknown header key `{k}`"))),
            }
        }
        let (Some(attribute), Some(class), Some(dim)) = (attribute, class, dims) else {
            return Err(parse_err(i, "header needs attribute, class and dims".into()));
        };
        let mut model = MaxentModel::zeros(ModelKey { attribute, class }, dim, fit_bias);
        for r in RelationValue::ALL {
            let (i, line) = lines
                .next()
                .ok_or_else(|| parse_err(r.index() + 1, "missing class row".into()))?;
            let line = line?;
            let (sym, rest) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i, "missing tab after class symbol".into()))?;
            if sym != r.symbol() {
                return Err(parse_err(i, format!("expected row `{}`, found `{sym}`", r.symbol())));
            }
            let values = rest
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| parse_err(i, e.to_string()))?;
            if values.len() != dim + 1 {
                return Err(parse_err(i, format!("expected {} values, found {}", dim + 1, values.len())));
            }
            model.bias[r.index()] = values[0];
            model.weights[r.index() * dim..(r.index() + 1) * dim].copy_from_slice(&values[1..]);
        }
        Ok(model)
    }
}

pub fn predict_proba(model: &MaxentModel, x: &FeatureVector) -> Result<Belief, MaxentError> {
    Ok(Belief::from_log(model.scores(x.as_slice())?))
}

/// Full-batch gradient descent on the regularized log-loss. Returns the
/// model and the loss before each epoch plus the final loss.
///
/// A step that would raise the loss is retried with half the step size, so
/// the recorded losses never increase.
pub fn train_with_history(
    key: ModelKey,
    examples: &[(FeatureVector, RelationValue)],
    cfg: &TrainConfig,
) -> Result<(MaxentModel, Vec<f64>), MaxentError> {
    if cfg.epochs < 1 {
        return Err(MaxentError::Config("epochs must be at least 1".into()));
    }
    if !(cfg.learning_rate > 0.0) || !(cfg.l2_lambda >= 0.0) {
        return Err(MaxentError::Config("learning_rate must be > 0 and l2_lambda >= 0".into()));
    }
    let dim = examples.first().ok_or(MaxentError::EmptyTrainingSet)?.0.len();
    if let Some((x, _)) = examples.iter().find(|(x, _)| x.len() != dim) {
        return Err(MaxentError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }

    let mut model = MaxentModel::zeros(key, dim, cfg.fit_bias);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let init: Vec<f64> = (0..model.params().len())
        .map(|_| rng.gen_range(-0.01..0.01))
        .collect();
    model.set_params(&init);

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let (mut loss, mut grad) = model.objective(examples, cfg.l2_lambda)?;
    let mut step = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        history.push(loss);
        let params = model.params();
        let mut candidate = model.clone();
        loop {
            let next: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            candidate.set_params(&next);
            let (l, g) = candidate.objective(examples, cfg.l2_lambda)?;
            if l <= loss || step < 1e-12 {
                if l <= loss {
                    model = candidate;
                    loss = l;
                    grad = g;
                }
                break;
            }
            step *= 0.5;
        }
    }
    history.push(loss);
    Ok((model, history))
}

pub fn train(
    key: ModelKey,
    examples: &[(FeatureVector, RelationValue)],
    cfg: &TrainConfig,
) -> Result<MaxentModel, MaxentError> {
    train_with_history(key, examples, cfg).map(|(m, _)| m)
}
