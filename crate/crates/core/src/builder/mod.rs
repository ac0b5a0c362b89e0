//! Assembles the knowledge factor graph: one frame node and one object-pair
//! node per usable item and attribute, tied together by seed, classifier,
//! selectional-preference, similarity and cross-attribute factors.

mod config;

pub use config::BuildConfig;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use log::debug;
use thiserror::Error;

use crate::domain::{Attribute, Frame, NodeClass, NodeRef, ObjectPair, RelationValue};
use crate::factorgraph::{FactorGraph, FactorKind, GraphError, PotentialTable, VarId};
use crate::lexstats::{cosine, pmi, CooccurrenceStats, DataError, EmbeddingStore, KnowledgeDataset, Split};
use crate::maxent::{predict_proba, Featurizer, MaxentError, MaxentModel, ModelKey};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("no trained model for {} {} nodes", .0.attribute, .0.class)]
    MissingModel(ModelKey),
    #[error("invalid build config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Maxent(#[from] MaxentError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// The fixed agreement potential, rows and columns in (GT, EQ, LT) order.
pub const SOFT_ONE: [[f64; 3]; 3] = [[0.7, 0.1, 0.2], [0.15, 0.7, 0.15], [0.2, 0.1, 0.7]];

/// Potential that rewards opposite decisions: `D[a][b] = M[flip(a)][b]`.
pub fn flipped_table(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut d = [[0.0; 3]; 3];
    for a in RelationValue::ALL {
        for b in RelationValue::ALL {
            d[a.index()][b.index()] = m[a.flip().index()][b.index()];
        }
    }
    d
}

/// Seed potential: the gold label's row of the agreement matrix.
pub fn seed_row(gold: RelationValue) -> [f64; 3] {
    SOFT_ONE[gold.index()]
}

fn agree() -> PotentialTable {
    PotentialTable::Binary(SOFT_ONE)
}

fn oppose() -> PotentialTable {
    PotentialTable::Binary(flipped_table(&SOFT_ONE))
}

/// Trained classifiers keyed by (attribute, node class).
pub type ModelSet = BTreeMap<ModelKey, MaxentModel>;

/// Bidirectional map between graph variables and the nodes they stand for.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeMap {
    ids: BTreeMap<NodeRef, VarId>,
    nodes: Vec<NodeRef>,
}

impl NodeMap {
    pub fn get(&self, node: &NodeRef) -> Option<VarId> {
        self.ids.get(node).copied()
    }

    pub fn frame(&self, frame: &Frame, attribute: Attribute) -> Option<VarId> {
        self.get(&NodeRef::frame(frame.clone(), attribute))
    }

    pub fn pair(&self, pair: &ObjectPair, attribute: Attribute) -> Option<VarId> {
        self.get(&NodeRef::pair(pair.clone(), attribute))
    }

    pub fn node(&self, v: VarId) -> &NodeRef {
        &self.nodes[v.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &NodeRef)> {
        self.nodes.iter().enumerate().map(|(i, n)| (VarId(i), n))
    }
}

/// Node and factor counts of one build.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub frame_nodes: usize,
    pub pair_nodes: usize,
    pub factors: BTreeMap<FactorKind, usize>,
}

impl BuildReport {
    pub fn total_factors(&self) -> usize {
        self.factors.values().sum()
    }

    /// `kind<TAB>count` for every kind, then node counts.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("kind\tcount\n");
        for k in FactorKind::ALL {
            let _ = writeln!(s, "{k}\t{}", self.factors.get(&k).copied().unwrap_or(0));
        }
        let _ = writeln!(s, "frame_nodes\t{}", self.frame_nodes);
        let _ = writeln!(s, "pair_nodes\t{}", self.pair_nodes);
        s
    }

    pub fn merge(&mut self, other: &BuildReport) {
        self.frame_nodes += other.frame_nodes;
        self.pair_nodes += other.pair_nodes;
        for (k, c) in &other.factors {
            *self.factors.entry(*k).or_default() += c;
        }
    }
}

pub struct BuildInputs<'a> {
    pub dataset: &'a KnowledgeDataset,
    pub featurizer: &'a Featurizer<'a>,
    pub verb_embeddings: &'a EmbeddingStore,
    pub object_embeddings: &'a EmbeddingStore,
    pub stats: &'a CooccurrenceStats,
    pub models: &'a ModelSet,
}

#[derive(Debug, Clone)]
pub struct BuiltGraph {
    pub graph: FactorGraph,
    pub nodes: NodeMap,
    pub attributes: Vec<Attribute>,
    pub report: BuildReport,
}

/// Incremental construction of one graph over a fixed attribute set.
pub struct GraphBuilder<'c> {
    cfg: &'c BuildConfig,
    attributes: Vec<Attribute>,
    graph: FactorGraph,
    nodes: NodeMap,
    seen: HashSet<(FactorKind, Vec<VarId>)>,
}

impl<'c> GraphBuilder<'c> {
    /// Creates one variable per usable (item, attribute), attributes in
    /// order, frames before pairs.
    pub fn new(dataset: &KnowledgeDataset, attributes: &[Attribute], cfg: &'c BuildConfig) -> Result<Self, BuildError> {
        cfg.validate()?;
        let mut attributes = attributes.to_vec();
        attributes.sort();
        attributes.dedup();
        let mut b = GraphBuilder {
            cfg,
            attributes,
            graph: FactorGraph::new(),
            nodes: NodeMap::default(),
            seen: HashSet::new(),
        };
        for &a in &b.attributes.clone() {
            for item in dataset.frames().iter().filter(|f| f.has_attribute(a)) {
                b.add_node(NodeRef::frame(item.frame().clone(), a));
            }
            for item in dataset.pairs().iter().filter(|p| p.has_attribute(a)) {
                b.add_node(NodeRef::pair(item.pair().clone(), a));
            }
        }
        Ok(b)
    }

    fn add_node(&mut self, node: NodeRef) {
        let v = self.graph.add_variable(node.to_string());
        self.nodes.ids.insert(node.clone(), v);
        self.nodes.nodes.push(node);
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn nodes(&self) -> &NodeMap {
        &self.nodes
    }

    /// Adds a factor unless one of the same kind already covers the same
    /// unordered scope. Returns whether it was added.
    fn add(&mut self, kind: FactorKind, scope: &[VarId], table: PotentialTable) -> Result<bool, BuildError> {
        if !self.cfg.enables(kind) {
            return Ok(false);
        }
        let mut key = scope.to_vec();
        key.sort();
        if !self.seen.insert((kind, key)) {
            return Ok(false);
        }
        self.graph.add_factor(kind, scope, table)?;
        Ok(true)
    }

    /// Seed rows for seed-split items and classifier potentials for every
    /// node, per the enabled kinds and classes.
    pub fn add_seed_and_emb_factors(
        &mut self,
        dataset: &KnowledgeDataset,
        featurizer: &Featurizer<'_>,
        models: &ModelSet,
    ) -> Result<(), BuildError> {
        if self.cfg.enables(FactorKind::Seed) {
            for &a in &self.attributes.clone() {
                for class in [NodeClass::Frame, NodeClass::ObjectPair] {
                    if !self.cfg.seed_classes.contains(&class) {
                        continue;
                    }
                    for i in 0..dataset.len_of(class) {
                        if dataset.split_of(class, i) != Split::Seed || !dataset.has_attribute(class, i, a) {
                            continue;
                        }
                        let Some(gold) = dataset.label(class, i, a) else { continue };
                        let v = self.item_var(dataset, class, i, a);
                        self.add(FactorKind::Seed, &[v], PotentialTable::unary(seed_row(gold))?)?;
                    }
                }
            }
        }

        if self.cfg.enables(FactorKind::Emb) {
            let targets: Vec<(VarId, NodeRef)> = self
                .nodes
                .iter()
                .filter(|(_, n)| self.cfg.emb_classes.contains(&n.class()))
                .map(|(v, n)| (v, n.clone()))
                .collect();
            for (v, node) in targets {
                let key = ModelKey {
                    attribute: node.attribute(),
                    class: node.class(),
                };
                let model = models.get(&key).ok_or(BuildError::MissingModel(key))?;
                let features = match &node {
                    NodeRef::Frame { frame, .. } => featurizer.frame(frame)?,
                    NodeRef::ObjectPair { pair, .. } => featurizer.pair(pair),
                };
                let p = predict_proba(model, &features)?.probs().map(|x| x.max(1e-12));
                self.add(FactorKind::Emb, &[v], PotentialTable::unary(p)?)?;
            }
        }
        Ok(())
    }

    fn item_var(&self, dataset: &KnowledgeDataset, class: NodeClass, i: usize, a: Attribute) -> VarId {
        let node = match class {
            NodeClass::Frame => NodeRef::frame(dataset.frames()[i].frame().clone(), a),
            NodeClass::ObjectPair => NodeRef::pair(dataset.pairs()[i].pair().clone(), a),
        };
        self.nodes.get(&node).expect("every usable item has a node")
    }

    /// Links frames to the object pairs observed filling them, when their
    /// PMI clears the threshold. A pair stored in the reverse of the frame's
    /// argument order gets the opposing table.
    pub fn add_selectional_preference_factors(&mut self, stats: &CooccurrenceStats) -> Result<(), BuildError> {
        if !self.cfg.enables(FactorKind::SelPref) {
            return Ok(());
        }
        for (frame_key, x, y, _) in stats.entries() {
            let Ok(frame) = Frame::parse_key(frame_key) else {
                debug!("skipping co-occurrence row with unusable frame key `{frame_key}`");
                continue;
            };
            let Ok((pair, swapped)) = ObjectPair::new(x, y) else { continue };
            let score = pmi(stats, frame_key, x, y)?;
            if !(score > self.cfg.pmi_threshold) {
                continue;
            }
            for &a in &self.attributes.clone() {
                let (Some(f), Some(o)) = (self.nodes.frame(&frame, a), self.nodes.pair(&pair, a)) else {
                    continue;
                };
                let table = if swapped { oppose() } else { agree() };
                self.add(FactorKind::SelPref, &[f, o], table)?;
            }
        }
        Ok(())
    }

    /// Verb, frame and object similarity factors.
    pub fn add_similarity_factors(
        &mut self,
        dataset: &KnowledgeDataset,
        verbs: &EmbeddingStore,
        objects: &EmbeddingStore,
    ) -> Result<(), BuildError> {
        let mut frames_by_verb: BTreeMap<&str, Vec<&Frame>> = BTreeMap::new();
        for item in dataset.frames() {
            frames_by_verb.entry(&item.frame().verb).or_default().push(item.frame());
        }

        if self.cfg.enables(FactorKind::VerbSim) {
            let verb_list: Vec<&str> = frames_by_verb.keys().copied().collect();
            for (i, u) in verb_list.iter().enumerate() {
                let Some(gu) = verbs.get(u) else { continue };
                for v in &verb_list[i + 1..] {
                    let Some(gv) = verbs.get(v) else { continue };
                    if !(cosine(gu, gv)? > self.cfg.verb_sim_threshold) {
                        continue;
                    }
                    for fu in &frames_by_verb[u] {
                        for fv in frames_by_verb[v].iter().filter(|fv| corresponding_frames(fu, fv)) {
                            self.link_frames(FactorKind::VerbSim, fu, fv)?;
                        }
                    }
                }
            }
        }

        if self.cfg.enables(FactorKind::FrameSim) {
            for frames in frames_by_verb.values() {
                for (i, fi) in frames.iter().enumerate() {
                    for fj in frames[i + 1..].iter().filter(|fj| similar_constructions(fi, fj)) {
                        self.link_frames(FactorKind::FrameSim, fi, fj)?;
                    }
                }
            }
        }

        if self.cfg.enables(FactorKind::ObjSim) {
            self.add_object_similarity(dataset, objects)?;
        }
        Ok(())
    }

    fn link_frames(&mut self, kind: FactorKind, a: &Frame, b: &Frame) -> Result<(), BuildError> {
        for &attr in &self.attributes.clone() {
            if let (Some(x), Some(y)) = (self.nodes.frame(a, attr), self.nodes.frame(b, attr)) {
                self.add(kind, &[x, y], agree())?;
            }
        }
        Ok(())
    }

    fn add_object_similarity(&mut self, dataset: &KnowledgeDataset, objects: &EmbeddingStore) -> Result<(), BuildError> {
        let names: Vec<&str> = dataset.objects().into_iter().collect();
        let mut similar = Vec::new();
        for (i, x) in names.iter().enumerate() {
            let Some(gx) = objects.get(x) else { continue };
            for y in &names[i + 1..] {
                let Some(gy) = objects.get(y) else { continue };
                if cosine(gx, gy)? > self.cfg.obj_sim_threshold {
                    similar.push((*x, *y));
                }
            }
        }

        for &a in &self.attributes.clone() {
            // object -> partner -> (node, object sits on the left)
            let mut adj: BTreeMap<&str, BTreeMap<&str, (VarId, bool)>> = BTreeMap::new();
            for item in dataset.pairs().iter().filter(|p| p.has_attribute(a)) {
                let p = item.pair();
                let v = self.nodes.pair(p, a).expect("usable pair has a node");
                adj.entry(p.x()).or_default().insert(p.y(), (v, true));
                adj.entry(p.y()).or_default().insert(p.x(), (v, false));
            }
            let empty = BTreeMap::new();
            for &(x, y) in &similar {
                let (ax, ay) = (adj.get(x).unwrap_or(&empty), adj.get(y).unwrap_or(&empty));
                for (z, &(vxz, x_left)) in ax {
                    if *z == y {
                        continue;
                    }
                    let Some(&(vyz, y_left)) = ay.get(z) else { continue };
                    // same side of z: agree; opposite sides: oppose
                    let table = if x_left == y_left { agree() } else { oppose() };
                    self.add(FactorKind::ObjSim, &[vxz, vyz], table)?;
                }
                if let Some(&(vxy, _)) = ax.get(y) {
                    self.add(FactorKind::ObjSim, &[vxy], PotentialTable::unary(seed_row(RelationValue::Eq))?)?;
                }
            }
        }
        Ok(())
    }

    /// Couples the same frame across two attributes when their shared seed
    /// frames agree often enough.
    pub fn add_attribute_factors(&mut self, dataset: &KnowledgeDataset) -> Result<(), BuildError> {
        if !self.cfg.enables(FactorKind::AttrSim) {
            return Ok(());
        }
        for (ai, &a) in self.attributes.clone().iter().enumerate() {
            for &b in &self.attributes.clone()[ai + 1..] {
                let Some(rate) = seed_agreement(dataset, a, b, self.cfg.attr_min_shared_frames) else {
                    continue;
                };
                if rate < self.cfg.attr_agreement_threshold {
                    continue;
                }
                for item in dataset.frames() {
                    if let (Some(x), Some(y)) = (self.nodes.frame(item.frame(), a), self.nodes.frame(item.frame(), b)) {
                        self.add(FactorKind::AttrSim, &[x, y], agree())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> BuiltGraph {
        let mut report = BuildReport::default();
        for (_, n) in self.nodes.iter() {
            match n.class() {
                NodeClass::Frame => report.frame_nodes += 1,
                NodeClass::ObjectPair => report.pair_nodes += 1,
            }
        }
        for k in FactorKind::ALL {
            report.factors.insert(k, self.graph.count_kind(k));
        }
        BuiltGraph {
            graph: self.graph,
            nodes: self.nodes,
            attributes: self.attributes,
            report,
        }
    }
}

/// Cross-verb correspondence: same frame type and preposition.
fn corresponding_frames(a: &Frame, b: &Frame) -> bool {
    a.frame_type == b.frame_type && a.preposition == b.preposition
}

/// Within-verb similarity: distinct frames whose first argument plays the
/// same role (e.g. the agent of both "x threw y" and "x threw at y").
pub fn similar_constructions(a: &Frame, b: &Frame) -> bool {
    a.verb == b.verb && a != b && a.frame_type.roles().0 == b.frame_type.roles().0
}

/// Fraction of frames seeded in both attributes whose labels agree, or
/// `None` when fewer than `min_shared` such frames exist.
pub fn seed_agreement(dataset: &KnowledgeDataset, a: Attribute, b: Attribute, min_shared: usize) -> Option<f64> {
    let mut shared = 0usize;
    let mut agree = 0usize;
    for (i, item) in dataset.frames().iter().enumerate() {
        if dataset.frame_split(i) != Split::Seed || !item.has_attribute(a) || !item.has_attribute(b) {
            continue;
        }
        shared += 1;
        if dataset.frame_label(i, a) == dataset.frame_label(i, b) {
            agree += 1;
        }
    }
    (shared > 0 && shared >= min_shared).then(|| agree as f64 / shared as f64)
}

/// Builds the graph over `attributes` with every enabled factor family.
pub fn build(attributes: &[Attribute], inputs: &BuildInputs<'_>, cfg: &BuildConfig) -> Result<BuiltGraph, BuildError> {
    let mut b = GraphBuilder::new(inputs.dataset, attributes, cfg)?;
    b.add_seed_and_emb_factors(inputs.dataset, inputs.featurizer, inputs.models)?;
    b.add_selectional_preference_factors(inputs.stats)?;
    b.add_similarity_factors(inputs.dataset, inputs.verb_embeddings, inputs.object_embeddings)?;
    b.add_attribute_factors(inputs.dataset)?;
    Ok(b.finish())
}

/// Every attribute that has at least one usable item.
pub fn present_attributes(dataset: &KnowledgeDataset) -> Vec<Attribute> {
    let set: BTreeSet<Attribute> = dataset
        .frames()
        .iter()
        .flat_map(|f| f.attributes())
        .chain(dataset.pairs().iter().flat_map(|p| p.attributes()))
        .collect();
    set.into_iter().collect()
}

#[cfg(test)]
mod tests;
