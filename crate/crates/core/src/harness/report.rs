use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::{HarnessError, TaskSpec};
use crate::domain::{Attribute, Belief, NodeRef, RelationValue};
use crate::lexstats::{KnowledgeDataset, Split};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeScore {
    pub attribute: Attribute,
    pub correct: usize,
    pub total: usize,
    /// Zero when there is nothing to score.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub method: String,
    pub spec: TaskSpec,
    pub attributes: Vec<AttributeScore>,
    /// Unweighted mean over the attributes that have eval items.
    pub overall: f64,
    /// Pooled accuracy over all eval items.
    pub micro: f64,
    pub converged: bool,
    pub iterations: usize,
    pub fingerprint: String,
}

/// One scored eval item.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub node: NodeRef,
    pub gold: RelationValue,
    pub predicted: RelationValue,
    pub belief: Option<Belief>,
}

impl AccuracyReport {
    pub fn from_counts(
        method: &str,
        spec: TaskSpec,
        counts: &BTreeMap<Attribute, (usize, usize)>,
        converged: bool,
        iterations: usize,
        fingerprint: String,
    ) -> Self {
        let attributes: Vec<AttributeScore> = Attribute::ALL
            .iter()
            .map(|&a| {
                let (correct, total) = counts.get(&a).copied().unwrap_or((0, 0));
                AttributeScore {
                    attribute: a,
                    correct,
                    total,
                    accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
                }
            })
            .collect();
        let scored: Vec<f64> = attributes.iter().filter(|s| s.total > 0).map(|s| s.accuracy).collect();
        let overall = if scored.is_empty() {
            0.0
        } else {
            scored.iter().sum::<f64>() / scored.len() as f64
        };
        let (c, t) = attributes
            .iter()
            .fold((0, 0), |(c, t), s| (c + s.correct, t + s.total));
        AccuracyReport {
            method: method.to_string(),
            spec,
            attributes,
            overall,
            micro: if t == 0 { 0.0 } else { c as f64 / t as f64 },
            converged,
            iterations,
            fingerprint,
        }
    }

    pub fn accuracy(&self, a: Attribute) -> f64 {
        self.attributes[a.index()].accuracy
    }

    pub fn total(&self) -> usize {
        self.attributes.iter().map(|s| s.total).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# method={} {} converged={} iterations={} fingerprint={}",
            self.method, self.spec, self.converged, self.iterations, self.fingerprint
        );
        s.push_str("attribute\tcorrect\ttotal\taccuracy\n");
        for a in &self.attributes {
            let _ = writeln!(s, "{}\t{}\t{}\t{:.4}", a.attribute, a.correct, a.total, a.accuracy);
        }
        let (c, t) = self
            .attributes
            .iter()
            .fold((0, 0), |(c, t), s| (c + s.correct, t + s.total));
        let _ = writeln!(s, "overall\t\t\t{:.4}", self.overall);
        let _ = writeln!(s, "micro\t{c}\t{t}\t{:.4}", self.micro);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) type Counts = BTreeMap<Attribute, (usize, usize)>;

/// Scores every eval-split item of the predicted class. Gold labels are
/// read only here, after `predict` has produced its answer.
pub(crate) fn score<F>(
    dataset: &KnowledgeDataset,
    spec: &TaskSpec,
    mut predict: F,
) -> Result<(Counts, Vec<Prediction>), HarnessError>
where
    F: FnMut(&NodeRef) -> Result<(RelationValue, Option<Belief>), HarnessError>,
{
    let class = spec.class();
    let mut counts = BTreeMap::new();
    let mut rows = Vec::new();
    for a in Attribute::ALL {
        for i in 0..dataset.len_of(class) {
            if dataset.split_of(class, i) != spec.eval_split || !dataset.has_attribute(class, i, a) {
                continue;
            }
            let node = item_node(dataset, class, i, a);
            let (predicted, belief) = predict(&node)?;
            let gold = dataset.label(class, i, a).expect("attribute checked above");
            let entry: &mut (usize, usize) = counts.entry(a).or_default();
            entry.1 += 1;
            if gold == predicted {
                entry.0 += 1;
            }
            rows.push(Prediction {
                node,
                gold,
                predicted,
                belief,
            });
        }
    }
    Ok((counts, rows))
}

pub(crate) fn item_node(dataset: &KnowledgeDataset, class: crate::domain::NodeClass, i: usize, a: Attribute) -> NodeRef {
    match class {
        crate::domain::NodeClass::Frame => NodeRef::frame(dataset.frames()[i].frame().clone(), a),
        crate::domain::NodeClass::ObjectPair => NodeRef::pair(dataset.pairs()[i].pair().clone(), a),
    }
}

/// Items of `class` in `split`, in dataset order.
pub(crate) fn items_in(dataset: &KnowledgeDataset, class: crate::domain::NodeClass, split: Split) -> Vec<usize> {
    (0..dataset.len_of(class))
        .filter(|&i| dataset.split_of(class, i) == split)
        .collect()
}

pub fn write_predictions<W: Write>(rows: &[Prediction], mut out: W) -> std::io::Result<()> {
    writeln!(out, "node\tattribute\tgold\tpredicted\tp_gt\tp_eq\tp_lt")?;
    for r in rows {
        write!(out, "{}\t{}\t{}\t{}", r.node, r.node.attribute(), r.gold, r.predicted)?;
        match r.belief {
            Some(b) => {
                let p = b.probs();
                writeln!(out, "\t{:.6}\t{:.6}\t{:.6}", p[0], p[1], p[2])?;
            }
            None => writeln!(out, "\t\t\t")?,
        }
    }
    Ok(())
}
