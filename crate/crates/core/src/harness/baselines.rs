use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{items_in, score};
use super::{decide, AccuracyReport, HarnessError, TaskSpec};
use crate::builder::ModelSet;
use crate::domain::{Attribute, NodeRef, RelationValue};
use crate::lexstats::{KnowledgeDataset, Split};
use crate::maxent::{predict_proba, Featurizer, ModelKey};

/// The dataset viewed under the task's split profiles.
pub(crate) fn under_profiles<'d>(
    dataset: &'d KnowledgeDataset,
    spec: &TaskSpec,
) -> Result<Cow<'d, KnowledgeDataset>, HarnessError> {
    if dataset.profiles() == spec.profiles() {
        Ok(Cow::Borrowed(dataset))
    } else {
        Ok(Cow::Owned(dataset.with_profiles(spec.profiles())?))
    }
}

fn uniform_choice(rng: &mut ChaCha8Rng) -> RelationValue {
    RelationValue::ALL[rng.gen_range(0..3)]
}

pub fn baseline_random(dataset: &KnowledgeDataset, spec: &TaskSpec, rng_seed: u64) -> Result<AccuracyReport, HarnessError> {
    let ds = under_profiles(dataset, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (counts, _) = score(&ds, spec, |_| Ok((uniform_choice(&mut rng), None)))?;
    Ok(AccuracyReport::from_counts("random", *spec, &counts, true, 0, format!("rng={rng_seed}")))
}

/// Overall accuracy of `resamples` independent random guessers. Gold labels
/// are read once.
pub fn random_resample_accuracies(
    dataset: &KnowledgeDataset,
    spec: &TaskSpec,
    rng_seed: u64,
    resamples: usize,
) -> Result<Vec<f64>, HarnessError> {
    let ds = under_profiles(dataset, spec)?;
    let (_, rows) = score(&ds, spec, |_| Ok((RelationValue::Gt, None)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut counts: BTreeMap<Attribute, (usize, usize)> = BTreeMap::new();
        for r in &rows {
            let e = counts.entry(r.node.attribute()).or_default();
            e.1 += 1;
            if uniform_choice(&mut rng) == r.gold {
                e.0 += 1;
            }
        }
        out.push(AccuracyReport::from_counts("random", *spec, &counts, true, 0, String::new()).overall);
    }
    Ok(out)
}

/// Predicts each attribute's most frequent seed label of the predicted
/// class. Count ties go to the lower relation index.
pub fn baseline_majority(dataset: &KnowledgeDataset, spec: &TaskSpec) -> Result<AccuracyReport, HarnessError> {
    let ds = under_profiles(dataset, spec)?;
    let class = spec.class();
    let seeds = items_in(&ds, class, Split::Seed);
    let mut majority = BTreeMap::new();
    for a in Attribute::ALL {
        let mut tally = [0usize; 3];
        for &i in &seeds {
            if let Some(r) = ds.label(class, i, a) {
                tally[r.index()] += 1;
            }
        }
        let evaluated = (0..ds.len_of(class))
            .any(|i| ds.split_of(class, i) == spec.eval_split && ds.has_attribute(class, i, a));
        if tally.iter().sum::<usize>() == 0 {
            if evaluated {
                return Err(HarnessError::EmptySeed(format!("{class} {a}")));
            }
            continue;
        }
        let best = (0..3).fold(0, |b, i| if tally[i] > tally[b] { i } else { b });
        majority.insert(a, RelationValue::ALL[best]);
    }
    let (counts, _) = score(&ds, spec, |node| Ok((majority[&node.attribute()], None)))?;
    Ok(AccuracyReport::from_counts("majority", *spec, &counts, true, 0, String::new()))
}

/// Classifies every eval item with its (attribute, class) model alone.
pub fn baseline_emb_maxent(
    dataset: &KnowledgeDataset,
    spec: &TaskSpec,
    featurizer: &Featurizer<'_>,
    models: &ModelSet,
) -> Result<AccuracyReport, HarnessError> {
    let ds = under_profiles(dataset, spec)?;
    let (counts, _) = score(&ds, spec, |node| {
        let key = ModelKey {
            attribute: node.attribute(),
            class: node.class(),
        };
        let model = models
            .get(&key)
            .ok_or(crate::builder::BuildError::MissingModel(key))?;
        let x = match node {
            NodeRef::Frame { frame, .. } => featurizer.frame(frame)?,
            NodeRef::ObjectPair { pair, .. } => featurizer.pair(pair),
        };
        let b = predict_proba(model, &x)?;
        Ok((decide(&b), Some(b)))
    })?;
    Ok(AccuracyReport::from_counts("emb-maxent", *spec, &counts, true, 0, String::new()))
}
