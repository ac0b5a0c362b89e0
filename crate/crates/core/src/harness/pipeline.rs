use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::report::{items_in, score};
use super::{decide, io_err, AccuracyReport, HarnessError, Inputs, Prediction, TaskSpec};
use crate::builder::{build, present_attributes, BuildConfig, BuildInputs, BuildReport, BuiltGraph, ModelSet};
use crate::domain::{Attribute, Belief, NodeClass, NodeRef, ObjectPair};
use crate::factorgraph::{run_bp, write_dump, BpConfig, BpResult, FactorKind};
use crate::lexstats::{KnowledgeDataset, Split};
use crate::maxent::{train, FeatureVector, Featurizer, MaxentModel, ModelKey, TrainConfig};

/// Settings of one end-to-end run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub build: BuildConfig,
    pub bp: BpConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn with_build(&self, build: BuildConfig) -> Self {
        ExperimentConfig {
            build,
            ..self.clone()
        }
    }

    /// Short stable hash of everything that affects a model run.
    pub fn fingerprint(&self, spec: &TaskSpec) -> String {
        let mut h = Sha256::new();
        h.update(spec.to_string());
        h.update(self.build.to_kv_string());
        h.update(format!("{:?}", self.bp));
        h.update(format!("{:?}", self.train));
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn seed_examples(
    dataset: &KnowledgeDataset,
    featurizer: &Featurizer<'_>,
    key: ModelKey,
) -> Result<Vec<(FeatureVector, crate::domain::RelationValue)>, HarnessError> {
    let mut out = Vec::new();
    for i in items_in(dataset, key.class, Split::Seed) {
        let Some(gold) = dataset.label(key.class, i, key.attribute) else { continue };
        let x = match key.class {
            NodeClass::Frame => featurizer.frame(dataset.frames()[i].frame())?,
            NodeClass::ObjectPair => featurizer.pair(dataset.pairs()[i].pair()),
        };
        out.push((x, gold));
    }
    Ok(out)
}

/// One classifier per (attribute, class), fit on seed-split labels only.
/// A key without seed examples gets an all-zero model, which predicts
/// uniformly.
pub fn train_models(
    dataset: &KnowledgeDataset,
    featurizer: &Featurizer<'_>,
    attributes: &[Attribute],
    cfg: &TrainConfig,
) -> Result<ModelSet, HarnessError> {
    let mut jobs = Vec::new();
    for &attribute in attributes {
        for class in [NodeClass::Frame, NodeClass::ObjectPair] {
            let key = ModelKey { attribute, class };
            jobs.push((key, seed_examples(dataset, featurizer, key)?));
        }
    }
    jobs.into_par_iter()
        .map(|(key, examples)| {
            if examples.is_empty() {
                warn!("no seed examples for {} {}, using a uniform model", key.attribute, key.class);
                return Ok((key, MaxentModel::zeros(key, featurizer.dim(key.class), cfg.fit_bias)));
            }
            Ok((key, train(key, &examples, cfg)?))
        })
        .collect()
}

fn model_file(key: &ModelKey) -> String {
    format!("{}-{}.model", key.attribute, key.class)
}

pub fn save_models(dir: &Path, models: &ModelSet) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (key, model) in models {
        let path = dir.join(model_file(key));
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut out = BufWriter::new(file);
        model.save(&mut out).map_err(io_err(&path))?;
        out.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

/// Reads every `*.model` file in `dir`.
pub fn load_models(dir: &Path) -> Result<ModelSet, HarnessError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "model"))
        .collect();
    paths.sort();
    let mut models = ModelSet::new();
    for path in paths {
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let model = MaxentModel::load(BufReader::new(file))?;
        models.insert(model.key, model);
    }
    Ok(models)
}

/// A task with its dataset view and trained classifiers, ready to build.
pub struct Prepared<'i> {
    pub inputs: &'i Inputs,
    pub spec: TaskSpec,
    pub dataset: KnowledgeDataset,
    pub models: ModelSet,
    pub attributes: Vec<Attribute>,
}

/// Switches the dataset to the task's profiles and trains on its seeds.
pub fn prepare<'i>(inputs: &'i Inputs, spec: &TaskSpec, cfg: &TrainConfig) -> Result<Prepared<'i>, HarnessError> {
    let dataset = inputs.dataset.with_profiles(spec.profiles())?;
    let attributes = present_attributes(&dataset);
    let featurizer = Featurizer::new(&inputs.verbs, &inputs.objects);
    let models = train_models(&dataset, &featurizer, &attributes, cfg)?;
    info!("{spec}: trained {} models", models.len());
    Ok(Prepared {
        inputs,
        spec: *spec,
        dataset,
        models,
        attributes,
    })
}

/// Like [`prepare`] but with classifiers trained earlier.
pub fn prepare_with_models<'i>(
    inputs: &'i Inputs,
    spec: &TaskSpec,
    models: ModelSet,
) -> Result<Prepared<'i>, HarnessError> {
    let dataset = inputs.dataset.with_profiles(spec.profiles())?;
    let attributes = present_attributes(&dataset);
    Ok(Prepared {
        inputs,
        spec: *spec,
        dataset,
        models,
        attributes,
    })
}

/// Graphs, BP results and the resulting marginal of every node.
#[derive(Debug, Clone)]
pub struct Inference {
    pub graphs: Vec<BuiltGraph>,
    pub results: Vec<BpResult>,
    beliefs: BTreeMap<NodeRef, Belief>,
}

impl Inference {
    pub fn belief(&self, node: &NodeRef) -> Option<Belief> {
        self.beliefs.get(node).copied()
    }

    /// Belief that `x` relates to `y` as given, in the asked orientation.
    pub fn query_pair(&self, x: &str, y: &str, attribute: Attribute) -> Option<Belief> {
        let (pair, swapped) = ObjectPair::new(x, y).ok()?;
        let b = self.belief(&NodeRef::pair(pair, attribute))?;
        Some(if swapped { b.flipped() } else { b })
    }

    pub fn beliefs(&self) -> impl Iterator<Item = (&NodeRef, &Belief)> {
        self.beliefs.iter()
    }

    pub fn converged(&self) -> bool {
        self.results.iter().all(|r| r.converged)
    }

    pub fn iterations(&self) -> usize {
        self.results.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    pub fn build_report(&self) -> BuildReport {
        let mut total = BuildReport::default();
        for g in &self.graphs {
            total.merge(&g.report);
        }
        total
    }

    /// Every graph dump, concatenated in build order.
    pub fn dump(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        for g in &self.graphs {
            write_dump(&g.graph, &mut buf).expect("writing to memory");
        }
        buf
    }
}

impl Prepared<'_> {
    pub fn featurizer(&self) -> Featurizer<'_> {
        Featurizer::new(&self.inputs.verbs, &self.inputs.objects)
    }

    /// One graph coupling all attributes when attribute factors are on,
    /// otherwise one independent graph per attribute.
    pub fn build(&self, cfg: &BuildConfig) -> Result<Vec<BuiltGraph>, HarnessError> {
        let featurizer = self.featurizer();
        let inputs = BuildInputs {
            dataset: &self.dataset,
            featurizer: &featurizer,
            verb_embeddings: &self.inputs.verbs,
            object_embeddings: &self.inputs.objects,
            stats: &self.inputs.stats,
            models: &self.models,
        };
        if cfg.enables(FactorKind::AttrSim) {
            return Ok(vec![build(&self.attributes, &inputs, cfg)?]);
        }
        self.attributes
            .par_iter()
            .map(|&a| build(&[a], &inputs, cfg).map_err(HarnessError::from))
            .collect()
    }

    pub fn infer(&self, cfg: &BuildConfig, bp: &BpConfig) -> Result<Inference, HarnessError> {
        bp.validate().map_err(HarnessError::Config)?;
        let graphs = self.build(cfg)?;
        let results: Vec<BpResult> = graphs.par_iter().map(|g| run_bp(&g.graph, bp)).collect();
        let mut beliefs = BTreeMap::new();
        for (g, r) in graphs.iter().zip(&results) {
            if !r.converged {
                warn!(
                    "belief propagation stopped after {} iterations (delta {:.2e})",
                    r.iterations, r.final_delta
                );
            }
            for (v, node) in g.nodes.iter() {
                beliefs.insert(node.clone(), r.marginal(v));
            }
        }
        Ok(Inference {
            graphs,
            results,
            beliefs,
        })
    }

    /// Scores the inference on the eval split. This is the only step that
    /// reads eval-split gold labels.
    pub fn evaluate(
        &self,
        inference: &Inference,
        fingerprint: String,
    ) -> Result<(AccuracyReport, Vec<Prediction>), HarnessError> {
        let (counts, rows) = score(&self.dataset, &self.spec, |node| {
            let b = inference
                .belief(node)
                .ok_or_else(|| HarnessError::Config(format!("no node for {node}")))?;
            Ok((decide(&b), Some(b)))
        })?;
        let report = AccuracyReport::from_counts(
            "model",
            self.spec,
            &counts,
            inference.converged(),
            inference.iterations(),
            fingerprint,
        );
        Ok((report, rows))
    }

    pub fn run(&self, exp: &ExperimentConfig) -> Result<TaskRun, HarnessError> {
        let inference = self.infer(&exp.build, &exp.bp)?;
        let (report, predictions) = self.evaluate(&inference, exp.fingerprint(&self.spec))?;
        Ok(TaskRun {
            report,
            predictions,
            inference,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TaskRun {
    pub report: AccuracyReport,
    pub predictions: Vec<Prediction>,
    pub inference: Inference,
}

impl TaskRun {
    /// Writes report.tsv, summary.json, predictions.tsv, build.tsv and
    /// graph.txt into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let put = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))
        };
        put("report.tsv", self.report.to_tsv().as_bytes())?;
        put("summary.json", self.report.to_json().as_bytes())?;
        put("build.tsv", self.inference.build_report().to_tsv().as_bytes())?;
        put("graph.txt", &self.inference.dump())?;
        let mut buf = Vec::new();
        super::write_predictions(&self.predictions, &mut buf).expect("writing to memory");
        put("predictions.tsv", &buf)
    }
}

/// Trains on seeds, builds, runs BP and scores the eval split.
pub fn run_task(inputs: &Inputs, spec: &TaskSpec, exp: &ExperimentConfig) -> Result<TaskRun, HarnessError> {
    prepare(inputs, spec, &exp.train)?.run(exp)
}

/// One component that an ablation removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Switch {
    Factor(FactorKind),
    FrameEmbeddings,
    ObjectEmbeddings,
    FrameSeeds,
    ObjectSeeds,
    Nothing,
}

impl Switch {
    pub fn all() -> Vec<Switch> {
        let mut v: Vec<Switch> = FactorKind::ALL.into_iter().map(Switch::Factor).collect();
        v.extend([
            Switch::FrameEmbeddings,
            Switch::ObjectEmbeddings,
            Switch::FrameSeeds,
            Switch::ObjectSeeds,
            Switch::Nothing,
        ]);
        v
    }

    /// `cfg` with this component turned off.
    pub fn apply(self, cfg: &BuildConfig) -> BuildConfig {
        let mut out = cfg.clone();
        match self {
            Switch::Factor(k) => {
                out.enabled_kinds.remove(&k);
            }
            Switch::FrameEmbeddings => {
                out.emb_classes.remove(&NodeClass::Frame);
            }
            Switch::ObjectEmbeddings => {
                out.emb_classes.remove(&NodeClass::ObjectPair);
            }
            Switch::FrameSeeds => {
                out.seed_classes.remove(&NodeClass::Frame);
            }
            Switch::ObjectSeeds => {
                out.seed_classes.remove(&NodeClass::ObjectPair);
            }
            Switch::Nothing => {}
        }
        out
    }
}

impl fmt::Display for Switch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Switch::Factor(k) => write!(f, "{k}"),
            Switch::FrameEmbeddings => f.write_str("frame-emb"),
            Switch::ObjectEmbeddings => f.write_str("object-emb"),
            Switch::FrameSeeds => f.write_str("frame-seeds"),
            Switch::ObjectSeeds => f.write_str("object-seeds"),
            Switch::Nothing => f.write_str("none"),
        }
    }
}

impl FromStr for Switch {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Switch::all()
            .into_iter()
            .find(|w| w.to_string() == s)
            .ok_or_else(|| HarnessError::UnknownSwitch(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub switch: Switch,
    pub full: AccuracyReport,
    pub ablated: AccuracyReport,
}

impl Ablation {
    /// Ablated minus full, per attribute then overall.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("# switch={} {}\nattribute\tfull\tablated\tdelta\n", self.switch, self.full.spec);
        for a in Attribute::ALL {
            let (f, b) = (self.full.accuracy(a), self.ablated.accuracy(a));
            s.push_str(&format!("{a}\t{f:.4}\t{b:.4}\t{:+.4}\n", b - f));
        }
        let (f, b) = (self.full.overall, self.ablated.overall);
        s.push_str(&format!("overall\t{f:.4}\t{b:.4}\t{:+.4}\n", b - f));
        s
    }
}

/// Runs the task with and without one component, sharing the trained models.
pub fn run_ablation(
    inputs: &Inputs,
    spec: &TaskSpec,
    exp: &ExperimentConfig,
    switch: Switch,
) -> Result<Ablation, HarnessError> {
    let prepared = prepare(inputs, spec, &exp.train)?;
    let full = prepared.run(exp)?.report;
    let ablated_exp = exp.with_build(switch.apply(&exp.build));
    let mut ablated = prepared.run(&ablated_exp)?.report;
    ablated.method = format!("model-{switch}");
    Ok(Ablation {
        switch,
        full,
        ablated,
    })
}

/// Candidate values per tunable setting. An empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThresholdGrid {
    pub verb_sim: Vec<f64>,
    pub obj_sim: Vec<f64>,
    pub pmi: Vec<f64>,
    pub attr_agreement: Vec<f64>,
    pub kind_sets: Vec<BTreeSet<FactorKind>>,
}

impl ThresholdGrid {
    /// Cartesian product of the candidates over `base`.
    pub fn expand(&self, base: &BuildConfig) -> Vec<BuildConfig> {
        fn or_base<T: Clone>(v: &[T], b: T) -> Vec<T> {
            if v.is_empty() {
                vec![b]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for kinds in or_base(&self.kind_sets, base.enabled_kinds.clone()) {
            for &vs in &or_base(&self.verb_sim, base.verb_sim_threshold) {
                for &os in &or_base(&self.obj_sim, base.obj_sim_threshold) {
                    for &p in &or_base(&self.pmi, base.pmi_threshold) {
                        for &aa in &or_base(&self.attr_agreement, base.attr_agreement_threshold) {
                            out.push(BuildConfig {
                                verb_sim_threshold: vs,
                                obj_sim_threshold: os,
                                pmi_threshold: p,
                                attr_agreement_threshold: aa,
                                enabled_kinds: kinds.clone(),
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best: BuildConfig,
    pub dev_score: f64,
    /// Every candidate with its dev overall accuracy, in grid order.
    pub scores: Vec<(BuildConfig, f64)>,
}

/// Exhaustive search for the config with the best dev overall accuracy.
/// Equal scores go to the config whose key=value form sorts first.
pub fn tune_thresholds(
    inputs: &Inputs,
    spec: &TaskSpec,
    grid: &[BuildConfig],
    exp: &ExperimentConfig,
) -> Result<TuneResult, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    let dev = spec.on_split(Split::Dev);
    let prepared = prepare(inputs, &dev, &exp.train)?;
    let scores: Vec<(BuildConfig, f64)> = grid
        .iter()
        .map(|cfg| {
            let run = prepared.run(&exp.with_build(cfg.clone()))?;
            Ok((cfg.clone(), run.report.overall))
        })
        .collect::<Result<_, HarnessError>>()?;
    let (best, dev_score) = scores
        .iter()
        .min_by(|(ca, sa), (cb, sb)| {
            sb.total_cmp(sa)
                .then_with(|| ca.to_kv_string().cmp(&cb.to_kv_string()))
        })
        .cloned()
        .expect("grid is non-empty");
    Ok(TuneResult {
        best,
        dev_score,
        scores,
    })
}
