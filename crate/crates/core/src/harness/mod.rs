//! Experiment driver: tasks, baselines, full-model runs, ablations and
//! threshold tuning, plus a synthetic world for end-to-end checks.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::builder::BuildError;
use crate::domain::{Belief, NodeClass, RelationValue};
use crate::factorgraph::GraphError;
use crate::lexstats::{
    load_dataset, load_embeddings, CooccurrenceStats, DataError, EmbeddingStore, KnowledgeDataset, Split,
    SplitProfile, SplitProfiles,
};
use crate::maxent::MaxentError;

mod baselines;
mod pipeline;
mod report;
pub mod synth;

pub use baselines::{baseline_emb_maxent, baseline_majority, baseline_random, random_resample_accuracies};
pub use pipeline::{
    load_models, prepare, prepare_with_models, run_ablation, run_task, save_models, train_models, tune_thresholds, Ablation,
    ExperimentConfig, Inference, Prepared, Switch, TaskRun, ThresholdGrid, TuneResult,
};
pub use report::{write_predictions, AccuracyReport, AttributeScore, Prediction};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Maxent(#[from] MaxentError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}", path = .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no seed labels for {0}")]
    EmptySeed(String),
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("unknown ablation switch `{0}`")]
    UnknownSwitch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Argmax of a marginal; ties go to the lower index, so GT before EQ before LT.
pub fn decide(marginal: &Belief) -> RelationValue {
    marginal.argmax()
}

/// Which node class is predicted. The other class supplies cross-domain seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Frames,
    Objects,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Frames, Task::Objects];

    pub fn class(self) -> NodeClass {
        match self {
            Task::Frames => NodeClass::Frame,
            Task::Objects => NodeClass::ObjectPair,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Frames => "frames",
            Task::Objects => "objects",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "frames" | "frame" => Ok(Task::Frames),
            "objects" | "object" | "pairs" => Ok(Task::Objects),
            _ => Err(format!("unknown task `{s}` (expected frames or objects)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TaskSpec {
    pub task: Task,
    /// Seed fraction of the class that is not being predicted.
    pub cross_profile: SplitProfile,
    pub eval_split: Split,
}

impl TaskSpec {
    pub fn new(task: Task, cross_profile: SplitProfile, eval_split: Split) -> Self {
        TaskSpec {
            task,
            cross_profile,
            eval_split,
        }
    }

    pub fn class(&self) -> NodeClass {
        self.task.class()
    }

    /// The predicted class always uses the 5% profile.
    pub fn profiles(&self) -> SplitProfiles {
        match self.task {
            Task::Frames => SplitProfiles {
                frames: SplitProfile::Five,
                pairs: self.cross_profile,
            },
            Task::Objects => SplitProfiles {
                frames: self.cross_profile,
                pairs: SplitProfile::Five,
            },
        }
    }

    pub fn on_split(self, eval_split: Split) -> Self {
        TaskSpec { eval_split, ..self }
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task={} cross={} eval={}", self.task, self.cross_profile.name(), self.eval_split)
    }
}

/// Everything a run reads from disk.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub dataset: KnowledgeDataset,
    pub verbs: EmbeddingStore,
    pub objects: EmbeddingStore,
    pub stats: CooccurrenceStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub frames: PathBuf,
    pub pairs: PathBuf,
    pub verb_embeddings: PathBuf,
    pub object_embeddings: PathBuf,
    pub cooccurrence: PathBuf,
    pub verb_dim: usize,
    pub object_dim: usize,
}

pub const VERB_DIM: usize = 100;
pub const OBJECT_DIM: usize = 50;

impl DataPaths {
    /// The conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DataPaths {
            frames: dir.join("frames.tsv"),
            pairs: dir.join("pairs.tsv"),
            verb_embeddings: dir.join("verb_embeddings.txt"),
            object_embeddings: dir.join("object_embeddings.txt"),
            cooccurrence: dir.join("cooccurrence.tsv"),
            verb_dim: VERB_DIM,
            object_dim: OBJECT_DIM,
        }
    }

    pub fn load(&self) -> Result<Inputs, HarnessError> {
        Ok(Inputs {
            dataset: load_dataset(&self.frames, &self.pairs, SplitProfiles::default())?,
            verbs: load_embeddings(&self.verb_embeddings, self.verb_dim)?,
            objects: load_embeddings(&self.object_embeddings, self.object_dim)?,
            stats: CooccurrenceStats::load(&self.cooccurrence)?,
        })
    }
}
