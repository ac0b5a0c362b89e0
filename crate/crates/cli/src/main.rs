use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use verbphysics::builder::BuildConfig;
use verbphysics::factorgraph::{BpConfig, FactorKind};
use verbphysics::harness::synth::{synthetic_world, SynthConfig};
use verbphysics::harness::{
    baseline_emb_maxent, baseline_majority, baseline_random, load_models, prepare, prepare_with_models,
    run_ablation, save_models, tune_thresholds, DataPaths, ExperimentConfig, Inputs, Prepared, Switch, Task,
    TaskSpec, ThresholdGrid,
};
use verbphysics::lexstats::{Split, SplitProfile};
use verbphysics::maxent::TrainConfig;

#[derive(Parser)]
#[command(name = "verbphysics", version, about = "Joint inference of physical relations between objects and verb frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with known answers.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = verbphysics::harness::synth::SYNTH_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        objects: usize,
        #[arg(long, default_value_t = 20)]
        verbs: usize,
    },
    /// Fit the embedding classifiers on seed labels and save them.
    Train(RunArgs),
    /// Build the factor graph and write its dump and factor counts.
    Build(RunArgs),
    /// Build, run belief propagation and write every marginal.
    Infer(RunArgs),
    /// Score a method on the eval split.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Method::Model)]
        method: Method,
    },
    /// Compare the full model against one component switched off.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Factor kind tag, frame-emb, object-emb, frame-seeds, object-seeds, none, or all.
        #[arg(long = "switch", required = true)]
        switches: Vec<String>,
    },
    /// Grid search over build settings on the dev split.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        verb_sim: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        obj_sim: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        pmi: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        attr_agreement: Vec<f64>,
        /// Comma-separated kind tags; repeat for several candidate sets.
        #[arg(long = "kinds")]
        kind_sets: Vec<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Model,
    Random,
    Majority,
    EmbMaxent,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding frames.tsv, pairs.tsv, verb_embeddings.txt,
    /// object_embeddings.txt and cooccurrence.tsv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    verb_embeddings: Option<PathBuf>,
    #[arg(long)]
    object_embeddings: Option<PathBuf>,
    #[arg(long)]
    cooccurrence: Option<PathBuf>,
    #[arg(long, default_value_t = verbphysics::harness::VERB_DIM)]
    verb_dim: usize,
    #[arg(long, default_value_t = verbphysics::harness::OBJECT_DIM)]
    object_dim: usize,
}

impl DataArgs {
    fn paths(&self) -> Result<DataPaths> {
        let base = self.data.as_deref().map(DataPaths::in_dir);
        let pick = |given: &Option<PathBuf>, from_dir: Option<&PathBuf>, flag: &str| -> Result<PathBuf> {
            given
                .clone()
                .or_else(|| from_dir.cloned())
                .with_context(|| format!("missing --{flag} (or --data)"))
        };
        Ok(DataPaths {
            frames: pick(&self.frames, base.as_ref().map(|b| &b.frames), "frames")?,
            pairs: pick(&self.pairs, base.as_ref().map(|b| &b.pairs), "pairs")?,
            verb_embeddings: pick(&self.verb_embeddings, base.as_ref().map(|b| &b.verb_embeddings), "verb-embeddings")?,
            object_embeddings: pick(
                &self.object_embeddings,
                base.as_ref().map(|b| &b.object_embeddings),
                "object-embeddings",
            )?,
            cooccurrence: pick(&self.cooccurrence, base.as_ref().map(|b| &b.cooccurrence), "cooccurrence")?,
            verb_dim: self.verb_dim,
            object_dim: self.object_dim,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "frames")]
    task: Task,
    /// Seed profile of the class that is not predicted (5 or 20).
    #[arg(long, default_value = "5")]
    split_profile: SplitProfile,
    #[arg(long, default_value = "test")]
    eval_split: Split,
    /// Build settings as key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of saved classifiers; trained from seeds when absent.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
}

impl RunArgs {
    fn spec(&self) -> TaskSpec {
        TaskSpec::new(self.task, self.split_profile, self.eval_split)
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let build = match &self.config {
            Some(p) => BuildConfig::load(p)?,
            None => BuildConfig::default(),
        };
        let mut bp = BpConfig::default();
        if let Some(n) = self.max_iterations {
            bp.max_iterations = n;
        }
        if let Some(d) = self.damping {
            bp.damping = d;
        }
        let train = TrainConfig {
            rng_seed: self.rng_seed,
            ..TrainConfig::default()
        };
        Ok(ExperimentConfig { build, bp, train })
    }

    fn inputs(&self) -> Result<Inputs> {
        Ok(self.data.paths()?.load()?)
    }

    fn prepare<'i>(&self, inputs: &'i Inputs, spec: &TaskSpec, exp: &ExperimentConfig) -> Result<Prepared<'i>> {
        Ok(match &self.models {
            Some(dir) => prepare_with_models(inputs, spec, load_models(dir)?)?,
            None => prepare(inputs, spec, &exp.train)?,
        })
    }
}

fn put(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn parse_kinds(s: &str) -> Result<BTreeSet<FactorKind>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<FactorKind>().map_err(Into::into))
        .collect()
}

fn flag_convergence(converged: bool, iterations: usize) {
    if !converged {
        println!("warning: belief propagation did not converge ({iterations} iterations)");
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            seed,
            objects,
            verbs,
        } => {
            let cfg = SynthConfig {
                objects,
                verbs,
                seed,
                ..SynthConfig::default()
            };
            let world = synthetic_world(&cfg)?;
            world.write(&out)?;
            let ds = &world.inputs.dataset;
            println!("wrote {} frames and {} pairs to {}", ds.frames().len(), ds.pairs().len(), out.display());
        }
        Command::Train(args) => {
            let (inputs, exp, spec) = (args.inputs()?, args.experiment()?, args.spec());
            let prepared = prepare(&inputs, &spec, &exp.train)?;
            save_models(&args.out, &prepared.models)?;
            println!("saved {} models to {}", prepared.models.len(), args.out.display());
        }
        Command::Build(args) => {
            let (inputs, exp, spec) = (args.inputs()?, args.experiment()?, args.spec());
            let prepared = args.prepare(&inputs, &spec, &exp)?;
            let graphs = prepared.build(&exp.build)?;
            let mut dump = Vec::new();
            let mut report = verbphysics::builder::BuildReport::default();
            for g in &graphs {
                verbphysics::factorgraph::write_dump(&g.graph, &mut dump)?;
                report.merge(&g.report);
            }
            put(&args.out, "graph.txt", dump)?;
            put(&args.out, "build.tsv", report.to_tsv())?;
            put(&args.out, "config.txt", exp.build.to_kv_string())?;
            print!("{}", report.to_tsv());
        }
        Command::Infer(args) => {
            let (inputs, exp, spec) = (args.inputs()?, args.experiment()?, args.spec());
            let prepared = args.prepare(&inputs, &spec, &exp)?;
            let inference = prepared.infer(&exp.build, &exp.bp)?;
            let mut s = String::from("node\tp_gt\tp_eq\tp_lt\tdecision\n");
            for (node, b) in inference.beliefs() {
                let p = b.probs();
                s.push_str(&format!(
                    "{}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                    node,
                    p[0],
                    p[1],
                    p[2],
                    verbphysics::harness::decide(b)
                ));
            }
            put(&args.out, "marginals.tsv", s)?;
            put(&args.out, "graph.txt", inference.dump())?;
            println!("inferred {} nodes in {} iterations", inference.beliefs().count(), inference.iterations());
            flag_convergence(inference.converged(), inference.iterations());
        }
        Command::Eval { run: args, method } => {
            let (inputs, exp, spec) = (args.inputs()?, args.experiment()?, args.spec());
            let report = match method {
                Method::Model => {
                    let prepared = args.prepare(&inputs, &spec, &exp)?;
                    let run = prepared.run(&exp)?;
                    run.write(&args.out)?;
                    flag_convergence(run.report.converged, run.report.iterations);
                    run.report
                }
                Method::Random => baseline_random(&inputs.dataset, &spec, args.rng_seed)?,
                Method::Majority => baseline_majority(&inputs.dataset, &spec)?,
                Method::EmbMaxent => {
                    let prepared = args.prepare(&inputs, &spec, &exp)?;
                    baseline_emb_maxent(&inputs.dataset, &spec, &prepared.featurizer(), &prepared.models)?
                }
            };
            if method != Method::Model {
                put(&args.out, "report.tsv", report.to_tsv())?;
                put(&args.out, "summary.json", report.to_json())?;
            }
            print!("{}", report.to_tsv());
        }
        Command::Ablate { run: args, switches } => {
            let (inputs, exp, spec) = (args.inputs()?, args.experiment()?, args.spec());
            let mut chosen = Vec::new();
            for s in &switches {
                if s == "all" {
                    chosen.extend(Switch::all());
                } else {
                    chosen.push(s.parse::<Switch>()?);
                }
            }
            let mut table = String::new();
            for switch in chosen {
                info!("ablating {switch}");
                let ab = run_ablation(&inputs, &spec, &exp, switch)?;
                if !ab.full.converged || !ab.ablated.converged {
                    warn!("{switch}: belief propagation did not converge");
                }
                table.push_str(&ab.to_tsv());
            }
            put(&args.out, "ablation.tsv", &table)?;
            print!("{table}");
        }
        Command::Tune {
            run: args,
            verb_sim,
            obj_sim,
            pmi,
            attr_agreement,
            kind_sets,
        } => {
            if args.models.is_some() {
                bail!("tune trains its own classifiers; drop --models");
            }
            let (inputs, exp, spec) = (args.inputs()?, args.experiment()?, args.spec());
            let grid = ThresholdGrid {
                verb_sim,
                obj_sim,
                pmi,
                attr_agreement,
                kind_sets: kind_sets.iter().map(|s| parse_kinds(s)).collect::<Result<_>>()?,
            };
            let configs = grid.expand(&exp.build);
            let result = tune_thresholds(&inputs, &spec, &configs, &exp)?;
            let mut table = String::from("candidate\tdev_overall\tconfig\n");
            for (i, (cfg, score)) in result.scores.iter().enumerate() {
                let flat = cfg.to_kv_string().trim_end().replace('\n', ";");
                table.push_str(&format!("{i}\t{score:.4}\t{flat}\n"));
            }
            put(&args.out, "tune.tsv", &table)?;
            put(&args.out, "best.cfg", result.best.to_kv_string())?;
            println!("best dev overall {:.4} of {} candidates", result.dev_score, configs.len());
            print!("{}", result.best.to_kv_string());
        }
    }
    Ok(())
}
