use verbphysics::builder::BuildConfig;
use verbphysics::factorgraph::{read_dump, run_bp, write_dump, BpConfig};
use verbphysics::harness::synth::{synthetic_world, SynthConfig};
use verbphysics::harness::{
    baseline_majority, baseline_random, prepare, run_task, DataPaths, ExperimentConfig, Task, TaskSpec,
};
use verbphysics::lexstats::{Split, SplitProfile};
use verbphysics::NodeClass;

fn small() -> SynthConfig {
    SynthConfig {
        objects: 12,
        verbs: 8,
        ..SynthConfig::default()
    }
}

#[test]
fn files_on_disk_reproduce_the_in_memory_run() {
    let world = synthetic_world(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let loaded = world.write(dir.path()).unwrap().load().unwrap();
    assert_eq!(loaded.dataset.split_counts(NodeClass::ObjectPair), world.inputs.dataset.split_counts(NodeClass::ObjectPair));

    let spec = TaskSpec::new(Task::Objects, SplitProfile::Twenty, Split::Test);
    let exp = ExperimentConfig::default();
    let a = run_task(&world.inputs, &spec, &exp).unwrap();
    let b = run_task(&loaded, &spec, &exp).unwrap();
    assert_eq!(a.report.to_tsv(), b.report.to_tsv());
    assert_eq!(a.inference.dump(), b.inference.dump());
    assert_eq!(a.report.total(), a.predictions.len());
}

#[test]
fn dumped_graphs_reload_to_the_same_marginals() {
    let world = synthetic_world(&small()).unwrap();
    let spec = TaskSpec::new(Task::Frames, SplitProfile::Five, Split::Dev);
    let exp = ExperimentConfig::default().with_build(BuildConfig::all_kinds());
    let run = run_task(&world.inputs, &spec, &exp).unwrap();
    assert_eq!(run.inference.graphs.len(), 1, "attribute factors couple every attribute");

    let built = &run.inference.graphs[0];
    let mut buf = Vec::new();
    write_dump(&built.graph, &mut buf).unwrap();
    let reread = read_dump(buf.as_slice()).unwrap();
    let mut again = Vec::new();
    write_dump(&reread, &mut again).unwrap();
    assert_eq!(buf, again);
    assert_eq!(run_bp(&reread, &BpConfig::default()).marginals, run.inference.results[0].marginals);
}

#[test]
fn gold_outside_seeds_is_read_only_by_scoring() {
    let world = synthetic_world(&small()).unwrap();
    let ds = &world.inputs.dataset;
    let spec = TaskSpec::new(Task::Objects, SplitProfile::Five, Split::Test);
    let exp = ExperimentConfig::default();
    ds.reset_audit();
    let prepared = prepare(&world.inputs, &spec, &exp.train).unwrap();
    let inference = prepared.infer(&exp.build, &exp.bp).unwrap();
    assert_eq!(prepared.dataset.label_reads(Split::Dev), 0);
    assert_eq!(prepared.dataset.label_reads(Split::Test), 0);
    let (report, _) = prepared.evaluate(&inference, String::new()).unwrap();
    assert_eq!(prepared.dataset.label_reads(Split::Dev), 0);
    assert_eq!(prepared.dataset.label_reads(Split::Test), report.total());
}

#[test]
fn baselines_score_every_eval_item() {
    let world = synthetic_world(&small()).unwrap();
    let ds = &world.inputs.dataset;
    for task in Task::ALL {
        let spec = TaskSpec::new(task, SplitProfile::Five, Split::Test);
        let random = baseline_random(ds, &spec, 3).unwrap();
        let majority = baseline_majority(ds, &spec).unwrap();
        assert_eq!(random.total(), majority.total());
        assert!(random.total() > 0);
        for r in [&random, &majority] {
            assert!((0.0..=1.0).contains(&r.overall));
        }
    }
}
