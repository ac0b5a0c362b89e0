use std::path::Path;

use super::*;
use crate::domain::FrameType;
use crate::factorgraph::{run_bp, write_dump, BpConfig};
use crate::lexstats::SplitProfiles;

const FRAMES: &str = "\
threw\tdobj\t-\tsize\t>\tseed
threw\tdobj\t-\tweight\t>\tseed
threw\tpobj\tat\tsize\t>\tseed
threw\tdobj_pobj\tat\tsize\t<\tseed
tossed\tdobj\t-\tsize\t>\tdev
tossed\tdobj\t-\tweight\t>\tdev
ate\tdobj\t-\tsize\t>\ttest
";

const PAIRS: &str = "\
person\tbasketball\tsize\t>\tseed
person\tbasketball\tweight\t>\tseed
ant\tzebra\tsize\t<\tdev
bus\tcar\tsize\t>\tdev
bus\ttruck\tsize\t>\ttest
car\tdog\tsize\t>\tdev
dog\ttruck\tsize\t<\ttest
car\ttruck\tsize\t=\ttest
";

const STATS: &str = "\
threw:dobj:-\tperson\tbasketball\t8
threw:dobj:-\tant\tzebra\t1
ate:dobj:-\tant\tzebra\t9
ate:dobj:-\tbus\tcar\t1
";

struct Fixture {
    dataset: KnowledgeDataset,
    verbs: EmbeddingStore,
    objects: EmbeddingStore,
    stats: CooccurrenceStats,
    models: ModelSet,
}

fn store(dim: usize, rows: &[(&str, &[f64])]) -> EmbeddingStore {
    let mut s = EmbeddingStore::new(dim);
    for (w, v) in rows {
        s.insert(*w, v.to_vec()).unwrap();
    }
    s
}

fn fixture() -> Fixture {
    let dataset = KnowledgeDataset::parse(FRAMES, PAIRS, SplitProfiles::default()).unwrap();
    let verbs = store(2, &[("threw", &[1.0, 0.0]), ("tossed", &[0.95, 0.1]), ("ate", &[0.0, 1.0])]);
    let objects = store(
        3,
        &[
            ("car", &[1.0, 0.0, 0.0]),
            ("truck", &[0.98, 0.1, 0.0]),
            ("bus", &[0.0, 1.0, 0.0]),
            ("dog", &[-1.0, 0.0, 0.0]),
            ("person", &[0.0, 0.0, 1.0]),
            ("basketball", &[0.0, -1.0, 0.0]),
            ("ant", &[0.0, 0.0, -1.0]),
            ("zebra", &[0.5, -0.5, -0.5]),
            ("at", &[0.3, 0.3, 0.3]),
        ],
    );
    let stats = CooccurrenceStats::parse(STATS, Path::new("stats")).unwrap();
    let fz = Featurizer::new(&verbs, &objects);
    let mut models = ModelSet::new();
    for a in Attribute::ALL {
        for class in [NodeClass::Frame, NodeClass::ObjectPair] {
            let key = ModelKey { attribute: a, class };
            models.insert(key, MaxentModel::zeros(key, fz.dim(class), true));
        }
    }
    Fixture {
        dataset,
        verbs,
        objects,
        stats,
        models,
    }
}

fn only(kinds: &[FactorKind]) -> BuildConfig {
    BuildConfig {
        enabled_kinds: kinds.iter().copied().collect(),
        ..BuildConfig::default()
    }
}

fn build_with(fx: &Fixture, attributes: &[Attribute], cfg: &BuildConfig) -> BuiltGraph {
    let fz = Featurizer::new(&fx.verbs, &fx.objects);
    let inputs = BuildInputs {
        dataset: &fx.dataset,
        featurizer: &fz,
        verb_embeddings: &fx.verbs,
        object_embeddings: &fx.objects,
        stats: &fx.stats,
        models: &fx.models,
    };
    build(attributes, &inputs, cfg).unwrap()
}

fn table_of(g: &BuiltGraph, kind: FactorKind, a: VarId, b: VarId) -> Option<PotentialTable> {
    g.graph
        .factors()
        .iter()
        .find(|f| f.kind == kind && f.scope == [a, b])
        .map(|f| f.table)
}

fn pair(x: &str, y: &str) -> ObjectPair {
    ObjectPair::new(x, y).unwrap().0
}

#[test]
fn flipped_table_entries() {
    let d = flipped_table(&SOFT_ONE);
    let (gt, eq, lt) = (0, 1, 2);
    assert_eq!(d[gt][lt], 0.7);
    assert_eq!(d[eq][eq], 0.7);
    assert_eq!(d[gt][gt], 0.2);
    assert_eq!(flipped_table(&d), SOFT_ONE);
}

#[test]
fn soft_one_constant() {
    assert_eq!(SOFT_ONE, [[0.7, 0.1, 0.2], [0.15, 0.7, 0.15], [0.2, 0.1, 0.7]]);
    assert_eq!(seed_row(RelationValue::Gt), [0.7, 0.1, 0.2]);
    assert_eq!(seed_row(RelationValue::Eq), [0.15, 0.7, 0.15]);
    assert_eq!(seed_row(RelationValue::Lt), [0.2, 0.1, 0.7]);
}

#[test]
fn seed_factors_follow_gold_rows() {
    let fx = fixture();
    let g = build_with(&fx, &[Attribute::Size], &only(&[FactorKind::Seed]));
    // seed items with a size label: three frames and one pair
    assert_eq!(g.report.factors[&FactorKind::Seed], 4);
    assert_eq!(g.graph.num_factors(), 4);
    let v = g.nodes.pair(&pair("basketball", "person"), Attribute::Size).unwrap();
    let f = g.graph.factors().iter().find(|f| f.scope == [v]).unwrap();
    // gold person > basketball, stored as basketball < person
    assert_eq!(f.table, PotentialTable::Unary([0.2, 0.1, 0.7]));
    assert_eq!(fx.dataset.label_reads(Split::Dev) + fx.dataset.label_reads(Split::Test), 0);

    let res = run_bp(&g.graph, &BpConfig::default());
    let dev = g.nodes.pair(&pair("ant", "zebra"), Attribute::Size).unwrap();
    for p in res.marginal(dev).probs() {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn seed_classes_restrict_seeds() {
    let fx = fixture();
    let mut cfg = only(&[FactorKind::Seed]);
    cfg.seed_classes.remove(&NodeClass::Frame);
    let g = build_with(&fx, &[Attribute::Size], &cfg);
    assert_eq!(g.report.factors[&FactorKind::Seed], 1);
}

#[test]
fn emb_factors_cover_every_node() {
    let fx = fixture();
    let g = build_with(&fx, &[Attribute::Size], &only(&[FactorKind::Emb]));
    assert_eq!(g.report.factors[&FactorKind::Emb], g.nodes.len());
    let mut missing = fx.models.clone();
    missing.remove(&ModelKey {
        attribute: Attribute::Size,
        class: NodeClass::Frame,
    });
    let fz = Featurizer::new(&fx.verbs, &fx.objects);
    let inputs = BuildInputs {
        dataset: &fx.dataset,
        featurizer: &fz,
        verb_embeddings: &fx.verbs,
        object_embeddings: &fx.objects,
        stats: &fx.stats,
        models: &missing,
    };
    assert!(matches!(
        build(&[Attribute::Size], &inputs, &only(&[FactorKind::Emb])),
        Err(BuildError::MissingModel(_))
    ));
}

#[test]
fn selectional_preference_orientation_and_gate() {
    let fx = fixture();
    let mut cfg = only(&[FactorKind::SelPref]);
    cfg.pmi_threshold = 0.0;
    let g = build_with(&fx, &[Attribute::Size], &cfg);

    // hand-filtered: threw/person,basketball has pmi ln(8*19/(9*8)) > 0,
    // threw/ant,zebra ln(1*19/(9*10)) < 0, ate/ant,zebra ln(9*19/(10*10)) > 0,
    // ate/bus,car ln(19/10) > 0
    assert_eq!(g.report.factors[&FactorKind::SelPref], 3);

    let f = g.nodes.frame(&Frame::new("threw", FrameType::Dobj, None), Attribute::Size).unwrap();
    let o = g.nodes.pair(&pair("person", "basketball"), Attribute::Size).unwrap();
    assert_eq!(table_of(&g, FactorKind::SelPref, f, o), Some(PotentialTable::Binary(flipped_table(&SOFT_ONE))));

    let f = g.nodes.frame(&Frame::new("ate", FrameType::Dobj, None), Attribute::Size).unwrap();
    let o = g.nodes.pair(&pair("ant", "zebra"), Attribute::Size).unwrap();
    assert_eq!(table_of(&g, FactorKind::SelPref, f, o), Some(PotentialTable::Binary(SOFT_ONE)));

    cfg.pmi_threshold = 0.7;
    let g = build_with(&fx, &[Attribute::Size], &cfg);
    // only ln(152/72) = 0.747 survives
    assert_eq!(g.report.factors[&FactorKind::SelPref], 1);
    cfg.pmi_threshold = 10.0;
    assert_eq!(build_with(&fx, &[Attribute::Size], &cfg).report.factors[&FactorKind::SelPref], 0);
}

#[test]
fn object_similarity_cases() {
    let fx = fixture();
    let g = build_with(&fx, &[Attribute::Size], &only(&[FactorKind::ObjSim]));
    // car ~ truck only: bus is left of both (agree), dog sits between (oppose),
    // and the car|truck node gets the EQ unary
    assert_eq!(g.report.factors[&FactorKind::ObjSim], 3);
    let bus_car = g.nodes.pair(&pair("bus", "car"), Attribute::Size).unwrap();
    let bus_truck = g.nodes.pair(&pair("bus", "truck"), Attribute::Size).unwrap();
    assert_eq!(table_of(&g, FactorKind::ObjSim, bus_car, bus_truck), Some(PotentialTable::Binary(SOFT_ONE)));
    let car_dog = g.nodes.pair(&pair("car", "dog"), Attribute::Size).unwrap();
    let dog_truck = g.nodes.pair(&pair("dog", "truck"), Attribute::Size).unwrap();
    assert_eq!(
        table_of(&g, FactorKind::ObjSim, car_dog, dog_truck),
        Some(PotentialTable::Binary(flipped_table(&SOFT_ONE)))
    );
    let car_truck = g.nodes.pair(&pair("car", "truck"), Attribute::Size).unwrap();
    let unary = g.graph.factors().iter().find(|f| f.scope == [car_truck]).unwrap();
    assert_eq!(unary.table, PotentialTable::Unary([0.15, 0.7, 0.15]));

    let mut strict = only(&[FactorKind::ObjSim]);
    strict.obj_sim_threshold = 0.9999;
    assert_eq!(build_with(&fx, &[Attribute::Size], &strict).graph.num_factors(), 0);
}

#[test]
fn opposite_sides_push_opposite_decisions() {
    // car > dog is seeded; with car ~ truck the dog|truck node should lean LT
    let mut g = FactorGraph::new();
    let car_dog = g.add_variable("car|dog");
    let dog_truck = g.add_variable("dog|truck");
    g.add_factor(FactorKind::Seed, &[car_dog], PotentialTable::unary(seed_row(RelationValue::Gt)).unwrap())
        .unwrap();
    g.add_factor(FactorKind::ObjSim, &[car_dog, dog_truck], oppose()).unwrap();
    let res = run_bp(&g, &BpConfig::default());
    assert_eq!(res.marginal(dog_truck).argmax(), RelationValue::Lt);
}

#[test]
fn verb_and_frame_similarity() {
    let fx = fixture();
    let g = build_with(&fx, &[Attribute::Size, Attribute::Weight], &only(&[FactorKind::VerbSim]));
    // threw ~ tossed: the dobj frames link in both attributes
    assert_eq!(g.report.factors[&FactorKind::VerbSim], 2);

    let g = build_with(&fx, &[Attribute::Size], &only(&[FactorKind::FrameSim]));
    // threw dobj and threw pobj share the agent argument; dobj_pobj does not
    assert_eq!(g.report.factors[&FactorKind::FrameSim], 1);
    let a = g.nodes.frame(&Frame::new("threw", FrameType::Dobj, None), Attribute::Size).unwrap();
    let b = g.nodes.frame(&Frame::new("threw", FrameType::Pobj, Some("at")), Attribute::Size).unwrap();
    assert!(table_of(&g, FactorKind::FrameSim, a, b).is_some());
}

fn agreement_fixture(weight_rows: &str) -> KnowledgeDataset {
    let mut frames = String::new();
    for (i, v) in ["a", "b", "c", "d"].iter().enumerate() {
        frames.push_str(&format!("{v}\tdobj\t-\tsize\t>\tseed\n"));
        let _ = i;
    }
    frames.push_str(weight_rows);
    frames.push_str("e\tdobj\t-\tsize\t>\tdev\ne\tdobj\t-\tweight\t<\tdev\n");
    KnowledgeDataset::parse(&frames, "", SplitProfiles::default()).unwrap()
}

#[test]
fn attribute_agreement_counts_only_frames_seeded_in_both() {
    // d has no weight label, and e is not a seed: shared = {a, b, c}
    let ds = agreement_fixture("a\tdobj\t-\tweight\t>\tseed\nb\tdobj\t-\tweight\t>\tseed\nc\tdobj\t-\tweight\t>\tseed\n");
    assert_eq!(seed_agreement(&ds, Attribute::Size, Attribute::Weight, 1), Some(1.0));
    assert_eq!(seed_agreement(&ds, Attribute::Size, Attribute::Weight, 4), None);

    let ds = agreement_fixture("a\tdobj\t-\tweight\t>\tseed\nb\tdobj\t-\tweight\t<\tseed\n");
    assert_eq!(seed_agreement(&ds, Attribute::Size, Attribute::Weight, 1), Some(0.5));
    assert_eq!(ds.label_reads(Split::Dev), 0);
}

#[test]
fn attribute_factors_gate_on_agreement() {
    let fx = fixture();
    let mut cfg = only(&[FactorKind::AttrSim]);
    cfg.attr_min_shared_frames = 1;
    // threw dobj is the only frame seeded in both, and it agrees
    let g = build_with(&fx, &[Attribute::Size, Attribute::Weight], &cfg);
    // frames present in both attributes: threw dobj, tossed dobj
    assert_eq!(g.report.factors[&FactorKind::AttrSim], 2);

    cfg.attr_min_shared_frames = 10;
    let g = build_with(&fx, &[Attribute::Size, Attribute::Weight], &cfg);
    assert_eq!(g.report.factors[&FactorKind::AttrSim], 0);

    let ds = agreement_fixture("a\tdobj\t-\tweight\t>\tseed\nb\tdobj\t-\tweight\t<\tseed\n");
    // 50% agreement never links, however low the support floor
    cfg.attr_min_shared_frames = 1;
    let mut b = GraphBuilder::new(&ds, &[Attribute::Size, Attribute::Weight], &cfg).unwrap();
    b.add_attribute_factors(&ds).unwrap();
    assert_eq!(b.graph().num_factors(), 0);
}

#[test]
fn full_build_properties() {
    let fx = fixture();
    let mut cfg = BuildConfig::all_kinds();
    cfg.attr_min_shared_frames = 1;
    let g = build_with(&fx, &Attribute::ALL, &cfg);
    for f in g.graph.factors() {
        assert!(cfg.enables(f.kind));
        let attrs: BTreeSet<Attribute> = f.scope.iter().map(|v| g.nodes.node(*v).attribute()).collect();
        if f.kind != FactorKind::AttrSim {
            assert_eq!(attrs.len(), 1, "{:?} crosses attributes", f.kind);
        }
    }
    for kind in FactorKind::ALL {
        let mut ablated = cfg.clone();
        ablated.enabled_kinds.remove(&kind);
        let h = build_with(&fx, &Attribute::ALL, &ablated);
        assert_eq!(h.report.factors[&kind], 0);
        for other in FactorKind::ALL.into_iter().filter(|k| *k != kind) {
            assert_eq!(h.report.factors[&other], g.report.factors[&other], "{kind} ablation changed {other}");
        }
    }
    assert_eq!(g.report.frame_nodes + g.report.pair_nodes, g.nodes.len());
    assert!(g.report.to_tsv().starts_with("kind\tcount\nseed\t"));
}

#[test]
fn build_is_byte_deterministic() {
    let dump = || {
        let fx = fixture();
        let g = build_with(&fx, &Attribute::ALL, &BuildConfig::all_kinds());
        let mut buf = Vec::new();
        write_dump(&g.graph, &mut buf).unwrap();
        buf
    };
    assert_eq!(dump(), dump());
}

#[test]
fn duplicate_evidence_does_not_stack() {
    let fx = fixture();
    let cfg = BuildConfig::all_kinds();
    let mut b = GraphBuilder::new(&fx.dataset, &[Attribute::Size], &cfg).unwrap();
    b.add_selectional_preference_factors(&fx.stats).unwrap();
    let n = b.graph().num_factors();
    b.add_selectional_preference_factors(&fx.stats).unwrap();
    assert_eq!(b.graph().num_factors(), n);
}
