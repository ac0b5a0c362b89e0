//! A small world with known attribute orders, used when the real corpus is
//! not available. Objects sit on ranked tiers (ties are equal), an object
//! occasionally moves one tier for a single attribute, verbs come in
//! near-synonym families that imply a fixed relation between their
//! arguments, and co-occurrence counts record which objects fill which
//! frames.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{io_err, DataPaths, HarnessError, Inputs, OBJECT_DIM, VERB_DIM};
use crate::domain::{Attribute, Frame, FrameType, ObjectPair, RelationValue};
use crate::lexstats::{
    CooccurrenceStats, EmbeddingStore, FrameItem, KnowledgeDataset, PairItem, Split, SplitAssignment, SplitProfiles,
};

pub const SYNTH_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub objects: usize,
    pub tiers: usize,
    /// Chance that an object sits one tier off for a given attribute.
    pub tier_jitter: f64,
    /// Rounded down to an even number; verbs come in pairs.
    pub verbs: usize,
    pub seed: u64,
    /// Half-width of the uniform noise added to every embedding entry.
    pub embedding_noise: f64,
    /// Distinct argument fillers observed per frame.
    pub fills_per_frame: usize,
    /// Chance that an observed filler ignores the frame's implication.
    pub reporting_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            objects: 30,
            tiers: 6,
            tier_jitter: 0.1,
            verbs: 20,
            seed: SYNTH_SEED,
            embedding_noise: 0.3,
            fills_per_frame: 30,
            reporting_noise: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub inputs: Inputs,
    /// Tier of each object per attribute.
    pub values: BTreeMap<String, [f64; 5]>,
}

const PREPOSITION: &str = "at";

fn relation(a: f64, b: f64) -> RelationValue {
    if a > b {
        RelationValue::Gt
    } else if a < b {
        RelationValue::Lt
    } else {
        RelationValue::Eq
    }
}

fn noise(rng: &mut ChaCha8Rng, width: f64) -> f64 {
    if width > 0.0 {
        rng.gen_range(-width..width)
    } else {
        0.0
    }
}

/// Split assignment of position `i` among `n` shuffled items: the first 5%
/// (20%) seed, the last half test, the rest dev. Seeds of the 5% profile
/// are a subset of the 20% ones and the test split is shared.
fn assignment(i: usize, n: usize) -> SplitAssignment {
    let five_seed = ((n as f64 * 0.05).round() as usize).max(1);
    let twenty_seed = ((n as f64 * 0.20).round() as usize).max(five_seed);
    let test_start = n - n / 2;
    let pick = |seed_end: usize| {
        if i < seed_end {
            Split::Seed
        } else if i < test_start {
            Split::Dev
        } else {
            Split::Test
        }
    };
    SplitAssignment {
        five: pick(five_seed),
        twenty: Some(pick(twenty_seed)),
    }
}

pub fn synthetic_world(cfg: &SynthConfig) -> Result<SyntheticWorld, HarnessError> {
    if cfg.objects < 3 || cfg.verbs < 2 {
        return Err(HarnessError::Config("need at least 3 objects and 2 verbs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let names: Vec<String> = (0..cfg.objects).map(|i| format!("obj{i:02}")).collect();
    let tiers = cfg.tiers.max(2);
    let mut tier_of: Vec<usize> = (0..cfg.objects).map(|i| i % tiers).collect();
    tier_of.shuffle(&mut rng);
    let mut values = BTreeMap::new();
    for (name, &t) in names.iter().zip(&tier_of) {
        let v: [f64; 5] = std::array::from_fn(|_| {
            let mut tier = t as f64;
            if rng.gen_bool(cfg.tier_jitter) {
                tier += if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            }
            tier
        });
        values.insert(name.clone(), v);
    }

    // one direction per tier, plus the attribute tiers scaled to [-1, 1]
    let half = (tiers - 1) as f64 / 2.0;
    let directions: Vec<Vec<f64>> = (0..tiers)
        .map(|_| (0..OBJECT_DIM).map(|_| noise(&mut rng, 1.0)).collect())
        .collect();
    let mut objects = EmbeddingStore::new(OBJECT_DIM);
    for (name, &t) in names.iter().zip(&tier_of) {
        let v = values[name];
        let vec: Vec<f64> = (0..OBJECT_DIM)
            .map(|d| {
                let base = if d < 5 { (v[d] - half) / half } else { directions[t][d] };
                base + noise(&mut rng, cfg.embedding_noise)
            })
            .collect();
        objects.insert(name.clone(), vec)?;
    }
    let prep: Vec<f64> = (0..OBJECT_DIM).map(|_| noise(&mut rng, 1.0)).collect();
    objects.insert(PREPOSITION, prep)?;

    // verb families share a direction and both implications
    let families = cfg.verbs / 2;
    let mut verbs = EmbeddingStore::new(VERB_DIM);
    let mut implied: Vec<(String, RelationValue, RelationValue)> = Vec::new();
    for fam in 0..families {
        let sign = |r: RelationValue| if r == RelationValue::Gt { 1.5 } else { -1.5 };
        let dobj = if rng.gen_bool(0.5) { RelationValue::Gt } else { RelationValue::Lt };
        let pobj = if rng.gen_bool(0.5) { RelationValue::Gt } else { RelationValue::Lt };
        let mut base: Vec<f64> = (0..VERB_DIM).map(|_| noise(&mut rng, 1.0)).collect();
        base[0] = sign(dobj);
        base[1] = sign(pobj);
        for member in 0..2 {
            let name = format!("verb{fam:02}{}", ['a', 'b'][member]);
            let vec = base.iter().map(|b| b + noise(&mut rng, 0.3)).collect();
            verbs.insert(name.clone(), vec)?;
            implied.push((name, dobj, pobj));
        }
    }

    let mut verb_order: Vec<usize> = (0..implied.len()).collect();
    verb_order.shuffle(&mut rng);
    let mut frames = Vec::new();
    let mut frame_rel = Vec::new();
    for (pos, &vi) in verb_order.iter().enumerate() {
        let (verb, dobj, pobj) = &implied[vi];
        let split = assignment(pos, implied.len());
        for (frame, r) in [
            (Frame::new(verb.as_str(), FrameType::Dobj, None), *dobj),
            (Frame::new(verb.as_str(), FrameType::Pobj, Some(PREPOSITION)), *pobj),
        ] {
            let labels = Attribute::ALL.iter().map(|&a| (a, r)).collect();
            frames.push(FrameItem::new(frame.clone(), labels, split));
            frame_rel.push((frame, r));
        }
    }

    let mut unordered = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            unordered.push((i, j));
        }
    }
    unordered.shuffle(&mut rng);
    let mut pairs = Vec::new();
    for (pos, &(i, j)) in unordered.iter().enumerate() {
        let (pair, _) = ObjectPair::new(&names[i], &names[j])?;
        let (vx, vy) = (values[pair.x()], values[pair.y()]);
        let labels = Attribute::ALL.iter().map(|&a| (a, relation(vx[a.index()], vy[a.index()]))).collect();
        pairs.push(PairItem::new(pair, labels, assignment(pos, unordered.len())));
    }

    let mut stats = CooccurrenceStats::new();
    for (frame, r) in &frame_rel {
        let key = frame.key();
        let mut seen = BTreeSet::new();
        let mut attempts = 0;
        while seen.len() < cfg.fills_per_frame && attempts < 100 * cfg.fills_per_frame {
            attempts += 1;
            let x = rng.gen_range(0..names.len());
            let y = rng.gen_range(0..names.len());
            if x == y || seen.contains(&(x, y)) {
                continue;
            }
            let (vx, vy) = (values[&names[x]], values[&names[y]]);
            let consistent = (0..5).all(|a| relation(vx[a], vy[a]) == *r);
            if consistent || rng.gen_bool(cfg.reporting_noise) {
                seen.insert((x, y));
                stats.add(&key, &names[x], &names[y], rng.gen_range(1..=5));
            }
        }
    }

    let dataset = KnowledgeDataset::from_items(frames, pairs, SplitProfiles::default())?;
    Ok(SyntheticWorld {
        inputs: Inputs {
            dataset,
            verbs,
            objects,
            stats,
        },
        values,
    })
}

fn write_store(store: &EmbeddingStore, path: &Path) -> Result<(), HarnessError> {
    let mut s = String::new();
    for w in store.words() {
        s.push_str(w);
        for x in store.get(w).expect("listed word") {
            s.push(' ');
            s.push_str(&x.to_string());
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(io_err(path))
}

impl SyntheticWorld {
    /// Writes the world in the on-disk formats and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<DataPaths, HarnessError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let paths = DataPaths::in_dir(dir);
        let ds = &self.inputs.dataset;
        let mut buf = Vec::new();
        ds.write_frames(&mut buf).map_err(io_err(&paths.frames))?;
        fs::write(&paths.frames, &buf).map_err(io_err(&paths.frames))?;
        buf.clear();
        ds.write_pairs(&mut buf).map_err(io_err(&paths.pairs))?;
        fs::write(&paths.pairs, &buf).map_err(io_err(&paths.pairs))?;
        write_store(&self.inputs.verbs, &paths.verb_embeddings)?;
        write_store(&self.inputs.objects, &paths.object_embeddings)?;
        buf.clear();
        for (frame, x, y, c) in self.inputs.stats.entries() {
            writeln!(buf, "{frame}\t{x}\t{y}\t{c}").expect("writing to memory");
        }
        fs::write(&paths.cooccurrence, &buf).map_err(io_err(&paths.cooccurrence))?;
        Ok(paths)
    }
}
