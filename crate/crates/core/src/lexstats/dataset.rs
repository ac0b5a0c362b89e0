//! The labeled frame and object-pair data with its seed/dev/test splits.
//!
//! Frame rows: `verb, frame_type, preposition-or-"-", attribute, relation, split[, split20]`.
//! Pair rows: `object_x, object_y, attribute, relation, split[, split20]`.
//!
//! Fields are tab separated; relations are `>`, `<` or `=`; splits are
//! `seed`, `dev` or `test`. The `split` column holds the 5/45/50 assignment
//! and the optional trailing column the 20/30/50 one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{content_lines, read_to_string, DataError};
use crate::domain::{Attribute, Frame, NodeClass, ObjectPair, RelationValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    Seed,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Seed, Split::Dev, Split::Test];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Seed => "seed",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seed" | "train" => Ok(Split::Seed),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}`")),
        }
    }
}

/// Seed/dev/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SplitProfile {
    /// 5 / 45 / 50
    Five,
    /// 20 / 30 / 50
    Twenty,
}

impl SplitProfile {
    pub fn name(self) -> &'static str {
        match self {
            SplitProfile::Five => "5/45/50",
            SplitProfile::Twenty => "20/30/50",
        }
    }
}

impl fmt::Display for SplitProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "5" | "5%" | "5/45/50" | "five" => Ok(SplitProfile::Five),
            "20" | "20%" | "20/30/50" | "twenty" => Ok(SplitProfile::Twenty),
            _ => Err(format!("unknown split profile `{s}`")),
        }
    }
}

/// Active profile for each item class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitProfiles {
    pub frames: SplitProfile,
    pub pairs: SplitProfile,
}

impl SplitProfiles {
    pub fn uniform(p: SplitProfile) -> Self {
        SplitProfiles { frames: p, pairs: p }
    }

    pub fn for_class(&self, class: NodeClass) -> SplitProfile {
        match class {
            NodeClass::Frame => self.frames,
            NodeClass::ObjectPair => self.pairs,
        }
    }
}

impl Default for SplitProfiles {
    fn default() -> Self {
        SplitProfiles::uniform(SplitProfile::Five)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitAssignment {
    pub five: Split,
    pub twenty: Option<Split>,
}

impl SplitAssignment {
    pub fn get(&self, profile: SplitProfile) -> Option<Split> {
        match profile {
            SplitProfile::Five => Some(self.five),
            SplitProfile::Twenty => self.twenty,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameItem {
    frame: Frame,
    labels: BTreeMap<Attribute, RelationValue>,
    assignment: SplitAssignment,
}

impl FrameItem {
    pub fn new(frame: Frame, labels: BTreeMap<Attribute, RelationValue>, assignment: SplitAssignment) -> Self {
        FrameItem {
            frame,
            labels,
            assignment,
        }
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn assignment(&self) -> SplitAssignment {
        self.assignment
    }

    /// Attributes this frame has a usable label for.
    pub fn attributes(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.labels.keys().copied()
    }

    pub fn has_attribute(&self, a: Attribute) -> bool {
        self.labels.contains_key(&a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairItem {
    pair: ObjectPair,
    /// Relations as seen in the canonical (x, y) order.
    labels: BTreeMap<Attribute, RelationValue>,
    assignment: SplitAssignment,
}

impl PairItem {
    pub fn new(pair: ObjectPair, labels: BTreeMap<Attribute, RelationValue>, assignment: SplitAssignment) -> Self {
        PairItem {
            pair,
            labels,
            assignment,
        }
    }

    pub fn pair(&self) -> &ObjectPair {
        &self.pair
    }

    pub fn assignment(&self) -> SplitAssignment {
        self.assignment
    }

    pub fn attributes(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.labels.keys().copied()
    }

    pub fn has_attribute(&self, a: Attribute) -> bool {
        self.labels.contains_key(&a)
    }
}

/// Labeled frames and object pairs.
///
/// Gold labels are only reachable through [`frame_label`] and
/// [`pair_label`], which count reads per split of the active profile so
/// callers can prove held-out labels were never consulted.
///
/// [`frame_label`]: KnowledgeDataset::frame_label
/// [`pair_label`]: KnowledgeDataset::pair_label
#[derive(Debug, Default)]
pub struct KnowledgeDataset {
    frames: Vec<FrameItem>,
    pairs: Vec<PairItem>,
    profiles: SplitProfiles,
    reads: [AtomicUsize; 3],
}

impl Clone for KnowledgeDataset {
    fn clone(&self) -> Self {
        KnowledgeDataset {
            frames: self.frames.clone(),
            pairs: self.pairs.clone(),
            profiles: self.profiles,
            reads: Default::default(),
        }
    }
}

impl PartialEq for KnowledgeDataset {
    fn eq(&self, other: &Self) -> bool {
        self.frames == other.frames && self.pairs == other.pairs && self.profiles == other.profiles
    }
}

impl KnowledgeDataset {
    /// Validates and sorts the items. Frames must be split by verb and the
    /// requested profiles must be available for every item.
    pub fn from_items(
        mut frames: Vec<FrameItem>,
        mut pairs: Vec<PairItem>,
        profiles: SplitProfiles,
    ) -> Result<Self, DataError> {
        frames.sort_by(|a, b| a.frame.cmp(&b.frame));
        pairs.sort_by(|a, b| a.pair.cmp(&b.pair));
        for w in frames.windows(2) {
            if w[0].frame == w[1].frame {
                return Err(duplicate(&w[0].frame.key()));
            }
        }
        for w in pairs.windows(2) {
            if w[0].pair == w[1].pair {
                return Err(duplicate(&w[0].pair.key()));
            }
        }
        let mut by_verb: BTreeMap<&str, SplitAssignment> = BTreeMap::new();
        for item in &frames {
            let prev = by_verb.entry(&item.frame.verb).or_insert(item.assignment);
            if *prev != item.assignment {
                return Err(DataError::Malformed {
                    path: Path::new("<frames>").to_path_buf(),
                    line: 0,
                    msg: format!("frames of verb `{}` are assigned to different splits", item.frame.verb),
                });
            }
        }
        let mut ds = KnowledgeDataset {
            frames,
            pairs,
            profiles: SplitProfiles::default(),
            reads: Default::default(),
        };
        ds.set_profiles(profiles)?;
        Ok(ds)
    }

    pub fn set_profiles(&mut self, profiles: SplitProfiles) -> Result<(), DataError> {
        if profiles.frames == SplitProfile::Twenty {
            if let Some(f) = self.frames.iter().find(|f| f.assignment.twenty.is_none()) {
                return Err(DataError::MissingProfile(f.frame.key()));
            }
        }
        if profiles.pairs == SplitProfile::Twenty {
            if let Some(p) = self.pairs.iter().find(|p| p.assignment.twenty.is_none()) {
                return Err(DataError::MissingProfile(p.pair.key()));
            }
        }
        self.profiles = profiles;
        self.reset_audit();
        Ok(())
    }

    pub fn with_profiles(&self, profiles: SplitProfiles) -> Result<Self, DataError> {
        let mut ds = self.clone();
        ds.set_profiles(profiles)?;
        Ok(ds)
    }

    pub fn profiles(&self) -> SplitProfiles {
        self.profiles
    }

    pub fn frames(&self) -> &[FrameItem] {
        &self.frames
    }

    pub fn pairs(&self) -> &[PairItem] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty() && self.pairs.is_empty()
    }

    pub fn frame_split(&self, i: usize) -> Split {
        self.frames[i]
            .assignment
            .get(self.profiles.frames)
            .expect("profile validated on load")
    }

    pub fn pair_split(&self, i: usize) -> Split {
        self.pairs[i]
            .assignment
            .get(self.profiles.pairs)
            .expect("profile validated on load")
    }

    pub fn split_of(&self, class: NodeClass, i: usize) -> Split {
        match class {
            NodeClass::Frame => self.frame_split(i),
            NodeClass::ObjectPair => self.pair_split(i),
        }
    }

    pub fn len_of(&self, class: NodeClass) -> usize {
        match class {
            NodeClass::Frame => self.frames.len(),
            NodeClass::ObjectPair => self.pairs.len(),
        }
    }

    pub fn has_attribute(&self, class: NodeClass, i: usize, a: Attribute) -> bool {
        match class {
            NodeClass::Frame => self.frames[i].has_attribute(a),
            NodeClass::ObjectPair => self.pairs[i].has_attribute(a),
        }
    }

    /// Gold relation of frame `i`, recorded against its split.
    pub fn frame_label(&self, i: usize, a: Attribute) -> Option<RelationValue> {
        self.reads[self.frame_split(i).index()].fetch_add(1, Ordering::Relaxed);
        self.frames[i].labels.get(&a).copied()
    }

    /// Gold relation of pair `i` in canonical order, recorded against its split.
    pub fn pair_label(&self, i: usize, a: Attribute) -> Option<RelationValue> {
        self.reads[self.pair_split(i).index()].fetch_add(1, Ordering::Relaxed);
        self.pairs[i].labels.get(&a).copied()
    }

    pub fn label(&self, class: NodeClass, i: usize, a: Attribute) -> Option<RelationValue> {
        match class {
            NodeClass::Frame => self.frame_label(i, a),
            NodeClass::ObjectPair => self.pair_label(i, a),
        }
    }

    /// Number of gold-label reads that hit `split` since the last reset.
    pub fn label_reads(&self, split: Split) -> usize {
        self.reads[split.index()].load(Ordering::Relaxed)
    }

    pub fn reset_audit(&self) {
        for r in &self.reads {
            r.store(0, Ordering::Relaxed);
        }
    }

    /// Distinct items per split (seed, dev, test) under the active profile.
    pub fn split_counts(&self, class: NodeClass) -> [usize; 3] {
        let mut counts = [0; 3];
        for i in 0..self.len_of(class) {
            counts[self.split_of(class, i).index()] += 1;
        }
        counts
    }

    /// Items carrying a usable label for `a`.
    pub fn usable_count(&self, class: NodeClass, a: Attribute) -> usize {
        (0..self.len_of(class))
            .filter(|&i| self.has_attribute(class, i, a))
            .count()
    }

    pub fn verbs(&self) -> BTreeSet<&str> {
        self.frames.iter().map(|f| f.frame.verb.as_str()).collect()
    }

    pub fn objects(&self) -> BTreeSet<&str> {
        self.pairs
            .iter()
            .flat_map(|p| [p.pair.x(), p.pair.y()])
            .collect()
    }

    /// Writes the frame table; output is sorted and re-parses identically.
    pub fn write_frames<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# verb\tframe_type\tpreposition\tattribute\trelation\tsplit\tsplit20")?;
        for item in &self.frames {
            let f = &item.frame;
            for (a, r) in &item.labels {
                write!(
                    out,
                    "{}\t{}\t{}\t{a}\t{r}\t{}",
                    f.verb,
                    f.frame_type,
                    f.preposition.as_deref().unwrap_or("-"),
                    item.assignment.five
                )?;
                write_twenty(&mut out, item.assignment.twenty)?;
            }
        }
        Ok(())
    }

    pub fn write_pairs<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# object_x\tobject_y\tattribute\trelation\tsplit\tsplit20")?;
        for item in &self.pairs {
            for (a, r) in &item.labels {
                write!(
                    out,
                    "{}\t{}\t{a}\t{r}\t{}",
                    item.pair.x(),
                    item.pair.y(),
                    item.assignment.five
                )?;
                write_twenty(&mut out, item.assignment.twenty)?;
            }
        }
        Ok(())
    }

    pub fn parse(frames_text: &str, pairs_text: &str, profiles: SplitProfiles) -> Result<Self, DataError> {
        Self::parse_with_origin(frames_text, Path::new("<frames>"), pairs_text, Path::new("<pairs>"), profiles)
    }

    fn parse_with_origin(
        frames_text: &str,
        frames_path: &Path,
        pairs_text: &str,
        pairs_path: &Path,
        profiles: SplitProfiles,
    ) -> Result<Self, DataError> {
        let frames = parse_rows(frames_text, frames_path, 6, |fields| {
            let frame = Frame::new(
                fields[0],
                fields[1].parse()?,
                (fields[2] != "-").then_some(fields[2]),
            );
            Ok((frame, false))
        })?
        .into_iter()
        .map(|(frame, (labels, assignment))| FrameItem::new(frame, labels, assignment))
        .collect();

        let pairs = parse_rows(pairs_text, pairs_path, 5, |fields| Ok(ObjectPair::new(fields[0], fields[1])?))?
            .into_iter()
            .map(|(pair, (labels, assignment))| PairItem::new(pair, labels, assignment))
            .collect();

        Self::from_items(frames, pairs, profiles)
    }
}

fn duplicate(key: &str) -> DataError {
    DataError::Malformed {
        path: Path::new("<dataset>").to_path_buf(),
        line: 0,
        msg: format!("duplicate item `{key}`"),
    }
}

fn write_twenty<W: Write>(out: &mut W, twenty: Option<Split>) -> std::io::Result<()> {
    match twenty {
        Some(s) => writeln!(out, "\t{s}"),
        None => writeln!(out),
    }
}

type Labeled = (BTreeMap<Attribute, RelationValue>, SplitAssignment);

/// Shared row reader. `key_of` maps the leading fields to the item key and
/// reports whether the row's relation must be flipped into key order.
fn parse_rows<K: Ord + Clone>(
    text: &str,
    origin: &Path,
    base_fields: usize,
    key_of: impl Fn(&[&str]) -> Result<(K, bool), DataError>,
) -> Result<BTreeMap<K, Labeled>, DataError> {
    let mut items: BTreeMap<K, Labeled> = BTreeMap::new();
    for (line, row) in content_lines(text) {
        let malformed = |msg: String| DataError::Malformed {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let fields: Vec<&str> = row.split('\t').map(str::trim).collect();
        if fields.len() != base_fields && fields.len() != base_fields + 1 {
            return Err(malformed(format!(
                "expected {base_fields} or {} fields, found {}",
                base_fields + 1,
                fields.len()
            )));
        }
        let n = base_fields;
        let (key, flip_relation) = key_of(&fields).map_err(|e| malformed(e.to_string()))?;
        let attribute: Attribute = fields[n - 3].parse().map_err(|e: crate::domain::DomainError| malformed(e.to_string()))?;
        let mut relation: RelationValue = fields[n - 2]
            .parse()
            .map_err(|e: crate::domain::DomainError| malformed(e.to_string()))?;
        if flip_relation {
            relation = relation.flip();
        }
        let five: Split = fields[n - 1].parse().map_err(malformed)?;
        let twenty = match fields.get(n) {
            Some(s) if !s.is_empty() && *s != "-" => Some(s.parse::<Split>().map_err(malformed)?),
            _ => None,
        };
        let assignment = SplitAssignment { five, twenty };

        let entry = items
            .entry(key)
            .or_insert_with(|| (BTreeMap::new(), assignment));
        if entry.1 != assignment {
            return Err(malformed("item assigned to different splits on different rows".into()));
        }
        if entry.0.insert(attribute, relation).is_some() {
            return Err(malformed(format!("duplicate label for attribute {attribute}")));
        }
    }
    Ok(items)
}

/// Loads the frame and pair tables.
pub fn load_dataset(
    frame_file: impl AsRef<Path>,
    pair_file: impl AsRef<Path>,
    profiles: SplitProfiles,
) -> Result<KnowledgeDataset, DataError> {
    let (fp, pp) = (frame_file.as_ref(), pair_file.as_ref());
    KnowledgeDataset::parse_with_origin(&read_to_string(fp)?, fp, &read_to_string(pp)?, pp, profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FrameType;

    const FRAMES: &str = "\
# verb\ttype\tprep\tattr\trel\tsplit\tsplit20
threw\tdobj\t-\tsize\t>\tseed\tseed
threw\tdobj\t-\tspeed\t<\tseed\tseed
threw\tdobj_pobj\tinto\tsize\t<\tseed\tseed
walked\tpobj\tinto\tsize\t>\tdev\tseed
ate\tdobj\t-\tsize\t>\ttest\ttest
";

    const PAIRS: &str = "\
person\tbasketball\tsize\t>\tseed\tseed
person\tbasketball\tweight\t>\tseed\tseed
ant\tzebra\tsize\t<\tdev\tseed
car\tHUMAN\tspeed\t>\ttest\ttest
";

    #[test]
    fn parses_and_canonicalizes() {
        let ds = KnowledgeDataset::parse(FRAMES, PAIRS, SplitProfiles::default()).unwrap();
        assert_eq!(ds.frames().len(), 4);
        assert_eq!(ds.pairs().len(), 3);
        assert_eq!(ds.split_counts(NodeClass::Frame), [2, 1, 1]);
        assert_eq!(ds.split_counts(NodeClass::ObjectPair), [1, 1, 1]);
        assert_eq!(ds.usable_count(NodeClass::Frame, Attribute::Size), 4);
        assert_eq!(ds.usable_count(NodeClass::Frame, Attribute::Speed), 1);

        let i = ds.pairs().iter().position(|p| p.pair().x() == "basketball").unwrap();
        assert_eq!(ds.pair_label(i, Attribute::Size), Some(RelationValue::Lt));
        let j = ds.pairs().iter().position(|p| p.pair().x() == "HUMAN").unwrap();
        assert_eq!(ds.pairs()[j].pair().y(), "car");
        assert_eq!(ds.pair_label(j, Attribute::Speed), Some(RelationValue::Lt));

        let k = ds
            .frames()
            .iter()
            .position(|f| f.frame() == &Frame::new("threw", FrameType::DobjPobj, Some("into")))
            .unwrap();
        assert_eq!(ds.frame_label(k, Attribute::Size), Some(RelationValue::Lt));
    }

    #[test]
    fn twenty_profile_switches_splits() {
        let ds = KnowledgeDataset::parse(FRAMES, PAIRS, SplitProfiles::uniform(SplitProfile::Twenty)).unwrap();
        assert_eq!(ds.split_counts(NodeClass::Frame), [3, 0, 1]);
        assert_eq!(ds.split_counts(NodeClass::ObjectPair), [2, 0, 1]);
        let no_twenty = "a\tb\tsize\t>\tseed\n";
        assert!(matches!(
            KnowledgeDataset::parse("", no_twenty, SplitProfiles::uniform(SplitProfile::Twenty)),
            Err(DataError::MissingProfile(_))
        ));
        assert!(KnowledgeDataset::parse("", no_twenty, SplitProfiles::default()).is_ok());
    }

    #[test]
    fn audit_counts_reads_per_split() {
        let ds = KnowledgeDataset::parse(FRAMES, PAIRS, SplitProfiles::default()).unwrap();
        assert_eq!(ds.label_reads(Split::Dev), 0);
        for i in 0..ds.frames().len() {
            if ds.frame_split(i) == Split::Seed {
                ds.frame_label(i, Attribute::Size);
            }
        }
        assert_eq!(ds.label_reads(Split::Seed), 2);
        assert_eq!(ds.label_reads(Split::Dev) + ds.label_reads(Split::Test), 0);
        ds.reset_audit();
        assert_eq!(ds.label_reads(Split::Seed), 0);
    }

    #[test]
    fn rejects_bad_rows() {
        let p = SplitProfiles::default();
        let cases = [
            ("x\tdobj\t-\tcolor\t>\tseed\n", ""),
            ("x\tdobj\t-\tsize\t?\tseed\n", ""),
            ("x\tdobj\t-\tsize\t>\ttrain2\n", ""),
            ("x\tnsubj\t-\tsize\t>\tseed\n", ""),
            ("x\tdobj\t-\tsize\t>\tseed\nx\tdobj\t-\tsize\t<\tseed\n", ""),
            ("x\tdobj\t-\tsize\t>\tseed\nx\tpobj\tin\tsize\t>\tdev\n", ""),
            ("", "car\tcar\tsize\t=\tseed\n"),
            ("", "a\tb\tsize\t>\tseed\nb\ta\tsize\t<\tseed\n"),
            ("", "a\tb\tsize\n"),
        ];
        for (frames, pairs) in cases {
            assert!(KnowledgeDataset::parse(frames, pairs, p).is_err(), "{frames:?} {pairs:?}");
        }
    }

    #[test]
    fn empty_files_give_empty_dataset() {
        let ds = KnowledgeDataset::parse("", "# only a comment\n", SplitProfiles::default()).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn save_and_reload_is_exact() {
        let ds = KnowledgeDataset::parse(FRAMES, PAIRS, SplitProfiles::default()).unwrap();
        let (mut f, mut p) = (Vec::new(), Vec::new());
        ds.write_frames(&mut f).unwrap();
        ds.write_pairs(&mut p).unwrap();
        let back = KnowledgeDataset::parse(
            std::str::from_utf8(&f).unwrap(),
            std::str::from_utf8(&p).unwrap(),
            SplitProfiles::default(),
        )
        .unwrap();
        assert_eq!(back, ds);
        let (mut f2, mut p2) = (Vec::new(), Vec::new());
        back.write_frames(&mut f2).unwrap();
        back.write_pairs(&mut p2).unwrap();
        assert_eq!((f, p), (f2, p2));
    }
}
