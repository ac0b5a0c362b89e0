use std::collections::BTreeMap;
use std::path::Path;

use super::{content_lines, read_to_string, DataError};

/// Counts of object pairs filling frame argument slots.
///
/// Pairs are kept in argument order: `(x, y)` means x filled the frame's
/// first slot and y its second. Marginals are sums over the joint table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CooccurrenceStats {
    joint: BTreeMap<(String, String, String), u64>,
    frames: BTreeMap<String, u64>,
    pairs: BTreeMap<(String, String), u64>,
    total: u64,
}

impl CooccurrenceStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, frame_key: &str, x: &str, y: &str, count: u64) {
        *self
            .joint
            .entry((frame_key.to_string(), x.to_string(), y.to_string()))
            .or_default() += count;
        *self.frames.entry(frame_key.to_string()).or_default() += count;
        *self.pairs.entry((x.to_string(), y.to_string())).or_default() += count;
        self.total += count;
    }

    /// Reads `frame_key<TAB>x<TAB>y<TAB>count` rows; repeated rows add up.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, DataError> {
        let mut stats = CooccurrenceStats::new();
        for (line, row) in content_lines(text) {
            let malformed = |msg: String| DataError::Malformed {
                path: origin.to_path_buf(),
                line,
                msg,
            };
            let fields: Vec<&str> = row.split('\t').collect();
            let [frame, x, y, count] = fields[..] else {
                return Err(malformed(format!("expected 4 fields, found {}", fields.len())));
            };
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad count `{count}`")))?;
            stats.add(frame, x, y, count);
        }
        Ok(stats)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        Self::parse(&read_to_string(path)?, path)
    }

    pub fn joint(&self, frame_key: &str, x: &str, y: &str) -> u64 {
        self.joint
            .get(&(frame_key.to_string(), x.to_string(), y.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn frame_count(&self, frame_key: &str) -> u64 {
        self.frames.get(frame_key).copied().unwrap_or(0)
    }

    pub fn pair_count(&self, x: &str, y: &str) -> u64 {
        self.pairs
            .get(&(x.to_string(), y.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Joint entries `(frame_key, x, y, count)` in sorted order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &str, u64)> {
        self.joint
            .iter()
            .map(|((f, x, y), c)| (f.as_str(), x.as_str(), y.as_str(), *c))
    }

    pub fn len(&self) -> usize {
        self.joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.is_empty()
    }
}

/// Natural-log PMI `ln(c(f,p) * N / (c(f) * c(p)))`; negative infinity when
/// the pair never fills the frame.
pub fn pmi(stats: &CooccurrenceStats, frame_key: &str, x: &str, y: &str) -> Result<f64, DataError> {
    let cf = stats.frame_count(frame_key);
    if cf == 0 {
        return Err(DataError::ZeroMarginal(format!("frame {frame_key}")));
    }
    let cp = stats.pair_count(x, y);
    if cp == 0 {
        return Err(DataError::ZeroMarginal(format!("pair {x}|{y}")));
    }
    let joint = stats.joint(frame_key, x, y);
    if joint == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    // log-space keeps large corpus counts from overflowing the product
    Ok((joint as f64).ln() + (stats.total() as f64).ln() - (cf as f64).ln() - (cp as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Builds stats with the requested joint and marginal counts by padding
    /// with filler rows.
    fn stats_with(joint: u64, cf: u64, cp: u64, n: u64) -> CooccurrenceStats {
        let mut s = CooccurrenceStats::new();
        s.add("f", "x", "y", joint);
        s.add("f", "filler_x", "filler_y", cf - joint);
        s.add("g", "x", "y", cp - joint);
        s.add("g", "rest_x", "rest_y", n - cf - (cp - joint));
        s
    }

    #[test]
    fn pmi_examples() {
        let s = stats_with(10, 100, 10, 100);
        assert!((s.frame_count("f"), s.pair_count("x", "y"), s.total()) == (100, 10, 100));
        assert!(pmi(&s, "f", "x", "y").unwrap().abs() < 1e-12);

        let s = stats_with(8, 10, 10, 100);
        assert!((pmi(&s, "f", "x", "y").unwrap() - 8f64.ln()).abs() < 1e-12);
        assert!((pmi(&s, "f", "x", "y").unwrap() - 2.0794).abs() < 1e-4);

        let mut s = CooccurrenceStats::new();
        s.add("f", "a", "b", 3);
        s.add("g", "x", "y", 3);
        assert_eq!(pmi(&s, "f", "x", "y").unwrap(), f64::NEG_INFINITY);
        assert!(matches!(pmi(&s, "h", "x", "y"), Err(DataError::ZeroMarginal(_))));
        assert!(matches!(pmi(&s, "f", "q", "r"), Err(DataError::ZeroMarginal(_))));
    }

    #[test]
    fn parse_sums_repeats_and_rejects_junk() {
        let text = "# frame\tx\ty\tcount\nthrew:dobj:-\tperson\tball\t3\nthrew:dobj:-\tperson\tball\t2\n";
        let s = CooccurrenceStats::parse(text, Path::new("c.tsv")).unwrap();
        assert_eq!(s.joint("threw:dobj:-", "person", "ball"), 5);
        assert_eq!(s.total(), 5);
        assert!(CooccurrenceStats::parse("a\tb\tc\n", Path::new("c")).is_err());
        assert!(CooccurrenceStats::parse("a\tb\tc\t-1\n", Path::new("c")).is_err());
    }

    proptest! {
        #[test]
        fn pmi_scale_invariant(joint in 1u64..50, extra_f in 0u64..50, extra_p in 0u64..50, rest in 0u64..50, k in 1u64..1000) {
            let cf = joint + extra_f;
            let cp = joint + extra_p;
            let n = cf + extra_p + rest;
            let a = pmi(&stats_with(joint, cf, cp, n), "f", "x", "y").unwrap();
            let b = pmi(&stats_with(joint * k, cf * k, cp * k, n * k), "f", "x", "y").unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
